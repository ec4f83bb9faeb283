"""Latent-store binary format: header layout, round trips, corruption."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faceanon.errors import ValidationError
from faceanon.latent_store import decode_code, encode_code, load_code, save_code


def test_header_golden_bytes():
    code = np.arange(6, dtype=np.float32).reshape(2, 3)
    blob = encode_code(code)
    assert blob[:4] == b"FALC"
    version, rows, cols = struct.unpack_from("<III", blob, 4)
    assert (version, rows, cols) == (1, 2, 3)
    assert blob[16:] == code.astype("<f4").tobytes()


def test_roundtrip_file(tmp_path):
    code = np.random.default_rng(0).standard_normal((18, 512)).astype(np.float32)
    path = tmp_path / "w.falc"
    save_code(path, code)
    assert np.array_equal(load_code(path), code)


@settings(max_examples=25, deadline=None)
@given(
    rows=st.integers(min_value=1, max_value=20),
    cols=st.integers(min_value=1, max_value=64),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_roundtrip_property(rows, cols, seed):
    code = np.random.default_rng(seed).standard_normal((rows, cols)).astype(np.float32)
    assert np.array_equal(decode_code(encode_code(code)), code)


def test_rejects_bad_magic():
    blob = b"XXXX" + encode_code(np.zeros((1, 1), dtype=np.float32))[4:]
    with pytest.raises(ValidationError):
        decode_code(blob)


def test_rejects_truncated_payload():
    blob = encode_code(np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ValidationError):
        decode_code(blob[:-4])


def test_rejects_wrong_version():
    code = np.zeros((1, 1), dtype=np.float32)
    blob = bytearray(encode_code(code))
    struct.pack_into("<I", blob, 4, 99)
    with pytest.raises(ValidationError):
        decode_code(bytes(blob))


def test_rejects_nonfinite():
    with pytest.raises(ValidationError):
        encode_code(np.array([[np.inf]], dtype=np.float32))
