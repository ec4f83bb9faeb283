"""Binary latent-code store: one file per code.

Layout: magic ``FALC`` (4 bytes), format version (u32 LE), rows (u32 LE),
cols (u32 LE), then the row-major float32 little-endian payload. The same
format holds real inversions, fake-pool codes and optimized codes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .util import atomic_write_bytes

MAGIC = b"FALC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def encode_code(code: np.ndarray) -> bytes:
    code = np.asarray(code)
    if code.ndim != 2:
        raise ValidationError(f"latent store expects a 2-d code, got shape {code.shape}")
    if not np.all(np.isfinite(code)):
        raise ValidationError("latent store refuses non-finite codes")
    payload = np.ascontiguousarray(code, dtype="<f4")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, code.shape[0], code.shape[1])
    return header + payload.tobytes()


def decode_code(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise ValidationError("latent file truncated before header")
    magic, version, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValidationError(f"bad latent-file magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported latent format version {version}")
    expected = _HEADER.size + rows * cols * 4
    if len(blob) != expected:
        raise ValidationError(f"latent payload size {len(blob)} != expected {expected}")
    flat = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    code = flat.reshape(rows, cols).copy()
    if not np.all(np.isfinite(code)):
        raise ValidationError("latent file contains non-finite values")
    return code


def save_code(path: Path | str, code: np.ndarray) -> None:
    atomic_write_bytes(path, encode_code(code))


def load_code(path: Path | str) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_code(f.read())
