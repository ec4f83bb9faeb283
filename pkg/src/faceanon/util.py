"""Small shared helpers: seeding, hashing, atomic file IO."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def cache_dir() -> Path:
    """Scratch directory for demo datasets and other reusable artifacts.

    ``FACEANON_CACHE_DIR`` is the only environment variable the library
    honors; run behavior itself is controlled entirely by config and flags.
    """
    root = os.environ.get("FACEANON_CACHE_DIR")
    path = Path(root) if root else Path.home() / ".cache" / "faceanon"
    path.mkdir(parents=True, exist_ok=True)
    return path


def derive_seed(global_seed: int, *parts) -> int:
    """Stable per-item seed from a global seed and item identifiers.

    Uses SHA-256 rather than ``hash()`` so results do not depend on the
    interpreter, platform, or hash randomization. Worker scheduling and
    resume order therefore never change per-item randomness.
    """
    h = hashlib.sha256()
    h.update(str(int(global_seed)).encode())
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(global_seed: int, *parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(global_seed, *parts)))


def canonical_json(obj) -> str:
    """Canonical JSON encoding: sorted keys, no whitespace variance."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def stable_hash(obj) -> str:
    """SHA-256 hex digest of the canonical JSON form of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def hash_arrays(*arrays: np.ndarray) -> str:
    """Fingerprint a sequence of arrays (contents, dtype and shape)."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def file_fingerprint(path: Path | str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    """Write via temp file + rename so a crash never leaves partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path | str, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def atomic_write_json(path: Path | str, obj) -> None:
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path: Path | str):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def read_jsonl(path: Path | str) -> list:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_jsonl(path: Path | str, rows) -> None:
    atomic_write_text(path, "".join(canonical_json(r) + "\n" for r in rows))
