"""Image file IO with a fixed, deterministic encoding.

Images are written as 16-bit PNGs so that the [0, 1] float pixels survive a
round trip with quantization error below 1e-4 (8-bit would inject visible
noise into the feature-space checks). Encoding settings are pinned so equal
arrays produce byte-identical files.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import cv2
import numpy as np

from .errors import ValidationError
from .types import validate_image

_PNG_PARAMS = [cv2.IMWRITE_PNG_COMPRESSION, 6, cv2.IMWRITE_PNG_STRATEGY,
               cv2.IMWRITE_PNG_STRATEGY_DEFAULT]


def save_image(path: Path | str, image: np.ndarray) -> None:
    image = validate_image(image)
    path = Path(path)
    if path.suffix.lower() != ".png":
        raise ValidationError(f"image outputs must be .png, got {path.name}")
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.clip(np.rint(np.asarray(image, dtype=np.float64) * 65535.0), 0, 65535)
    bgr = data.astype(np.uint16)[:, :, ::-1]
    ok, buf = cv2.imencode(".png", bgr, _PNG_PARAMS)
    if not ok:
        raise ValidationError(f"PNG encoding failed for {path}")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(buf.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_image(path: Path | str) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValidationError(f"unreadable image file: {path}")
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise ValidationError(f"expected 3-channel image at {path}, got shape {raw.shape}")
    rgb = raw[:, :, ::-1].astype(np.float64)
    scale = 65535.0 if raw.dtype == np.uint16 else 255.0
    return validate_image(rgb / scale, str(path))
