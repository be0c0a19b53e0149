# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""PNG read/write through OpenCV, as float RGB in [0, 1]."""

from __future__ import annotations

import logging
from pathlib import Path

import cv2
import numpy as np

from .errors import InputError

logger = logging.getLogger(__name__)


def load_png(path: str | Path) -> np.ndarray:
    """Read an 8- or 16-bit PNG. Gray stays H×W; color becomes RGB H×W×3."""
    path = Path(path)
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise InputError(f"cannot read image: {path}")
    if raw.dtype == np.uint8:
        img = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        img = raw.astype(np.float64) / 65535.0
    else:
        raise InputError(f"unsupported PNG depth {raw.dtype} in {path}")
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[:, :, :3]
        img = img[:, :, ::-1].copy()
    logger.debug("loaded %s %s", path, img.shape)
    return img


def save_png(path: str | Path, img: np.ndarray, bits: int = 16) -> None:
    """Write an image in [0, 1] as a PNG of the given bit depth (8 or 16)."""
    if bits not in (8, 16):
        raise InputError(f"bits must be 8 or 16, got {bits}")
    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    scale, dtype = (65535.0, np.uint16) if bits == 16 else (255.0, np.uint8)
    out = np.rint(arr * scale).astype(dtype)
    if out.ndim == 3:
        out = out[:, :, ::-1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.ascontiguousarray(out)):
        raise InputError(f"cannot write image: {path}")
