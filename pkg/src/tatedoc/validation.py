"""Input validation helpers shared by the pixel-level modules."""

from __future__ import annotations

import numpy as np


def check_gray(img: np.ndarray, name: str = "img") -> np.ndarray:
    """Validate a grayscale image: 2-D uint8 array, returned unchanged."""
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (h, w), got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"{name} must be uint8, got {arr.dtype}")
    return arr


def check_mask(bm: np.ndarray, name: str = "bm") -> np.ndarray:
    """Validate an ink mask: 2-D bool array, returned unchanged."""
    arr = np.asarray(bm)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (h, w), got shape {arr.shape}")
    if arr.dtype != np.bool_:
        raise ValueError(f"{name} must be bool, got {arr.dtype}")
    return arr


def check_nonneg_int(value: int, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return int(value)
