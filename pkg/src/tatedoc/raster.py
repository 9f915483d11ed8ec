"""Grayscale images, binarization, and OR-pooling downsampling.

Images are plain numpy arrays: a grayscale page is a ``(h, w)`` uint8 array
(0 = black ink, 255 = white paper) and an ink mask is a ``(h, w)`` bool
array (True = ink).  All segmentation operates on these two shapes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import EmptyResult
from .validation import check_gray, check_mask, check_nonneg_int


def otsu_threshold(img: np.ndarray) -> int:
    """Pick a global threshold maximizing inter-class variance.

    The 256-bin histogram is split into [0..t] (dark) and [t+1..255]
    (light) for every t; the t maximizing the between-class variance
    wins.  Ties are broken by the floor of the mean tied t (so a clean
    two-level image thresholds midway between its levels).  A uniform
    image has no separable classes and yields 0, which marks every
    pixel background under the ``intensity < threshold`` rule.

    Returns:
        Threshold T such that ink = pixels with intensity < T.
    """
    img = check_gray(img)
    if img.size == 0:
        raise ValueError("cannot threshold an empty image")
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    omega = np.cumsum(hist) / total              # class-0 weight for t = 0..255
    mu = np.cumsum(hist * np.arange(256)) / total
    mu_total = mu[-1]
    # between-class variance for split [0..t] | [t+1..255]
    denom = omega * (1.0 - omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = np.where(denom > 0, (mu_total * omega - mu) ** 2 / denom, 0.0)
    best = sigma_b.max()
    if best <= 0.0:
        return 0  # uniform image: nothing separates, call everything background
    ties = np.flatnonzero(sigma_b == best)
    t_star = int(np.floor(ties.mean()))
    return t_star + 1


def binarize(img: np.ndarray, threshold: int | None = None) -> np.ndarray:
    """Binarize a grayscale image; ink iff intensity < threshold.

    Args:
        img: (h, w) uint8 grayscale image.
        threshold: explicit cut; None selects it by Otsu's criterion.

    Returns:
        (h, w) bool ink mask.
    """
    img = check_gray(img)
    if threshold is None:
        threshold = otsu_threshold(img)
    return img < threshold


def render_mask(bm: np.ndarray, ink: int = 0, background: int = 255) -> np.ndarray:
    """Render an ink mask back to a grayscale image."""
    bm = check_mask(bm)
    return np.where(bm, np.uint8(ink), np.uint8(background))


def downsample(bm: np.ndarray, factor: int) -> np.ndarray:
    """Reduce an ink mask by OR-pooling over factor×factor blocks.

    Output dims are floor(in/factor); a coarse pixel is ink iff any pixel
    of its source block is ink, so single-pixel strokes survive the 1/8
    reduction used for frame and row detection.  Remainder rows/columns
    beyond the last full block are dropped, matching the coordinate map
    x_full = factor * x_coarse used to scale results back up.
    """
    bm = check_mask(bm)
    factor = check_nonneg_int(factor, "factor")
    if factor < 1:
        raise ValueError("factor must be >= 1")
    h, w = bm.shape
    if factor == 1:
        return bm.copy()
    oh, ow = h // factor, w // factor
    if oh == 0 or ow == 0:
        raise EmptyResult(f"factor {factor} exceeds image dims {w}x{h}")
    trimmed = bm[: oh * factor, : ow * factor]
    return trimmed.reshape(oh, factor, ow, factor).any(axis=(1, 3))


def load_gray(path: str | Path) -> np.ndarray:
    """Load a PNG as grayscale; color inputs are converted to luma."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8).copy()


def save_gray(path: str | Path, img: np.ndarray) -> None:
    Image.fromarray(check_gray(img), mode="L").save(path)
