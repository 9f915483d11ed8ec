"""Region classification: text vs title vs mis-segmented, plus repair.

The classifier seam is pluggable.  The default is a fixed-threshold
heuristic over run-length statistics of the normalized crop; an external
process speaking a one-line protocol can be swapped in where a trained
model is available.
"""

from __future__ import annotations

import enum
import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .errors import EmptyRegion
from .geometry import Rect
from .raster import save_gray, render_mask
from .segmentation import connected_components, rlsa_horizontal, rlsa_vertical, _merge_axis_overlaps, _ink_bbox
from .validation import check_mask

NORM_HEIGHT = 200
NORM_WIDTH = 522


class RegionClass(enum.Enum):
    TEXT = "text"
    TITLE = "title"
    MIS_SEGMENTED = "misseg"


def normalize_region(region_img: np.ndarray) -> np.ndarray:
    """Nearest-neighbor rescale of a crop to the fixed 200×522 input size."""
    bm = check_mask(region_img)
    h, w = bm.shape
    if h == 0 or w == 0 or not bm.any():
        raise EmptyRegion("cannot normalize an empty crop")
    rows = (np.arange(NORM_HEIGHT) * h) // NORM_HEIGHT
    cols = (np.arange(NORM_WIDTH) * w) // NORM_WIDTH
    return bm[rows[:, None], cols[None, :]]


def region_features(norm: np.ndarray) -> dict:
    """Run-length statistics of a normalized crop.

    stroke_width: median horizontal ink-run length — title strokes are
    noticeably wider than text strokes.
    max_column_gap / column_gap_count: widths of background runs in the
    vertical projection; a merged pair of blocks carries one outsized gap.
    """
    norm = check_mask(norm)
    h, w = norm.shape
    padded = np.zeros((h, w + 2), dtype=bool)
    padded[:, 1:-1] = norm
    flat = padded.ravel().astype(np.int8)
    d = np.diff(flat)
    run_lengths = np.flatnonzero(d == -1) - np.flatnonzero(d == 1)

    col_ink = norm.any(axis=0)
    cols = np.flatnonzero(col_ink)
    gap_count = 0
    max_gap = 0
    if len(cols) > 0:
        interior = col_ink[cols[0] : cols[-1] + 1].astype(np.int8)
        dc = np.diff(np.concatenate([[1], interior, [1]]))
        widths = np.flatnonzero(dc == 1) - np.flatnonzero(dc == -1)
        gap_count = len(widths)
        max_gap = int(widths.max()) if gap_count else 0

    return {
        "ink_density": float(norm.mean()),
        "stroke_width": float(np.median(run_lengths)) if len(run_lengths) else 0.0,
        "column_gap_count": gap_count,
        "max_column_gap": max_gap,
    }


def _squash(margin: float) -> float:
    m = max(0.0, margin)
    return m / (1.0 + m)


class HeuristicClassifier(BaseEstimator):
    """Fixed linear thresholds over :func:`region_features`.

    A block whose widest internal column gap is far above its own column
    pitch is two blocks (mis-segmented); otherwise dense wide-stroke
    blocks are titles and sparse thin-stroke blocks are text.  Confidence
    is the winning margin squashed to [0, 1).
    """

    def __init__(self, misseg_gap: float = 62.0, title_density: float = 0.32):
        self.misseg_gap = misseg_gap
        self.title_density = title_density

    def classify(self, norm: np.ndarray) -> tuple[RegionClass, float]:
        f = region_features(norm)
        if f["max_column_gap"] >= self.misseg_gap:
            margin = (f["max_column_gap"] - self.misseg_gap) / self.misseg_gap
            return RegionClass.MIS_SEGMENTED, _squash(margin)
        d = f["ink_density"]
        if d >= self.title_density:
            return RegionClass.TITLE, _squash((d - self.title_density) / self.title_density)
        return RegionClass.TEXT, _squash((self.title_density - d) / self.title_density)

    def predict(self, crops) -> list[RegionClass]:
        """sklearn-style batch entry point over raw (unnormalized) crops."""
        return [self.classify(normalize_region(c))[0] for c in crops]


_PROTOCOL_LABELS = {
    "text": RegionClass.TEXT,
    "title": RegionClass.TITLE,
    "misseg": RegionClass.MIS_SEGMENTED,
}


class ExternalClassifier:
    """Route crops to an external classifier process.

    Protocol: one PNG path per request line on the child's stdin; the
    child answers ``text|title|misseg confidence`` on one stdout line.
    The child is started lazily and shared across calls.
    """

    def __init__(self, command: str):
        self.command = command
        self._proc: subprocess.Popen | None = None
        self._tmp: tempfile.TemporaryDirectory | None = None
        self._n = 0

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
            self._tmp = tempfile.TemporaryDirectory(prefix="tatedoc-clf-")
        return self._proc

    def classify(self, norm: np.ndarray) -> tuple[RegionClass, float]:
        proc = self._ensure()
        self._n += 1
        path = Path(self._tmp.name) / f"crop-{self._n}.png"
        save_gray(path, render_mask(norm))
        proc.stdin.write(f"{path}\n")
        proc.stdin.flush()
        reply = proc.stdout.readline().strip()
        if not reply:
            raise RuntimeError(f"external classifier {self.command!r} closed its stdout")
        try:
            label, conf = reply.split()
            return _PROTOCOL_LABELS[label], min(1.0, max(0.0, float(conf)))
        except (ValueError, KeyError) as exc:
            raise RuntimeError(f"bad reply from external classifier: {reply!r}") from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
        if self._tmp is not None:
            self._tmp.cleanup()
        self._proc = None
        self._tmp = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def classify_region(model, region_img: np.ndarray) -> tuple[RegionClass, float]:
    """Normalize a crop and ask the model; deterministic for a fixed model."""
    return model.classify(normalize_region(region_img))


def split_missegmented(region_img: np.ndarray, c_region: int | None = None) -> list[Rect]:
    """Re-split a crop flagged as mis-segmented, with halved closing threshold.

    Halving keeps each true block fused (its internal gaps are well below
    even the halved threshold) while the offending inter-block gap, which
    the full threshold wrongly bridged, stays open.  Returns right-to-left
    rects, or the whole crop's bbox when no split emerges (repair failed;
    callers flag those).
    """
    region_img = check_mask(region_img)
    if not region_img.any():
        raise EmptyRegion("blank region crop")
    h = region_img.shape[0]
    if c_region is None:
        c_region = max(1, round(0.1 * h))
    half = max(1, c_region // 2)
    smoothed = rlsa_horizontal(rlsa_vertical(region_img, half), half)
    comps = connected_components(smoothed, connectivity=8)
    kept = [(c.bbox, c.pixel_count) for c in comps if c.pixel_count >= 30]
    kept = _merge_axis_overlaps(kept, "x", "x2")
    if len(kept) <= 1:
        return [_ink_bbox(region_img)]
    kept.sort(key=lambda rc: (-rc[0].x2, rc[0].y, rc[0].x))
    return [r for r, _ in kept]
