"""Block segmentation: RLSA smoothing, component labeling, contour tracing,
and the page-frame / row / region extraction built on top of them.

The extraction is hierarchical.  The page frame is found on a 1/8-scale
image, rows are split inside the rectified frame (again at 1/8), and
regions are split per row at full resolution, so content in different
rows can never merge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateContour, EmptyResult, NoPageFrame
from .geometry import Point, Quad, Rect, circumscribe_quad
from .raster import downsample
from .validation import check_mask, check_nonneg_int

# 8-connectivity keeps diagonal stroke fragments together; 4 is offered
# for callers that want stricter components.
_STRUCT_8 = np.ones((3, 3), dtype=bool)
_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class Component:
    """One connected ink component: 1-based label in scanline order."""

    label: int
    bbox: Rect
    pixel_count: int


def rlsa_horizontal(bm: np.ndarray, c: int) -> np.ndarray:
    """Fill background runs of length ≤ c bounded by ink on both sides, per row.

    Leading and trailing runs (no ink bound on one side) are never filled.
    """
    bm = check_mask(bm)
    check_nonneg_int(c, "c")
    if bm.size == 0 or c == 0:
        return bm.copy()
    h, w = bm.shape
    idx = np.arange(w)
    # for each pixel: index of the nearest ink at or before / at or after it
    last_ink = np.maximum.accumulate(np.where(bm, idx, -1), axis=1)
    next_ink = np.minimum.accumulate(np.where(bm, idx, w)[:, ::-1], axis=1)[:, ::-1]
    gap_len = next_ink - last_ink - 1
    fill = (~bm) & (last_ink >= 0) & (next_ink < w) & (gap_len <= c)
    return bm | fill


def rlsa_vertical(bm: np.ndarray, c: int) -> np.ndarray:
    """Column-wise counterpart of :func:`rlsa_horizontal`."""
    return rlsa_horizontal(check_mask(bm).T, c).T


def labeled_components(bm: np.ndarray, connectivity: int = 8):
    """Label ink components; returns (label image, components).

    Labels are renumbered so component k is the k-th component reached in
    scanline (row-major) order of first pixels — scipy's own numbering is
    an implementation detail we don't expose.
    """
    bm = check_mask(bm)
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = _STRUCT_8 if connectivity == 8 else _STRUCT_4
    raw, n = ndimage.label(bm, structure=structure)
    if n == 0:
        return np.zeros_like(raw), []
    flat = raw.ravel()
    values, first_pos = np.unique(flat, return_index=True)
    keep = values != 0
    order = values[keep][np.argsort(first_pos[keep], kind="stable")]
    remap = np.zeros(n + 1, dtype=raw.dtype)
    remap[order] = np.arange(1, n + 1)
    labels = remap[raw]
    counts = np.bincount(flat, minlength=n + 1)
    slices = ndimage.find_objects(raw)
    comps = []
    for rank, old in enumerate(order, start=1):
        sy, sx = slices[old - 1]
        bbox = Rect(int(sx.start), int(sy.start), int(sx.stop - sx.start), int(sy.stop - sy.start))
        comps.append(Component(label=rank, bbox=bbox, pixel_count=int(counts[old])))
    return labels, comps


def connected_components(bm: np.ndarray, connectivity: int = 8) -> list[Component]:
    return labeled_components(bm, connectivity)[1]


# Moore neighborhood in clockwise order (screen coordinates, y down),
# starting east.
_MOORE = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


def trace_boundary(bm: np.ndarray) -> list[Point]:
    """Clockwise outer boundary of the ink in ``bm`` (Moore tracing).

    Starts at the topmost-then-leftmost ink pixel; interior holes are
    never visited.  The caller is expected to pass a single component.
    """
    bm = check_mask(bm)
    ys, xs = np.nonzero(bm)
    if len(ys) == 0:
        raise EmptyResult("cannot trace an empty bitmap")
    h, w = bm.shape

    def ink(x: int, y: int) -> bool:
        return 0 <= x < w and 0 <= y < h and bool(bm[y, x])

    # np.nonzero is row-major, so the first pixel is topmost-then-leftmost
    x0, y0 = int(xs[0]), int(ys[0])
    start = (x0, y0)
    backtrack0 = (x0 - 1, y0)

    contour = [Point(x0, y0)]
    p, b = start, backtrack0
    max_steps = 4 * len(ys) + 8
    for _ in range(max_steps):
        start_i = _MOORE.index((b[0] - p[0], b[1] - p[1]))
        for k in range(1, 9):
            i = (start_i + k) % 8
            q = (p[0] + _MOORE[i][0], p[1] + _MOORE[i][1])
            if ink(*q):
                j = (start_i + k - 1) % 8
                b = (p[0] + _MOORE[j][0], p[1] + _MOORE[j][1])
                p = q
                break
        else:
            return contour  # isolated pixel
        if p == start and b == backtrack0:
            return contour
        contour.append(Point(p[0], p[1]))
    return contour


def detect_page_frame(
    bm: np.ndarray,
    *,
    c_frame: int = 4,
    factor: int = 8,
    min_frame_fraction: float = 0.01,
) -> Quad:
    """Find the page frame of a binarized scan as a quadrilateral.

    Works on a 1/``factor`` OR-pooled image: close small gaps with RLSA in
    both directions, take the largest component, trace its outer contour,
    circumscribe it, and scale the corners back up.

    Raises:
        NoPageFrame: blank scan, or the largest component is too small a
            fraction of the image to be a page.
    """
    bm = check_mask(bm)
    coarse = downsample(bm, factor)
    if not coarse.any():
        raise NoPageFrame("no ink in scan")
    smoothed = rlsa_vertical(rlsa_horizontal(coarse, c_frame), c_frame)
    labels, comps = labeled_components(smoothed, connectivity=8)
    largest = max(comps, key=lambda cp: cp.pixel_count)
    if largest.pixel_count < min_frame_fraction * coarse.size:
        raise NoPageFrame(
            f"largest component covers {largest.pixel_count}/{coarse.size} px, "
            f"below the {min_frame_fraction:.0%} floor"
        )
    boundary = trace_boundary(labels == largest.label)
    try:
        quad = circumscribe_quad(boundary)
    except DegenerateContour as exc:
        raise NoPageFrame(f"page contour is degenerate: {exc}") from exc
    # a coarse pixel covers the span [factor*c, factor*c + factor); its
    # center is the unbiased position for whatever ink put it in the trace
    half = (factor - 1) / 2
    return quad.scaled(factor).shifted(half, half)


def _merge_axis_overlaps(
    pairs: list[tuple[Rect, int]], lo: str, hi: str
) -> list[tuple[Rect, int]]:
    """Union rects whose [lo, hi) extents overlap; pixel counts add up."""
    merged = True
    while merged:
        merged = False
        out: list[tuple[Rect, int]] = []
        for rect, count in pairs:
            for i, (other, ocount) in enumerate(out):
                if getattr(rect, lo) < getattr(other, hi) and getattr(other, lo) < getattr(rect, hi):
                    out[i] = (Rect.bounding([other, rect]), ocount + count)
                    merged = True
                    break
            else:
                out.append((rect, count))
        pairs = out
    return pairs


def split_rows(
    rectified: np.ndarray,
    c_row: int | None = None,
    *,
    factor: int = 8,
    min_row_pixels: int = 20,
) -> list[Rect]:
    """Split a rectified page interior into rows, top to bottom.

    Runs at 1/``factor`` scale: horizontal RLSA joins everything within a
    row into one band while rows stay apart vertically.  Components below
    ``min_row_pixels`` (coarse pixels) are dust, not rows.  Returned rects
    are full-resolution and pairwise vertically disjoint.
    """
    rectified = check_mask(rectified)
    coarse = downsample(rectified, factor)
    if c_row is None:
        c_row = coarse.shape[1] // 2
    smoothed = rlsa_horizontal(coarse, c_row)
    comps = connected_components(smoothed, connectivity=8)
    kept = [(c.bbox, c.pixel_count) for c in comps if c.pixel_count >= min_row_pixels]
    kept = _merge_axis_overlaps(kept, "y", "y2")
    kept.sort(key=lambda rc: (rc[0].y, rc[0].x))
    return [r.scaled(factor) for r, _ in kept]


def split_regions(
    row_img: np.ndarray,
    c_region: int,
    *,
    min_region_pixels: int = 30,
) -> list[Rect]:
    """Split one full-resolution row crop into regions, right to left.

    RLSA with ``c_region`` in both directions fuses the character strokes
    of a block (column gaps and in-column character gaps are small) while
    true inter-region gaps stay open, then components become regions.
    Components overlapping in x belong to the same block and are unioned,
    so results are pairwise horizontally disjoint.
    """
    row_img = check_mask(row_img)
    check_nonneg_int(c_region, "c_region")
    smoothed = rlsa_horizontal(rlsa_vertical(row_img, c_region), c_region)
    comps = connected_components(smoothed, connectivity=8)
    kept = [(c.bbox, c.pixel_count) for c in comps if c.pixel_count >= min_region_pixels]
    kept = _merge_axis_overlaps(kept, "x", "x2")
    # right to left: descending right edge, ties by top edge then left edge
    kept.sort(key=lambda rc: (-rc[0].x2, rc[0].y, rc[0].x))
    return [r for r, _ in kept]


def _ink_bbox(bm: np.ndarray) -> Rect:
    ys, xs = np.nonzero(bm)
    x1, x2 = int(xs.min()), int(xs.max()) + 1
    y1, y2 = int(ys.min()), int(ys.max()) + 1
    return Rect(x1, y1, x2 - x1, y2 - y1)


def split_title_subtitle(
    region_img: np.ndarray, subtitle_gap_min: int = 6
) -> tuple[Rect, Rect | None]:
    """Split a title-region crop at its widest internal column gap.

    Vertical Japanese reads right to left, so when the gap is wide enough
    the right side is the title and the left side the subtitle; otherwise
    the whole region is the title.  Returned rects are tight ink bboxes
    in crop coordinates.

    Raises:
        EmptyRegion: blank crop.
    """
    from .errors import EmptyRegion

    region_img = check_mask(region_img)
    if not region_img.any():
        raise EmptyRegion("blank title-region crop")
    col_has_ink = region_img.any(axis=0)
    cols = np.flatnonzero(col_has_ink)
    first, last = int(cols[0]), int(cols[-1])

    best_width = 0
    best_start = -1
    run_start = None
    for x in range(first, last + 1):
        if not col_has_ink[x]:
            if run_start is None:
                run_start = x
        elif run_start is not None:
            width = x - run_start
            if width > best_width:  # ties keep the leftmost gap
                best_width, best_start = width, run_start
            run_start = None

    if best_width < subtitle_gap_min:
        return _ink_bbox(region_img), None
    subtitle = _ink_bbox(region_img[:, :best_start])
    right_off = best_start + best_width
    title = _ink_bbox(region_img[:, right_off:]).shifted(right_off, 0)
    return title, subtitle
