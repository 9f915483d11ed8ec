"""Rectangles, quadrilaterals, and the affine rectification step.

The page-frame detector yields a quadrilateral in scan coordinates; an
affine map fitted over its four corners converts everything inside to an
axis-aligned working frame.  All types here are immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateContour, SingularFit
from .validation import check_mask


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Rect:
    """Axis-aligned box: top-left corner (x, y), positive width/height."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    def intersect(self, other: "Rect") -> "Rect | None":
        x1 = max(self.x, other.x)
        y1 = max(self.y, other.y)
        x2 = min(self.x2, other.x2)
        y2 = min(self.y2, other.y2)
        if x2 <= x1 or y2 <= y1:
            return None
        return Rect(x1, y1, x2 - x1, y2 - y1)

    def inter_area(self, other: "Rect") -> float:
        r = self.intersect(other)
        return 0.0 if r is None else r.area

    def contains(self, other: "Rect", tol: float = 0.0) -> bool:
        return (
            other.x >= self.x - tol
            and other.y >= self.y - tol
            and other.x2 <= self.x2 + tol
            and other.y2 <= self.y2 + tol
        )

    def shifted(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)

    def scaled(self, f: float) -> "Rect":
        return Rect(self.x * f, self.y * f, self.w * f, self.h * f)

    def corners(self) -> tuple[Point, Point, Point, Point]:
        """Clockwise from top-left."""
        return (
            Point(self.x, self.y),
            Point(self.x2, self.y),
            Point(self.x2, self.y2),
            Point(self.x, self.y2),
        )

    def to_bbox(self) -> list:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_bbox(cls, bbox: Sequence[float]) -> "Rect":
        x, y, w, h = bbox
        return cls(x, y, w, h)

    @classmethod
    def bounding(cls, rects: Iterable["Rect"]) -> "Rect":
        rects = list(rects)
        if not rects:
            raise ValueError("bounding() of no rects")
        x1 = min(r.x for r in rects)
        y1 = min(r.y for r in rects)
        x2 = max(r.x2 for r in rects)
        y2 = max(r.y2 for r in rects)
        return cls(x1, y1, x2 - x1, y2 - y1)


def polygon_area(points: Sequence[tuple[float, float]]) -> float:
    """Absolute shoelace area of a simple polygon."""
    n = len(points)
    acc = 0.0
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return abs(acc) / 2.0


@dataclass(frozen=True)
class Quad:
    """Convex quadrilateral, corners clockwise starting top-left."""

    tl: Point
    tr: Point
    br: Point
    bl: Point

    @property
    def corners(self) -> tuple[Point, Point, Point, Point]:
        return (self.tl, self.tr, self.br, self.bl)

    @classmethod
    def from_rect(cls, rect: Rect) -> "Quad":
        tl, tr, br, bl = rect.corners()
        return cls(tl, tr, br, bl)

    @classmethod
    def from_polygon(cls, flat: Sequence[float]) -> "Quad":
        if len(flat) != 8:
            raise ValueError(f"quad polygon needs 8 numbers, got {len(flat)}")
        pts = [Point(flat[i], flat[i + 1]) for i in range(0, 8, 2)]
        return cls(*pts)

    def polygon(self) -> list:
        out: list = []
        for p in self.corners:
            out.extend((p.x, p.y))
        return out

    def bbox(self) -> Rect:
        xs = [p.x for p in self.corners]
        ys = [p.y for p in self.corners]
        return Rect(min(xs), min(ys), max(xs) - min(xs), max(ys) - min(ys))

    def scaled(self, f: float) -> "Quad":
        return Quad(*(Point(p.x * f, p.y * f) for p in self.corners))

    def shifted(self, dx: float, dy: float) -> "Quad":
        return Quad(*(Point(p.x + dx, p.y + dy) for p in self.corners))

    @property
    def area(self) -> float:
        return polygon_area(self.corners)


@dataclass(frozen=True)
class AffineMap:
    """(x, y) -> (a*x + b*y + c, d*x + e*y + f)."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    @property
    def det(self) -> float:
        return self.a * self.e - self.b * self.d

    def apply(self, x: float, y: float) -> Point:
        return Point(self.a * x + self.b * y + self.c, self.d * x + self.e * y + self.f)

    def apply_quad(self, q: Quad) -> Quad:
        return Quad(*(self.apply(p.x, p.y) for p in q.corners))

    def inverse(self) -> "AffineMap":
        det = self.det
        if abs(det) < 1e-12:
            raise SingularFit("affine map is not invertible")
        ia = self.e / det
        ib = -self.b / det
        id_ = -self.d / det
        ie = self.a / det
        ic = -(ia * self.c + ib * self.f)
        if_ = -(id_ * self.c + ie * self.f)
        return AffineMap(ia, ib, ic, id_, ie, if_)

    @classmethod
    def identity(cls) -> "AffineMap":
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @classmethod
    def rotation_deg(cls, degrees: float, cx: float = 0.0, cy: float = 0.0) -> "AffineMap":
        """Clockwise rotation (screen coordinates, y down) about (cx, cy)."""
        t = math.radians(degrees)
        cos, sin = math.cos(t), math.sin(t)
        # x' = cos*(x-cx) - sin*(y-cy) + cx ; y' = sin*(x-cx) + cos*(y-cy) + cy
        return cls(cos, -sin, cx - cos * cx + sin * cy, sin, cos, cy - sin * cx - cos * cy)


def circumscribe_quad(boundary: Sequence[tuple[float, float]]) -> Quad:
    """Circumscribe a near-axis-aligned contour with a quadrilateral.

    Corners are the boundary points with extremal corner sums: top-left
    minimizes x+y, top-right maximizes x-y, bottom-right maximizes x+y,
    bottom-left minimizes x-y.  Ties are broken by smaller y then smaller
    x so the result is deterministic.

    Raises:
        DegenerateContour: fewer than 3 distinct points, or all collinear.
    """
    pts = np.asarray(boundary, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise DegenerateContour("boundary must be a non-empty list of (x, y) points")
    if len(np.unique(pts, axis=0)) < 3:
        raise DegenerateContour("need at least 3 distinct boundary points")

    x, y = pts[:, 0], pts[:, 1]

    def pick(score: np.ndarray) -> Point:
        best = score.max()
        idx = np.flatnonzero(score == best)
        # deterministic tie-break: smaller y, then smaller x
        order = np.lexsort((x[idx], y[idx]))
        i = idx[order[0]]
        return Point(float(x[i]), float(y[i]))

    quad = Quad(pick(-x - y), pick(x - y), pick(x + y), pick(-x + y))
    if quad.area <= 0.0:
        raise DegenerateContour("boundary points are collinear")
    return quad


def fit_affine(src: Quad, dst: Rect | Quad) -> AffineMap:
    """Least-squares affine over the 4 corner correspondences src -> dst.

    Exact (zero residual) when src is a parallelogram; page-frame quads
    from small skews are near-parallelograms so the residual stays tiny.

    Raises:
        SingularFit: src corners are collinear (no invertible fit).
    """
    dst_corners = Quad.from_rect(dst).corners if isinstance(dst, Rect) else dst.corners
    sp = np.array([(p.x, p.y) for p in src.corners], dtype=np.float64)
    # collinear source corners can't pin an invertible map
    if np.linalg.matrix_rank(np.column_stack([sp, np.ones(4)])) < 3:
        raise SingularFit("source quad corners are collinear")
    a_rows = []
    b_vals = []
    for (sx, sy), dp in zip(sp, dst_corners):
        a_rows.append([sx, sy, 1, 0, 0, 0])
        a_rows.append([0, 0, 0, sx, sy, 1])
        b_vals.extend([dp.x, dp.y])
    coef, *_ = np.linalg.lstsq(np.asarray(a_rows), np.asarray(b_vals), rcond=None)
    m = AffineMap(*coef)
    if abs(m.det) < 1e-12:
        raise SingularFit("fitted map is singular")
    return m


def warp(bm: np.ndarray, m: AffineMap, out_w: int, out_h: int) -> np.ndarray:
    """Warp an ink mask through an affine map with nearest-neighbor sampling.

    Output pixel (x, y) samples the source pixel containing
    m⁻¹(x+0.5, y+0.5); samples falling outside the source are background.
    Sampling the cell containing the mapped center keeps identity maps
    exact and preserves binary masks.
    """
    bm = check_mask(bm)
    if out_w <= 0 or out_h <= 0:
        raise ValueError("output dims must be positive")
    inv = m.inverse()
    xs = np.arange(out_w, dtype=np.float64) + 0.5
    ys = np.arange(out_h, dtype=np.float64) + 0.5
    sx = inv.a * xs[None, :] + inv.b * ys[:, None] + inv.c
    sy = inv.d * xs[None, :] + inv.e * ys[:, None] + inv.f
    ix = np.floor(sx).astype(np.int64)
    iy = np.floor(sy).astype(np.int64)
    h, w = bm.shape
    valid = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.zeros((out_h, out_w), dtype=bool)
    out[valid] = bm[iy[valid], ix[valid]]
    return out
