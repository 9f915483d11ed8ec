"""Synthetic page generator: rendered scans with exact known layouts.

Pages imitate the geometry of vertical-text newspaper scans: a page
frame with a printed border, rows of blocks, text blocks as columns of
thin strokes, title blocks as wider strokes with an optional subtitle
column group.  Because every rect, gap, and reading order is chosen by
construction, the generator doubles as the ground-truth oracle for the
whole pipeline, and its gaps are deliberately sized with margins above
or below the segmentation thresholds they exercise.

Scan-space layout of the default page (all values in pixels):
frame at (80,100) size 1420×2200; a 4-px border ring; 24 px of padding;
5 rows 380 tall separated by 61; 10 blocks per row separated by 44-49.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

import numpy as np

from .classify import RegionClass
from .errors import InfeasibleSpec
from .geometry import AffineMap, Quad, Rect, warp
from .order import Category, PageLayout, PageType, assemble, assign_reading_order
from .raster import render_mask

INK = 0
BACKGROUND = 255
STAIN_VALUE = 40
CRACK_VALUE = 30

MAX_ROTATION_DEG = 5.0
_NOISE_CAPS = {"crack": 50, "stain": 16, "hole": 12}


@dataclass(frozen=True)
class RegionSpec:
    """One block: vertical stroke columns, optionally split title/subtitle."""

    kind: str  # "text" | "title"
    columns: int
    stroke: int
    col_gap: int
    seg_h: int
    seg_gap: int
    subtitle_columns: int | None = None
    subtitle_gap: int = 10

    def group_width(self, columns: int) -> int:
        return columns * self.stroke + (columns - 1) * self.col_gap

    @property
    def width(self) -> int:
        w = self.group_width(self.columns)
        if self.subtitle_columns:
            w += self.subtitle_gap + self.group_width(self.subtitle_columns)
        return w

    def ink_height(self, row_h: int) -> int:
        pitch = self.seg_h + self.seg_gap
        n = (row_h + self.seg_gap) // pitch
        if n < 1:
            raise InfeasibleSpec(f"row height {row_h} below one character segment")
        return n * pitch - self.seg_gap


def text_region_spec(columns: int = 10, col_gap: int = 6) -> RegionSpec:
    return RegionSpec(
        kind="text", columns=columns, stroke=2, col_gap=col_gap, seg_h=22, seg_gap=6
    )


def title_region_spec(
    columns: int = 8, subtitle_columns: int | None = 6, col_gap: int = 3
) -> RegionSpec:
    return RegionSpec(
        kind="title",
        columns=columns,
        stroke=5,
        col_gap=col_gap,
        seg_h=30,
        seg_gap=6,
        subtitle_columns=subtitle_columns,
    )


@dataclass(frozen=True)
class RowSpec:
    """Blocks in right-to-left (reading) order; gaps drawn unless given."""

    regions: tuple[RegionSpec, ...]
    gaps: tuple[int, ...] | None = None


@dataclass(frozen=True)
class NoiseSpec:
    """A scan artifact: kind, anchor placement, and magnitude.

    Magnitude is the radius for stains/holes and the length for cracks,
    capped so no artifact can rival the page structure itself.
    """

    kind: str  # "crack" | "stain" | "hole"
    x: int
    y: int
    magnitude: int

    def __post_init__(self):
        cap = _NOISE_CAPS.get(self.kind)
        if cap is None:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 1 <= self.magnitude <= cap:
            raise ValueError(f"{self.kind} magnitude {self.magnitude} outside 1..{cap}")


@dataclass(frozen=True)
class PageSpec:
    rows: tuple[RowSpec, ...]
    width: int = 1600
    height: int = 2400
    frame: Rect = field(default_factory=lambda: Rect(80, 100, 1420, 2200))
    border: int = 4
    pad: int = 24
    row_h: int = 380
    row_gap: int = 61
    gap_range: tuple[int, int] = (44, 49)
    rotation: float = 0.0
    noise: tuple[NoiseSpec, ...] = ()
    seed: int = 0
    page_id: int = 0
    page_type: PageType = PageType.MAIN

    def __post_init__(self):
        if abs(self.rotation) > MAX_ROTATION_DEG:
            raise InfeasibleSpec(
                f"rotation {self.rotation}° exceeds ±{MAX_ROTATION_DEG}°"
            )


def _make_row(rng: random.Random, n_text: int, n_title: int, n_subtitle: int) -> RowSpec:
    """Shuffle text/title blocks into one row; slot 1 is kept text so the
    QC defect injector always has an interior text block to shrink."""
    titles = [
        title_region_spec(subtitle_columns=6 if i < n_subtitle else None)
        for i in range(n_title)
    ]
    texts = [text_region_spec() for _ in range(n_text)]
    regions = titles + texts
    rng.shuffle(regions)
    if n_text > 0 and regions[1 % len(regions)].kind != "text":
        swap = next(i for i, r in enumerate(regions) if r.kind == "text")
        idx = 1 % len(regions)
        regions[idx], regions[swap] = regions[swap], regions[idx]
    return RowSpec(regions=tuple(regions))


def default_page_spec(
    seed: int = 0,
    page_id: int = 0,
    rotation: float = 0.0,
    noise: tuple[NoiseSpec, ...] = (),
    n_rows: int = 5,
    n_text: int = 6,
    n_title: int = 4,
    n_subtitle: int = 3,
) -> PageSpec:
    rng = random.Random(f"rows:{seed}")
    rows = tuple(_make_row(rng, n_text, n_title, n_subtitle) for _ in range(n_rows))
    return PageSpec(
        rows=rows, rotation=rotation, noise=noise, seed=seed, page_id=page_id
    )


def index_page_spec(seed: int = 0, page_id: int = 0, rotation: float = 0.0) -> PageSpec:
    """Index-style page: the middle row has a section header set apart by
    wide gaps from the dense item groups on either side."""
    rng = random.Random(f"rows:{seed}")
    header_row = RowSpec(
        regions=tuple(text_region_spec() for _ in range(8)),
        gaps=(44, 45, 44, 120, 120, 45, 44),
    )
    rows = (
        _make_row(rng, 6, 4, 3),
        header_row,
        _make_row(rng, 6, 4, 3),
    )
    return PageSpec(
        rows=rows,
        rotation=rotation,
        seed=seed,
        page_id=page_id,
        page_type=PageType.INDEX,
    )


@dataclass(frozen=True)
class _PlacedRegion:
    spec: RegionSpec
    rect: Rect  # scan coordinates, unrotated
    title: Rect | None
    subtitle: Rect | None


@dataclass(frozen=True)
class _PageGeometry:
    content: Rect
    rows: list[tuple[Rect, list[_PlacedRegion]]]


def _page_geometry(spec: PageSpec) -> _PageGeometry:
    """Resolve every block position (unrotated scan coords), or refuse.

    Deterministic in ``spec``: gap jitter comes from ``spec.seed``.
    """
    inset = spec.border + spec.pad
    content = Rect(
        spec.frame.x + inset,
        spec.frame.y + inset,
        spec.frame.w - 2 * inset,
        spec.frame.h - 2 * inset,
    )
    n = len(spec.rows)
    if n == 0:
        return _PageGeometry(content=content, rows=[])
    needed_h = n * spec.row_h + (n - 1) * spec.row_gap
    if needed_h > content.h:
        raise InfeasibleSpec(f"{n} rows need {needed_h}px, content box has {content.h}")

    rng = random.Random(f"gaps:{spec.seed}")
    rows: list[tuple[Rect, list[_PlacedRegion]]] = []
    for i, row in enumerate(spec.rows):
        y = int(content.y + i * (spec.row_h + spec.row_gap))
        regions = row.regions
        widths = [r.width for r in regions]
        n_gaps = max(0, len(regions) - 1)
        if row.gaps is not None:
            if len(row.gaps) != n_gaps:
                raise InfeasibleSpec(
                    f"row {i}: {len(row.gaps)} gaps for {len(regions)} regions"
                )
            gaps = list(row.gaps)
        elif n_gaps == 0:
            gaps = []
        else:
            lo, hi = spec.gap_range
            slack = content.w - sum(widths)
            if slack < n_gaps * lo:
                raise InfeasibleSpec(
                    f"row {i}: {len(regions)} regions of total width {sum(widths)} "
                    f"don't fit {content.w}px with {lo}px gaps"
                )
            hi = min(hi, slack // n_gaps)
            gaps = [rng.randint(lo, hi) for _ in range(n_gaps)]
        if sum(widths) + sum(gaps) > content.w:
            raise InfeasibleSpec(f"row {i}: blocks plus gaps exceed the content width")

        placed: list[_PlacedRegion] = []
        cursor = int(content.x2)
        for k, rspec in enumerate(regions):
            x = cursor - widths[k]
            ink_h = rspec.ink_height(spec.row_h)
            rect = Rect(x, y, widths[k], ink_h)
            title = subtitle = None
            if rspec.kind == "title":
                tw = rspec.group_width(rspec.columns)
                if rspec.subtitle_columns:
                    sw = rspec.group_width(rspec.subtitle_columns)
                    subtitle = Rect(x, y, sw, ink_h)
                    title = Rect(x + sw + rspec.subtitle_gap, y, tw, ink_h)
                else:
                    title = Rect(x, y, tw, ink_h)
            placed.append(_PlacedRegion(rspec, rect, title, subtitle))
            cursor = x - (gaps[k] if k < n_gaps else 0)
        row_rect = Rect.bounding([p.rect for p in placed])
        rows.append((row_rect, placed))
    return _PageGeometry(content=content, rows=rows)


def _rotation_map(spec: PageSpec) -> AffineMap:
    return AffineMap.rotation_deg(spec.rotation, spec.width / 2, spec.height / 2)


def _frame_quad(spec: PageSpec) -> Quad:
    quad = Quad.from_rect(spec.frame)
    if spec.rotation == 0:
        return quad
    return _rotation_map(spec).apply_quad(quad)


def build_layout(spec: PageSpec) -> PageLayout:
    """Ground-truth layout for a spec — pure geometry, nothing rendered.

    Element rects are rectified-frame coordinates (the frame's top-left
    is the origin), matching what extraction reports; the frame quad is
    scan-space, rotated like the rendered image.
    """
    geom = _page_geometry(spec)
    dx, dy = -spec.frame.x, -spec.frame.y
    rows = [row_rect.shifted(dx, dy) for row_rect, _ in geom.rows]
    regions_per_row = []
    refined: dict[tuple[int, int], tuple[Rect, Rect | None]] = {}
    for i, (_, placed) in enumerate(geom.rows):
        regions = []
        for j, p in enumerate(placed):
            cat = Category.TITLE_REGION if p.spec.kind == "title" else Category.TEXT_REGION
            regions.append((p.rect.shifted(dx, dy), cat))
            if p.title is not None:
                refined[(i, j)] = (
                    p.title.shifted(dx, dy),
                    p.subtitle.shifted(dx, dy) if p.subtitle else None,
                )
        regions_per_row.append(regions)

    layout = assemble(
        _frame_quad(spec),
        rows,
        regions_per_row,
        refined,
        page_id=spec.page_id,
        page_type=spec.page_type,
        rectified_size=(int(spec.frame.w), int(spec.frame.h)),
    )
    layout = assign_reading_order(layout)
    layout.image_size = (spec.width, spec.height)
    layout.file_name = f"page-{spec.page_id:06d}.png"
    return layout


def _draw_group(img: np.ndarray, x: int, y: int, columns: int, rspec: RegionSpec, row_h: int):
    pitch_x = rspec.stroke + rspec.col_gap
    pitch_y = rspec.seg_h + rspec.seg_gap
    n_segs = (row_h + rspec.seg_gap) // pitch_y
    for c in range(columns):
        cx = x + c * pitch_x
        for s in range(n_segs):
            sy = y + s * pitch_y
            img[sy : sy + rspec.seg_h, cx : cx + rspec.stroke] = INK


def _draw_region(img: np.ndarray, p: _PlacedRegion, row_h: int):
    r = p.spec
    if r.kind == "title" and r.subtitle_columns:
        _draw_group(img, int(p.subtitle.x), int(p.subtitle.y), r.subtitle_columns, r, row_h)
        _draw_group(img, int(p.title.x), int(p.title.y), r.columns, r, row_h)
    else:
        _draw_group(img, int(p.rect.x), int(p.rect.y), r.columns, r, row_h)


def inject_noise(img: np.ndarray, specs) -> np.ndarray:
    """Stamp scan artifacts onto a grayscale page (returns a copy).

    Cracks are thin dark wandering polylines, stains dark discs, holes
    white discs (paper loss erases ink).
    """
    out = img.copy()
    h, w = out.shape
    for ns in specs:
        if ns.kind in ("stain", "hole"):
            r = ns.magnitude
            y0, y1 = max(0, ns.y - r), min(h, ns.y + r + 1)
            x0, x1 = max(0, ns.x - r), min(w, ns.x + r + 1)
            yy, xx = np.ogrid[y0:y1, x0:x1]
            disc = (yy - ns.y) ** 2 + (xx - ns.x) ** 2 <= r * r
            value = STAIN_VALUE if ns.kind == "stain" else BACKGROUND
            region = out[y0:y1, x0:x1]
            region[disc] = value
        else:  # crack
            rng = random.Random(f"{ns.x}:{ns.y}:{ns.magnitude}")
            cx = ns.x
            for dy in range(ns.magnitude):
                y = ns.y + dy
                if not 0 <= y < h:
                    break
                x0 = min(max(cx, 0), w - 2)
                out[y, x0 : x0 + 2] = CRACK_VALUE
                cx += rng.choice((-1, 0, 0, 1))
                cx = min(max(cx, ns.x - 6), ns.x + 6)
    return out


def generate_page(spec: PageSpec) -> tuple[np.ndarray, PageLayout]:
    """Render a page and return it with its ground truth.

    Deterministic in ``spec``.  Rotation is applied as the final step to
    the binarized ink, exactly the transform the pipeline must undo.
    """
    layout = build_layout(spec)  # validates feasibility first
    geom = _page_geometry(spec)
    img = np.full((spec.height, spec.width), BACKGROUND, dtype=np.uint8)

    f, b = spec.frame, spec.border
    x1, y1, x2, y2 = int(f.x), int(f.y), int(f.x2), int(f.y2)
    img[y1 : y1 + b, x1:x2] = INK
    img[y2 - b : y2, x1:x2] = INK
    img[y1:y2, x1 : x1 + b] = INK
    img[y1:y2, x2 - b : x2] = INK

    for _, placed in geom.rows:
        for p in placed:
            _draw_region(img, p, spec.row_h)

    if spec.noise:
        img = inject_noise(img, spec.noise)
    if spec.rotation != 0:
        mask = img < 128
        rotated = warp(mask, _rotation_map(spec), spec.width, spec.height)
        img = render_mask(rotated)
    return img, layout


def hard_noise_preset(spec: PageSpec, seed: int = 0) -> tuple[NoiseSpec, ...]:
    """A bruising but survivable artifact set: 2 stains, 2 holes, 2 cracks.

    Placements stay inside text blocks with margins, the way real stains
    sit on printed content without bridging separate blocks.
    """
    geom = _page_geometry(spec)
    texts = [
        p.rect for _, placed in geom.rows for p in placed if p.spec.kind == "text"
    ]
    rng = random.Random(f"noise:{seed}")
    picks = rng.sample(texts, min(6, len(texts)))
    out = []
    for i, rect in enumerate(picks):
        if i < 2:
            r = rng.randint(10, 14)
            margin = r + 6
            out.append(
                NoiseSpec(
                    "stain",
                    rng.randint(int(rect.x) + margin, int(rect.x2) - margin),
                    rng.randint(int(rect.y) + margin, int(rect.y2) - margin),
                    r,
                )
            )
        elif i < 4:
            r = rng.randint(8, 12)
            margin = r + 4
            out.append(
                NoiseSpec(
                    "hole",
                    rng.randint(int(rect.x) + margin, int(rect.x2) - margin),
                    rng.randint(int(rect.y) + margin, int(rect.y2) - margin),
                    r,
                )
            )
        else:
            length = rng.randint(30, 46)
            out.append(
                NoiseSpec(
                    "crack",
                    rng.randint(int(rect.x) + 16, int(rect.x2) - 16),
                    rng.randint(int(rect.y) + 10, int(rect.y2) - 10 - length),
                    length,
                )
            )
    return tuple(out)


@dataclass
class CorpusResult:
    layouts: list[PageLayout]
    manifest: list[tuple[int, str]]  # (page_id, defect kind)
    images: list[np.ndarray] | None = None
    specs: list[PageSpec] | None = None


def _shrink_defect(layout: PageLayout) -> PageLayout:
    """Model a block that lost content: its right edge retreats, opening
    an oversized gap to the right-hand neighbor."""
    rows = [el for el in layout.elements if el.category == Category.ROW]
    last_row = max(rows, key=lambda el: el.rect.y)
    texts = [
        el
        for el in layout.children_of(last_row.id)
        if el.category == Category.TEXT_REGION
    ]
    victim = min(texts, key=lambda el: el.rect.x)
    victim.rect = Rect(victim.rect.x, victim.rect.y, 18, victim.rect.h)
    return layout


def generate_corpus(
    n: int,
    base_spec: PageSpec | None = None,
    *,
    defect_rate: float = 0.0,
    seed: int = 0,
    render: bool = False,
    rotation_range: tuple[float, float] = (0.0, 0.0),
    hard_noise: bool = False,
) -> CorpusResult:
    """Build a corpus of main pages with structural variety.

    ``defect_rate`` of the pages receive one injected defect — a corrupted
    frame keeping only 2 rows (collapsed element count) or a shrunken
    region (oversized sibling gap) — recorded in the manifest.  With
    ``render`` the scans themselves are produced; layout-only corpora
    are cheap enough for large statistical runs.
    """
    rng = random.Random(f"corpus:{seed}")
    n_defects = round(defect_rate * n)
    defective = sorted(rng.sample(range(n), n_defects)) if n_defects else []
    defect_kind = {
        pid: ("corrupted_frame" if i % 2 == 0 else "shrunk_region")
        for i, pid in enumerate(defective)
    }

    layouts: list[PageLayout] = []
    images: list[np.ndarray] | None = [] if render else None
    specs: list[PageSpec] = []
    manifest: list[tuple[int, str]] = []
    for pid in range(n):
        prng = random.Random(f"page:{seed}:{pid}")
        rotation = 0.0
        if rotation_range != (0.0, 0.0):
            rotation = prng.uniform(*rotation_range)
        spec = default_page_spec(
            seed=prng.randrange(2**31),
            page_id=pid,
            rotation=rotation,
            n_text=prng.choice((4, 5, 6)),
            n_subtitle=prng.choice((2, 3)),
        )
        kind = defect_kind.get(pid)
        if kind == "corrupted_frame":
            spec = replace(spec, rows=spec.rows[:2])
        if hard_noise:
            spec = replace(spec, noise=hard_noise_preset(spec, seed=prng.randrange(2**31)))
        specs.append(spec)

        layout = build_layout(spec)
        if kind == "shrunk_region":
            layout = _shrink_defect(layout)
        if kind:
            manifest.append((pid, kind))
        layouts.append(layout)
        if render:
            images.append(generate_page(spec)[0])
    return CorpusResult(layouts=layouts, manifest=manifest, images=images, specs=specs)


def classifier_samples(n: int, seed: int = 0) -> list[tuple[np.ndarray, RegionClass]]:
    """Labeled standalone region crops for calibrating/holding out the
    region classifier: clean text, clean title regions, and merged pairs
    the segmenter would have produced on a missed gap."""
    rng = random.Random(f"samples:{seed}")
    row_h = 380
    out = []
    for i in range(n):
        kind = (RegionClass.TEXT, RegionClass.TITLE, RegionClass.MIS_SEGMENTED)[i % 3]
        if kind == RegionClass.TEXT:
            spec = text_region_spec(
                columns=rng.randint(9, 11), col_gap=rng.randint(5, 7)
            )
            group_specs = [(spec, spec.columns)]
        elif kind == RegionClass.TITLE:
            sub = rng.choice((None, 5, 6))
            spec = title_region_spec(columns=rng.randint(7, 9), subtitle_columns=sub)
            group_specs = [(spec, None)]
        else:
            left = text_region_spec(columns=rng.randint(9, 11))
            right = rng.choice(
                (text_region_spec(columns=rng.randint(9, 11)), title_region_spec())
            )
            group_specs = [(left, None), (right, None)]

        pair_gap = rng.randint(30, 34) if len(group_specs) == 2 else 0
        canvas_w = sum(s.width for s, _ in group_specs) + pair_gap
        img = np.full((row_h, canvas_w), BACKGROUND, dtype=np.uint8)
        x = 0
        for gspec, _ in group_specs:
            placed = _PlacedRegion(
                gspec,
                Rect(x, 0, gspec.width, gspec.ink_height(row_h)),
                None,
                None,
            )
            if gspec.kind == "title":
                tw = gspec.group_width(gspec.columns)
                if gspec.subtitle_columns:
                    sw = gspec.group_width(gspec.subtitle_columns)
                    placed = _PlacedRegion(
                        gspec,
                        placed.rect,
                        Rect(x + sw + gspec.subtitle_gap, 0, tw, placed.rect.h),
                        Rect(x, 0, sw, placed.rect.h),
                    )
                else:
                    placed = _PlacedRegion(
                        gspec, placed.rect, Rect(x, 0, tw, placed.rect.h), None
                    )
            _draw_region(img, placed, row_h)
            x += gspec.width + pair_gap
        mask = img < 128
        ys, xs = np.nonzero(mask)
        crop = mask[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1]
        out.append((crop, kind))
    return out
