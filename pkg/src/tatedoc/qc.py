"""Statistical quality control over an extracted corpus.

Pages whose element count falls outside a percentile band usually had a
bad page-frame detection; sibling gaps above the 99th percentile point
at blocks that lost content.  Thresholds can be recomputed per corpus
(recommended) or taken from the shipped defaults measured on the
original newspaper scans.  Corrections arrive as a declarative sidecar
file so raw pipeline output stays auditable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from sklearn.base import BaseEstimator

from .errors import BadCorrection, InsufficientCorpus, ParseError
from .geometry import Point, Quad, Rect
from .order import (
    Category,
    LayoutElement,
    PageLayout,
    PageType,
    _ALLOWED_PARENT,
    assign_reading_order,
    sibling_gaps,
)

MIN_CORPUS_PAGES = 20


@dataclass(frozen=True)
class QcThresholds:
    """Flagging band; defaults are the values measured on the source corpus."""

    count_hi: int = 118
    count_lo: int = 88
    gap_hi: float = 54.0

    def __post_init__(self):
        if not self.count_hi > self.count_lo >= 0:
            raise ValueError(f"need count_hi > count_lo >= 0, got {self}")
        if not self.gap_hi > 0:
            raise ValueError(f"need gap_hi > 0, got {self}")


DEFAULT_THRESHOLDS = QcThresholds()


class FlagKind(enum.Enum):
    PAGE_FRAME_SUSPECT = "page_frame_suspect"
    GAP_SUSPECT = "gap_suspect"
    MANUAL_OTHER = "manual_other"


@dataclass(frozen=True)
class QcFlag:
    page_id: int
    kind: FlagKind
    subject: int | None  # element id; required for gap flags
    detail: float

    def __post_init__(self):
        if self.kind == FlagKind.GAP_SUSPECT and self.subject is None:
            raise ValueError("GapSuspect needs a subject element")


def nearest_rank(values: list[float], percentile: float) -> float:
    """Nearest-rank percentile: the ceil(p·n/100)-th smallest value."""
    if not values:
        raise ValueError("no values")
    ordered = sorted(values)
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return ordered[min(rank, len(ordered)) - 1]


def _segmented(layouts: list[PageLayout]) -> list[PageLayout]:
    return [p for p in layouts if p.elements]


def compute_thresholds(layouts: list[PageLayout]) -> QcThresholds:
    """Percentile band from the corpus itself.

    count_hi/count_lo are the 95th/5th percentiles of per-page element
    counts over segmented pages; gap_hi is the 99th percentile of all
    sibling gaps.  A corpus with no gaps at all keeps the shipped gap
    default (there is nothing to measure).

    Raises:
        InsufficientCorpus: fewer than 20 segmented pages.
    """
    pages = _segmented(layouts)
    if len(pages) < MIN_CORPUS_PAGES:
        raise InsufficientCorpus(
            f"{len(pages)} segmented pages; need at least {MIN_CORPUS_PAGES}"
        )
    counts = [len(p.elements) for p in pages]
    gaps = [g for p in pages for _, g in sibling_gaps(p)]
    return QcThresholds(
        count_hi=int(nearest_rank(counts, 95)),
        count_lo=int(nearest_rank(counts, 5)),
        gap_hi=float(nearest_rank(gaps, 99)) if gaps else DEFAULT_THRESHOLDS.gap_hi,
    )


def flag_corpus(layouts: list[PageLayout], t: QcThresholds) -> list[QcFlag]:
    """All flags for a corpus, deterministically ordered by page then kind.

    Count-band violations suggest a misdetected page frame; oversized
    sibling gaps mark the block left of the gap as missing content; pages
    typed `other` always need a manual look.
    """
    flags: list[QcFlag] = []
    for page in sorted(layouts, key=lambda p: p.page_id):
        if page.page_type == PageType.OTHER:
            flags.append(
                QcFlag(page.page_id, FlagKind.MANUAL_OTHER, None, len(page.elements))
            )
        if not page.elements:
            continue
        count = len(page.elements)
        if count > t.count_hi or count < t.count_lo:
            flags.append(
                QcFlag(page.page_id, FlagKind.PAGE_FRAME_SUSPECT, None, count)
            )
        for subject, gap in sibling_gaps(page):
            if gap > t.gap_hi:
                flags.append(QcFlag(page.page_id, FlagKind.GAP_SUSPECT, subject, gap))
    return flags


def render_report(flags: list[QcFlag], t: QcThresholds | None = None) -> str:
    """Line format: ``page_id kind subject detail`` (subject ``-`` when none)."""
    lines = []
    if t is not None:
        lines.append(
            f"# thresholds count_hi={t.count_hi} count_lo={t.count_lo} gap_hi={t.gap_hi:g}"
        )
    for f in flags:
        subject = "-" if f.subject is None else str(f.subject)
        lines.append(f"{f.page_id} {f.kind.value} {subject} {f.detail:g}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> list[QcFlag]:
    flags = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            page_id, kind, subject, detail = line.split()
            flags.append(
                QcFlag(
                    int(page_id),
                    FlagKind(kind),
                    None if subject == "-" else int(subject),
                    float(detail),
                )
            )
        except ValueError as exc:
            raise ParseError(f"report line {lineno}: {line!r}") from exc
    return flags


# ---------------------------------------------------------------- corrections

@dataclass(frozen=True)
class Correction:
    page_id: int
    action: str  # frame | rect | delete | insert
    element: int | None = None
    category: Category | None = None
    rect: Rect | None = None
    quad: Quad | None = None


_CATEGORY_BY_NAME = {c.name.lower(): c for c in Category}


def parse_corrections(text: str) -> list[Correction]:
    """Sidecar grammar, one correction per line (# comments allowed):

    ``<page> frame x1 y1 x2 y2 x3 y3 x4 y4``  — replace the page frame quad
    ``<page> rect <element> x y w h``         — replace an element's rect
    ``<page> delete <element>``               — drop a leaf element
    ``<page> insert <parent> <category> x y w h``
    """
    out: list[Correction] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            page_id = int(parts[0])
            action = parts[1]
            if action == "frame":
                vals = [float(v) for v in parts[2:]]
                if len(vals) != 8:
                    raise ValueError("frame needs 8 coordinates")
                quad = Quad(*(Point(vals[i], vals[i + 1]) for i in range(0, 8, 2)))
                out.append(Correction(page_id, "frame", quad=quad))
            elif action == "rect":
                elem = int(parts[2])
                x, y, w, h = (float(v) for v in parts[3:7])
                if len(parts) != 7:
                    raise ValueError("rect needs element and 4 numbers")
                out.append(Correction(page_id, "rect", element=elem, rect=Rect(x, y, w, h)))
            elif action == "delete":
                if len(parts) != 3:
                    raise ValueError("delete needs exactly one element id")
                out.append(Correction(page_id, "delete", element=int(parts[2])))
            elif action == "insert":
                parent = int(parts[2])
                cat_token = parts[3].lower()
                category = (
                    Category(int(cat_token))
                    if cat_token.isdigit()
                    else _CATEGORY_BY_NAME[cat_token]
                )
                x, y, w, h = (float(v) for v in parts[4:8])
                if len(parts) != 8:
                    raise ValueError("insert needs parent, category and 4 numbers")
                out.append(
                    Correction(
                        page_id, "insert", element=parent, category=category,
                        rect=Rect(x, y, w, h),
                    )
                )
            else:
                raise ValueError(f"unknown action {action!r}")
        except (ValueError, KeyError, IndexError) as exc:
            raise ParseError(f"corrections line {lineno}: {raw!r} ({exc})") from exc
    return out


def _renumber(elements: list[LayoutElement]) -> list[LayoutElement]:
    """Dense ids 0..n-1 preserving order; parents remapped to match."""
    mapping = {el.id: i for i, el in enumerate(elements)}
    return [
        replace(
            el,
            id=mapping[el.id],
            parent=None if el.parent is None else mapping[el.parent],
        )
        for el in elements
    ]


def apply_corrections(
    layouts: list[PageLayout],
    corrections: list[Correction],
    *,
    images=None,
    config=None,
) -> list[PageLayout]:
    """Apply a correction list, returning the corrected corpus.

    Frame corrections re-run extraction from the corrected quad, which
    needs the page image: ``images`` maps page_id to a grayscale array
    (or is a callable doing so).  Element corrections patch the tree in
    place, renumber ids densely, and reassign reading order.  Corrected
    pages carry a provenance mark.

    Raises:
        BadCorrection: unknown page or element, deleting a non-leaf,
            inserting under an illegal parent, or a frame correction
            without its image.
    """
    by_page: dict[int, list[Correction]] = {}
    for c in corrections:
        by_page.setdefault(c.page_id, []).append(c)

    known = {p.page_id for p in layouts}
    for page_id in by_page:
        if page_id not in known:
            raise BadCorrection(f"correction references unknown page {page_id}")

    def get_image(page_id: int):
        if images is None:
            return None
        if callable(images):
            return images(page_id)
        return images.get(page_id)

    out: list[PageLayout] = []
    for page in layouts:
        todo = by_page.get(page.page_id)
        if not todo:
            out.append(page)
            continue
        current = page
        for corr in todo:
            current = _apply_one(current, corr, get_image(page.page_id), config)
        current.corrected = True
        out.append(current)
    return out


def _apply_one(page: PageLayout, corr: Correction, image, config) -> PageLayout:
    if corr.action == "frame":
        if image is None:
            raise BadCorrection(
                f"page {page.page_id}: frame correction needs the page image"
            )
        from .pipeline import PipelineConfig, extract_page_with_frame

        cfg = config if config is not None else PipelineConfig()
        fresh = extract_page_with_frame(image, corr.quad, cfg, page_type=page.page_type)
        fresh.page_id = page.page_id
        fresh.file_name = page.file_name
        fresh.image_size = page.image_size or fresh.image_size
        return fresh

    elements = [replace(el) for el in page.elements]
    ids = {el.id: el for el in elements}

    if corr.action == "rect":
        if corr.element not in ids:
            raise BadCorrection(f"page {page.page_id}: no element {corr.element}")
        ids[corr.element].rect = corr.rect
    elif corr.action == "delete":
        if corr.element not in ids:
            raise BadCorrection(f"page {page.page_id}: no element {corr.element}")
        if any(el.parent == corr.element for el in elements):
            raise BadCorrection(
                f"page {page.page_id}: element {corr.element} has children; "
                "delete them first"
            )
        elements = [el for el in elements if el.id != corr.element]
    elif corr.action == "insert":
        if corr.element not in ids:
            raise BadCorrection(f"page {page.page_id}: no parent {corr.element}")
        parent = ids[corr.element]
        if parent.category not in _ALLOWED_PARENT.get(corr.category, ()):
            raise BadCorrection(
                f"page {page.page_id}: cannot insert {corr.category.name} "
                f"under {parent.category.name}"
            )
        elements.append(
            LayoutElement(
                id=max(ids) + 1,
                category=corr.category,
                rect=corr.rect,
                parent=corr.element,
            )
        )
    else:
        raise BadCorrection(f"unknown action {corr.action!r}")

    elements = _renumber(elements)
    patched = PageLayout(
        page_id=page.page_id,
        page_type=page.page_type,
        elements=elements,
        image_size=page.image_size,
        file_name=page.file_name,
        corrected=True,
    )
    return assign_reading_order(patched)


class QualityFlagger(BaseEstimator):
    """Estimator facade: fit() learns the percentile band, predict() flags.

    Thresholds given at construction are kept verbatim; the ones left as
    None are computed from the corpus passed to fit().
    """

    def __init__(self, count_hi=None, count_lo=None, gap_hi=None):
        self.count_hi = count_hi
        self.count_lo = count_lo
        self.gap_hi = gap_hi

    def fit(self, layouts: list[PageLayout], y=None) -> "QualityFlagger":
        if None in (self.count_hi, self.count_lo, self.gap_hi):
            computed = compute_thresholds(layouts)
        else:
            computed = None
        self.thresholds_ = QcThresholds(
            count_hi=self.count_hi if self.count_hi is not None else computed.count_hi,
            count_lo=self.count_lo if self.count_lo is not None else computed.count_lo,
            gap_hi=self.gap_hi if self.gap_hi is not None else computed.gap_hi,
        )
        return self

    def predict(self, layouts: list[PageLayout]) -> list[QcFlag]:
        if not hasattr(self, "thresholds_"):
            raise RuntimeError("QualityFlagger.predict called before fit")
        return flag_corpus(layouts, self.thresholds_)
