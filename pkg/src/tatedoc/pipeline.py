"""End-to-end extraction: one grayscale scan in, one layout tree out.

The stages chain the module primitives: binarize, find and rectify the
page frame, split the interior into rows, split rows into blocks, label
each block (re-splitting ones the closing step wrongly fused), refine
title regions into title/subtitle, then bind everything into a hierarchy
with right-to-left reading orders.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from sklearn.base import BaseEstimator, TransformerMixin

from .classify import (
    ExternalClassifier,
    HeuristicClassifier,
    RegionClass,
    classify_region,
    split_missegmented,
)
from .errors import ParseError
from .geometry import Quad, Rect, fit_affine, warp
from .order import (
    Category,
    PageLayout,
    PageType,
    _quad_rect_size,
    assemble,
    assign_reading_order,
)
from .raster import binarize
from .segmentation import (
    detect_page_frame,
    split_regions,
    split_rows,
    split_title_subtitle,
)
from .validation import check_gray

SEGMENTED_TYPES = (PageType.MAIN, PageType.INDEX)


@dataclass
class PipelineConfig:
    """Every knob of the pipeline, shipped with the working defaults.

    ``None`` on an optional knob means "derive from the data": Otsu for
    the binarization threshold, half the coarse page width for the row
    closing length, and no reading-order discontinuity for gap_break.
    """

    binarize_threshold: int | None = None
    coarse_factor: int = 8
    c_frame: int = 4
    min_frame_fraction: float = 0.01
    frame_inset: int = 16
    c_row: int | None = None
    min_row_pixels: int = 20
    region_fill_frac: float = 0.1
    min_region_pixels: int = 30
    subtitle_gap_min: int = 6
    gap_break: float | None = None
    index_gap_break: float | None = None
    classifier: str = "heuristic"
    misseg_gap: float = 62.0
    title_density: float = 0.32
    count_hi: int = 118
    count_lo: int = 88
    gap_hi: float = 54.0
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        positive = {
            "coarse_factor": self.coarse_factor,
            "c_frame": self.c_frame,
            "min_frame_fraction": self.min_frame_fraction,
            "region_fill_frac": self.region_fill_frac,
            "subtitle_gap_min": self.subtitle_gap_min,
            "misseg_gap": self.misseg_gap,
            "title_density": self.title_density,
            "gap_hi": self.gap_hi,
            "jobs": self.jobs,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")
        for name, value in (
            ("frame_inset", self.frame_inset),
            ("min_row_pixels", self.min_row_pixels),
            ("min_region_pixels", self.min_region_pixels),
        ):
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        if not self.count_hi > self.count_lo >= 0:
            raise ValueError(
                f"need count_hi > count_lo >= 0, got {self.count_hi}/{self.count_lo}"
            )
        if self.binarize_threshold is not None and not 1 <= self.binarize_threshold <= 255:
            raise ValueError(f"binarize_threshold {self.binarize_threshold} outside 1..255")
        for name, value in (
            ("c_row", self.c_row),
            ("gap_break", self.gap_break),
            ("index_gap_break", self.index_gap_break),
        ):
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive when set, got {value}")

    _STR_KEYS = frozenset({"classifier"})
    _FLOAT_KEYS = frozenset(
        {
            "min_frame_fraction",
            "region_fill_frac",
            "misseg_gap",
            "title_density",
            "gap_hi",
            "gap_break",
            "index_gap_break",
        }
    )
    _NONE_KEYS = frozenset({"binarize_threshold", "c_row", "gap_break", "index_gap_break"})

    @classmethod
    def from_text(cls, text: str, **overrides) -> "PipelineConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment.

        Unknown keys and malformed values raise ParseError; keyword
        overrides (from CLI flags) win over file values.
        """
        known = {f.name for f in fields(cls)}
        values: dict = {}
        for n, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if not eq or not key:
                raise ParseError(f"config line {n}: expected key = value, got {raw_line!r}")
            if key not in known:
                raise ParseError(f"config line {n}: unknown option {key!r}")
            values[key] = cls._coerce(key, raw, n)
        values.update(overrides)
        try:
            return cls(**values)
        except ValueError as exc:
            raise ParseError(f"config: {exc}") from exc

    @classmethod
    def _coerce(cls, key: str, raw: str, n: int):
        if raw.lower() in ("none", ""):
            if key in cls._NONE_KEYS:
                return None
            raise ParseError(f"config line {n}: {key} cannot be none")
        if key in cls._STR_KEYS:
            return raw
        try:
            return float(raw) if key in cls._FLOAT_KEYS else int(raw)
        except ValueError:
            raise ParseError(f"config line {n}: bad value {raw!r} for {key}") from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def make_classifier(config: PipelineConfig):
    if config.classifier == "heuristic":
        return HeuristicClassifier(
            misseg_gap=config.misseg_gap, title_density=config.title_density
        )
    if config.classifier.startswith("external:"):
        return ExternalClassifier(config.classifier.partition(":")[2])
    raise ValueError(f"unknown classifier {config.classifier!r}")


def extract_page(
    gray,
    config: PipelineConfig | None = None,
    *,
    page_type: PageType = PageType.MAIN,
    page_id: int = 0,
    file_name: str | None = None,
) -> PageLayout:
    """Run the whole pipeline on one scan.

    Advertisement and other pages are passed through unsegmented (an
    empty layout carrying only the page type), matching the scope of the
    annotations: only main and index pages get layout trees.
    """
    config = config if config is not None else PipelineConfig()
    gray = check_gray(gray)
    h, w = gray.shape
    if page_type not in SEGMENTED_TYPES:
        return PageLayout(
            page_id=page_id,
            page_type=page_type,
            elements=[],
            image_size=(w, h),
            file_name=file_name,
        )
    bm = binarize(gray, config.binarize_threshold)
    frame = detect_page_frame(
        bm,
        c_frame=config.c_frame,
        factor=config.coarse_factor,
        min_frame_fraction=config.min_frame_fraction,
    )
    return extract_page_with_frame(
        gray, frame, config, page_type=page_type, page_id=page_id, file_name=file_name
    )


def _typed_block(rect: Rect, cls: RegionClass, crop, subtitle_gap_min: int):
    """(rect, category, refined title/subtitle or None) for one block."""
    if cls is RegionClass.TEXT:
        return rect, Category.TEXT_REGION, None
    if cls is RegionClass.TITLE:
        title, subtitle = split_title_subtitle(crop, subtitle_gap_min)
        title = title.shifted(rect.x, rect.y)
        subtitle = subtitle.shifted(rect.x, rect.y) if subtitle is not None else None
        return rect, Category.TITLE_REGION, (title, subtitle)
    # a block that still looks fused after repair gets the catch-all label
    return rect, Category.OTHER, None


def extract_page_with_frame(
    gray,
    frame: Quad,
    config: PipelineConfig | None = None,
    *,
    page_type: PageType = PageType.MAIN,
    page_id: int = 0,
    file_name: str | None = None,
) -> PageLayout:
    """Extract a page whose frame quad is already known.

    This is both the tail of :func:`extract_page` and the re-extraction
    entry point for manually corrected frames.
    """
    config = config if config is not None else PipelineConfig()
    gray = check_gray(gray)
    bm = binarize(gray, config.binarize_threshold)
    w, h = _quad_rect_size(frame)
    rectifier = fit_affine(frame, Rect(0, 0, w, h))
    rectified = warp(bm, rectifier, w, h)

    inset = config.frame_inset
    classifier = make_classifier(config)
    try:
        rows: list[Rect] = []
        if h > 2 * inset and w > 2 * inset:
            interior = rectified[inset : h - inset, inset : w - inset]
            rows = [
                r.shifted(inset, inset)
                for r in split_rows(
                    interior,
                    config.c_row,
                    factor=config.coarse_factor,
                    min_row_pixels=config.min_row_pixels,
                )
            ]

        regions_per_row: list[list[tuple[Rect, Category]]] = []
        refined: dict[tuple[int, int], tuple[Rect, Rect | None]] = {}
        for i, row in enumerate(rows):
            x0, y0 = int(row.x), int(row.y)
            row_img = rectified[y0 : int(row.y2), x0 : int(row.x2)]
            c_region = max(1, round(config.region_fill_frac * row_img.shape[0]))
            blocks = []
            for rect in split_regions(
                row_img, c_region, min_region_pixels=config.min_region_pixels
            ):
                crop = row_img[int(rect.y) : int(rect.y2), int(rect.x) : int(rect.x2)]
                cls, _ = classify_region(classifier, crop)
                if cls is RegionClass.MIS_SEGMENTED:
                    parts = split_missegmented(crop, c_region)
                    if len(parts) == 1:
                        blocks.append((parts[0].shifted(rect.x, rect.y), Category.OTHER, None))
                        continue
                    for part in parts:
                        pcrop = crop[int(part.y) : int(part.y2), int(part.x) : int(part.x2)]
                        pcls, _ = classify_region(classifier, pcrop)
                        blocks.append(
                            _typed_block(
                                part.shifted(rect.x, rect.y),
                                pcls,
                                pcrop,
                                config.subtitle_gap_min,
                            )
                        )
                else:
                    blocks.append(_typed_block(rect, cls, crop, config.subtitle_gap_min))

            regions = []
            for k, (rect, category, refine) in enumerate(blocks):
                regions.append((rect.shifted(x0, y0), category))
                if refine is not None:
                    title, subtitle = refine
                    refined[(i, k)] = (
                        title.shifted(x0, y0),
                        subtitle.shifted(x0, y0) if subtitle is not None else None,
                    )
            regions_per_row.append(regions)
    finally:
        close = getattr(classifier, "close", None)
        if close is not None:
            close()

    layout = assemble(
        frame,
        rows,
        regions_per_row,
        refined,
        page_id=page_id,
        page_type=page_type,
        rectified_size=(w, h),
    )
    gap_break = config.gap_break
    if page_type is PageType.INDEX and config.index_gap_break is not None:
        gap_break = config.index_gap_break
    layout = assign_reading_order(layout, gap_break)
    layout.image_size = (gray.shape[1], gray.shape[0])
    layout.file_name = file_name
    return layout


class LayoutExtractor(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: a batch of scans in, layout trees out.

    X is a sequence of 2-D uint8 arrays or (array, PageType) pairs.
    Stateless apart from the config; ``fit`` just materializes it.
    """

    def __init__(self, config: PipelineConfig | None = None):
        self.config = config

    def fit(self, X=None, y=None) -> "LayoutExtractor":
        self.config_ = self.config if self.config is not None else PipelineConfig()
        return self

    def transform(self, X) -> list[PageLayout]:
        if not hasattr(self, "config_"):
            self.fit()
        out = []
        for i, item in enumerate(X):
            gray, page_type = item if isinstance(item, tuple) else (item, PageType.MAIN)
            out.append(
                extract_page(gray, self.config_, page_type=page_type, page_id=i)
            )
        return out
