"""tatedoc: layout extraction for scans of vertical-text documents.

Turns grayscale page scans into hierarchical layout annotations — page
frame, rows, text/title blocks, titles and subtitles — with right-to-left
reading orders, exported as COCO JSON with parent/reading-order fields.
Ships a synthetic-page oracle, statistical quality control, and COCO-style
detection metrics.
"""

__version__ = "0.1.0"

from .classify import (
    ExternalClassifier,
    HeuristicClassifier,
    RegionClass,
    classify_region,
    normalize_region,
    region_features,
    split_missegmented,
)
from .coco import (
    CocoDataset,
    category_table,
    from_coco,
    from_text,
    layouts_from_coco,
    split_dataset,
    to_coco,
    to_text,
    validate,
)
from .errors import (
    BadCorrection,
    DegenerateContour,
    EmptyRegion,
    EmptyResult,
    HierarchyViolation,
    InfeasibleSpec,
    InsufficientCorpus,
    NoPageFrame,
    ParseError,
    SingularFit,
    TatedocError,
)
from .geometry import (
    AffineMap,
    Point,
    Quad,
    Rect,
    circumscribe_quad,
    fit_affine,
    polygon_area,
    warp,
)
from .metrics import (
    Detection,
    ap_table_tsv,
    average_precision,
    detections_from_json,
    detections_from_layouts,
    iou,
    map_50_95,
    truths_from_coco,
)
from .order import (
    Category,
    LayoutElement,
    PageLayout,
    PageType,
    assemble,
    assign_reading_order,
    iter_reading_order,
    sibling_gaps,
)
from .pipeline import (
    LayoutExtractor,
    PipelineConfig,
    extract_page,
    extract_page_with_frame,
)
from .qc import (
    Correction,
    DEFAULT_THRESHOLDS,
    FlagKind,
    QcFlag,
    QcThresholds,
    QualityFlagger,
    apply_corrections,
    compute_thresholds,
    flag_corpus,
    nearest_rank,
    parse_corrections,
    parse_report,
    render_report,
)
from .raster import binarize, downsample, load_gray, otsu_threshold, render_mask, save_gray
from .segmentation import (
    Component,
    connected_components,
    detect_page_frame,
    labeled_components,
    rlsa_horizontal,
    rlsa_vertical,
    split_regions,
    split_rows,
    split_title_subtitle,
    trace_boundary,
)
from .synth import (
    CorpusResult,
    NoiseSpec,
    PageSpec,
    RegionSpec,
    RowSpec,
    build_layout,
    classifier_samples,
    default_page_spec,
    generate_corpus,
    generate_page,
    hard_noise_preset,
    index_page_spec,
    inject_noise,
    text_region_spec,
    title_region_spec,
)

__all__ = [name for name in dir() if not name.startswith("_")]
