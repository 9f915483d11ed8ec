"""Detection metrics: IoU, interpolated average precision, and mAP.

The AP follows the COCO convention: greedy score-ordered matching at a
fixed IoU threshold, 101-point interpolated precision-recall area, and a
final mean over thresholds 0.50:0.05:0.95 and over categories.  Matching
ties are broken by content (image id, bbox), so equal-score detections
produce the same AP regardless of input order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .coco import CocoDataset, ELEMENT_CATEGORY_NAMES
from .errors import ParseError
from .geometry import Rect

IOU_THRESHOLDS = [round(0.50 + 0.05 * i, 2) for i in range(10)]
RECALL_GRID = [i / 100.0 for i in range(101)]


@dataclass(frozen=True)
class Detection:
    image_id: int
    category_id: int
    bbox: Rect
    score: float = 1.0


def iou(a: Rect, b: Rect) -> float:
    inter = a.inter_area(b)
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def _canonical_order(d: Detection):
    return (-d.score, d.image_id, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.category_id)


def average_precision(
    dets: list[Detection],
    truths: list[Detection],
    category: int,
    iou_thresh: float,
) -> float | None:
    """AP for one category at one IoU threshold; None when no truths exist."""
    gt = sorted(
        (t for t in truths if t.category_id == category),
        key=lambda t: (t.image_id, t.bbox.x, t.bbox.y, t.bbox.w, t.bbox.h),
    )
    if not gt:
        return None
    preds = sorted((d for d in dets if d.category_id == category), key=_canonical_order)
    if not preds:
        return 0.0

    gt_by_image: dict[int, list[Detection]] = {}
    for t in gt:
        gt_by_image.setdefault(t.image_id, []).append(t)
    matched: dict[int, list[bool]] = {i: [False] * len(g) for i, g in gt_by_image.items()}

    tp = []
    for d in preds:
        candidates = gt_by_image.get(d.image_id, [])
        best_i, best_iou = -1, 0.0
        for i, t in enumerate(candidates):
            if matched[d.image_id][i]:
                continue
            v = iou(d.bbox, t.bbox)
            if v >= iou_thresh and v > best_iou:
                best_i, best_iou = i, v
        if best_i >= 0:
            matched[d.image_id][best_i] = True
            tp.append(True)
        else:
            tp.append(False)

    n_gt = len(gt)
    precisions, recalls = [], []
    cum_tp = 0
    for rank, hit in enumerate(tp, start=1):
        cum_tp += int(hit)
        precisions.append(cum_tp / rank)
        recalls.append(cum_tp / n_gt)

    # precision envelope: best precision achievable at recall >= r
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])

    total = 0.0
    j = 0
    for r in RECALL_GRID:
        while j < len(recalls) and recalls[j] < r:
            j += 1
        total += precisions[j] if j < len(precisions) else 0.0
    return total / len(RECALL_GRID)


def map_50_95(dets: list[Detection], truths: list[Detection]) -> dict:
    """Mean AP over the COCO threshold grid, per category and overall.

    Categories without ground truth are excluded from the mean (and
    reported as absent), matching common evaluator behavior.
    """
    categories = sorted({t.category_id for t in truths})
    per_category: dict[int, float] = {}
    for c in categories:
        aps = [average_precision(dets, truths, c, t) for t in IOU_THRESHOLDS]
        per_category[c] = sum(aps) / len(aps)
    mean = sum(per_category.values()) / len(per_category) if per_category else 0.0
    return {"per_category": per_category, "mAP": mean}


def truths_from_coco(ds: CocoDataset) -> list[Detection]:
    return [
        Detection(
            image_id=a["image_id"],
            category_id=a["category_id"],
            bbox=Rect.from_bbox(a["bbox"]),
            score=1.0,
        )
        for a in ds.annotations
    ]


def detections_from_json(text: str) -> list[Detection]:
    """COCO-results format: a JSON list of {image_id, category_id, bbox, score}."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(payload, list):
        raise ParseError("detection results must be a JSON list")
    out = []
    for i, d in enumerate(payload):
        try:
            out.append(
                Detection(
                    image_id=d["image_id"],
                    category_id=d["category_id"],
                    bbox=Rect.from_bbox(d["bbox"]),
                    score=float(d.get("score", 1.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"detection #{i}: {d!r} ({exc})") from exc
    return out


def detections_from_layouts(layouts) -> list[Detection]:
    """Treat extracted layouts as unit-score detections (self-evaluation)."""
    from .coco import to_coco

    return truths_from_coco(to_coco(layouts))


def ap_table_tsv(report: dict) -> str:
    """Two-column TSV (category name, AP@[0.50:0.95]) plus the mean row."""
    lines = ["category\tap_50_95"]
    names = {int(c): n for c, n in ELEMENT_CATEGORY_NAMES.items()}
    for cat, ap in sorted(report["per_category"].items()):
        lines.append(f"{names.get(cat, str(cat))}\t{ap:.6f}")
    lines.append(f"mean\t{report['mAP']:.6f}")
    return "\n".join(lines) + "\n"
