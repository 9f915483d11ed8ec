"""COCO-format serialization with hierarchy extensions.

Beyond stock COCO, every annotation carries ``parent`` (annotation id or
null) and ``reading_order``, and every image record carries a
``category_id`` naming its page type.  The canonical text form (sorted
keys, no insignificant whitespace, integers kept integral) makes
serialize→parse→serialize byte-identical.

Coordinate conventions: the page-frame annotation lives in scan space
(bbox = quad bbox, segmentation = the quad polygon); all other elements
live in rectified-frame space with axis-aligned rect polygons.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import ParseError
from .geometry import Quad, Rect, polygon_area
from .order import (
    Category,
    LayoutElement,
    PageLayout,
    PageType,
    _ALLOWED_PARENT,
    _quad_rect_size,
)

ELEMENT_CATEGORY_NAMES = {
    Category.PAGE_FRAME: "page_frame",
    Category.ROW: "row",
    Category.TITLE_REGION: "title_region",
    Category.TEXT_REGION: "text_region",
    Category.TITLE: "title",
    Category.SUBTITLE: "subtitle",
    Category.OTHER: "other",
}

PAGE_TYPE_NAMES = {
    PageType.MAIN: "main",
    PageType.ADVERTISEMENT: "advertisement",
    PageType.INDEX: "index",
    PageType.OTHER: "other",
}


def category_table() -> list[dict]:
    cats = [
        {"id": int(c), "name": n, "supercategory": "layout"}
        for c, n in ELEMENT_CATEGORY_NAMES.items()
    ]
    cats += [
        {"id": int(p), "name": n, "supercategory": "page"}
        for p, n in PAGE_TYPE_NAMES.items()
    ]
    return cats


@dataclass
class CocoDataset:
    images: list[dict] = field(default_factory=list)
    annotations: list[dict] = field(default_factory=list)
    categories: list[dict] = field(default_factory=lambda: category_table())
    info: dict = field(default_factory=dict)


def _int_or_float(v: float):
    """Keep coordinates integral when they are — canonical form stability."""
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return v
    f = float(v)
    return int(f) if f.is_integer() else f


def _rect_polygon(r: Rect) -> list:
    return [_int_or_float(v) for v in (r.x, r.y, r.x2, r.y, r.x2, r.y2, r.x, r.y2)]


def _element_annotation(el: LayoutElement, page: PageLayout, base: int) -> dict:
    if el.category == Category.PAGE_FRAME and el.quad is not None:
        quad = el.quad
        bbox = quad.bbox()
        seg = [_int_or_float(v) for v in quad.polygon()]
        area = polygon_area(quad.corners)
    else:
        bbox = el.rect
        seg = _rect_polygon(el.rect)
        area = el.rect.area
    return {
        "id": base + el.id,
        "image_id": page.page_id,
        "category_id": int(el.category),
        "bbox": [_int_or_float(v) for v in bbox.to_bbox()],
        "segmentation": [seg],
        "area": _int_or_float(area),
        "iscrowd": 0,
        "parent": None if el.parent is None else base + el.parent,
        "reading_order": el.reading_order,
    }


def _page_size(page: PageLayout) -> tuple[int, int]:
    if page.image_size is not None:
        return page.image_size
    if page.elements:
        frame = page.frame()
        if frame.quad is not None:
            b = frame.quad.bbox()
            return int(b.x2), int(b.y2)
        return int(frame.rect.x2), int(frame.rect.y2)
    return 0, 0


def to_coco(layouts: list[PageLayout], *, info: dict | None = None) -> CocoDataset:
    """Serialize layouts losslessly; annotation ids are page base + element id."""
    ds = CocoDataset(info=dict(info or {}))
    base = 0
    for page in sorted(layouts, key=lambda p: p.page_id):
        w, h = _page_size(page)
        image = {
            "id": page.page_id,
            "file_name": page.file_name or f"page-{page.page_id:06d}.png",
            "width": w,
            "height": h,
            "category_id": int(page.page_type),
        }
        if page.corrected:
            image["corrected"] = True
        ds.images.append(image)
        for el in sorted(page.elements, key=lambda e: e.id):
            ds.annotations.append(_element_annotation(el, page, base))
        base += len(page.elements)
    return ds


def to_text(ds: CocoDataset) -> str:
    payload = {
        "info": ds.info,
        "images": ds.images,
        "annotations": ds.annotations,
        "categories": ds.categories,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def from_text(text: str) -> CocoDataset:
    """Parse COCO JSON text.

    Raises:
        ParseError: malformed JSON (with location) or a payload that is
            not a COCO object; unknown ids are validation findings, not
            parse errors.
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ParseError("top-level JSON value is not an object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(payload.get(key), list):
            raise ParseError(f"missing or non-list {key!r} field")
    return CocoDataset(
        images=payload["images"],
        annotations=payload["annotations"],
        categories=payload["categories"],
        info=payload.get("info", {}),
    )


from_coco = from_text


def validate(ds: CocoDataset) -> list[str]:
    """Check every dataset invariant; returns human-readable violations."""
    out: list[str] = []
    images = {}
    for im in ds.images:
        if im["id"] in images:
            out.append(f"duplicate image id {im['id']}")
        images[im["id"]] = im
        if im.get("category_id") not in set(int(p) for p in PageType):
            out.append(f"image {im['id']}: unknown page type {im.get('category_id')}")

    element_ids = set(int(c) for c in Category)
    anns: dict[int, dict] = {}
    per_image: dict[int, list[dict]] = {}
    for a in ds.annotations:
        if a["id"] in anns:
            out.append(f"duplicate annotation id {a['id']}")
        anns[a["id"]] = a
        per_image.setdefault(a["image_id"], []).append(a)
        if a["image_id"] not in images:
            out.append(f"annotation {a['id']}: unknown image {a['image_id']}")
            continue
        if a["category_id"] not in element_ids:
            out.append(f"annotation {a['id']}: unknown category {a['category_id']}")
            continue
        im = images[a["image_id"]]
        x, y, w, h = a["bbox"]
        if w <= 0 or h <= 0:
            out.append(f"annotation {a['id']}: empty bbox {a['bbox']}")
        if x < 0 or y < 0 or x + w > im["width"] or y + h > im["height"]:
            out.append(f"annotation {a['id']}: bbox {a['bbox']} outside image bounds")
        seg = a.get("segmentation")
        if not seg or not seg[0] or len(seg[0]) % 2:
            out.append(f"annotation {a['id']}: missing segmentation polygon")
        else:
            pts = list(zip(seg[0][0::2], seg[0][1::2]))
            area = polygon_area(pts)
            if area <= 0:
                out.append(f"annotation {a['id']}: degenerate polygon")
            elif abs(area - a.get("area", -1)) > 1e-6:
                out.append(f"annotation {a['id']}: area {a.get('area')} != polygon area {area}")
        if a.get("reading_order", -1) < 0:
            out.append(f"annotation {a['id']}: missing reading_order")

    for a in ds.annotations:
        parent = a.get("parent")
        if parent is None:
            continue
        if parent not in anns:
            out.append(f"annotation {a['id']}: dangling parent {parent}")
            continue
        pa = anns[parent]
        if pa["image_id"] != a["image_id"]:
            out.append(f"annotation {a['id']}: parent {parent} on another image")
        cat = Category(a["category_id"]) if a["category_id"] in element_ids else None
        pcat = Category(pa["category_id"]) if pa["category_id"] in element_ids else None
        if cat is not None and pcat is not None and pcat not in _ALLOWED_PARENT.get(cat, ()):
            out.append(
                f"annotation {a['id']}: {cat.name} cannot have {pcat.name} parent"
            )

    for image_id, group in per_image.items():
        frames = [
            a for a in group if a["category_id"] == int(Category.PAGE_FRAME)
        ]
        if len(frames) != 1:
            out.append(f"image {image_id}: {len(frames)} page frames, expected 1")
        elif frames[0].get("parent") is not None:
            out.append(f"image {image_id}: page frame has a parent")
        by_parent: dict = {}
        for a in group:
            by_parent.setdefault(a.get("parent"), []).append(a)
        for parent, sibs in by_parent.items():
            orders = sorted(a.get("reading_order", -1) for a in sibs)
            if orders != list(range(len(sibs))):
                out.append(
                    f"image {image_id}: siblings of {parent} have orders {orders}"
                )
    return out


def layouts_from_coco(ds: CocoDataset) -> list[PageLayout]:
    """Inverse of :func:`to_coco`: rebuild layout trees from a dataset."""
    per_image: dict[int, list[dict]] = {}
    for a in ds.annotations:
        per_image.setdefault(a["image_id"], []).append(a)

    layouts = []
    for im in sorted(ds.images, key=lambda i: i["id"]):
        anns = sorted(per_image.get(im["id"], []), key=lambda a: a["id"])
        base = anns[0]["id"] if anns else 0
        elements = []
        for a in anns:
            quad = None
            if a["category_id"] == int(Category.PAGE_FRAME):
                quad = Quad.from_polygon(a["segmentation"][0])
                # the stored rect of a frame is its rectified extent
                rect = Rect(0, 0, *_quad_rect_size(quad))
            else:
                rect = Rect.from_bbox(a["bbox"])
            elements.append(
                LayoutElement(
                    id=a["id"] - base,
                    category=Category(a["category_id"]),
                    rect=rect,
                    parent=None if a.get("parent") is None else a["parent"] - base,
                    reading_order=a.get("reading_order", -1),
                    quad=quad,
                )
            )
        layouts.append(
            PageLayout(
                page_id=im["id"],
                page_type=PageType(im["category_id"]),
                elements=elements,
                image_size=(im["width"], im["height"]),
                file_name=im.get("file_name"),
                corrected=bool(im.get("corrected", False)),
            )
        )
    return layouts


def split_dataset(
    ds: CocoDataset, seed: int = 0
) -> tuple[CocoDataset, CocoDataset, CocoDataset]:
    """Deterministic 70/15/15 split, stratified by page type.

    Per type: shuffle with the seeded RNG, floor(0.70·n) to train,
    floor(0.15·n) to val, remainder to test — except a singleton type
    goes to train so no type is absent from training.
    """
    by_type: dict[int, list[dict]] = {}
    for im in ds.images:
        by_type.setdefault(im["category_id"], []).append(im)

    buckets: tuple[list[dict], list[dict], list[dict]] = ([], [], [])
    rng = random.Random(seed)
    for page_type in sorted(by_type):
        group = sorted(by_type[page_type], key=lambda im: im["id"])
        rng.shuffle(group)
        n = len(group)
        if n == 1:
            buckets[0].extend(group)
            continue
        n_train = int(0.70 * n)
        n_val = int(0.15 * n)
        buckets[0].extend(group[:n_train])
        buckets[1].extend(group[n_train : n_train + n_val])
        buckets[2].extend(group[n_train + n_val :])

    def subset(images: list[dict]) -> CocoDataset:
        ids = {im["id"] for im in images}
        return CocoDataset(
            images=sorted(images, key=lambda im: im["id"]),
            annotations=[a for a in ds.annotations if a["image_id"] in ids],
            categories=[dict(c) for c in ds.categories],
            info=dict(ds.info),
        )

    return subset(buckets[0]), subset(buckets[1]), subset(buckets[2])
