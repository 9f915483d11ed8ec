"""Layout tree assembly and reading-order assignment.

Element categories and page types carry the dataset's numeric category
ids.  Reading order follows vertical Japanese: rows top to bottom, blocks
within a row right to left, title before subtitle.  An optional gap break
splits a row's blocks into segments at unusually wide gaps (section
headers on index pages interrupt the dense right-to-left run).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .errors import HierarchyViolation
from .geometry import Quad, Rect


class Category(enum.IntEnum):
    PAGE_FRAME = 1
    ROW = 2
    TITLE_REGION = 3
    TEXT_REGION = 4
    TITLE = 5
    SUBTITLE = 6
    OTHER = 7


class PageType(enum.IntEnum):
    MAIN = 8
    ADVERTISEMENT = 9
    INDEX = 10
    OTHER = 11


# categories allowed under each parent category
_ALLOWED_PARENT = {
    Category.ROW: (Category.PAGE_FRAME,),
    Category.TITLE_REGION: (Category.ROW,),
    Category.TEXT_REGION: (Category.ROW,),
    Category.OTHER: (Category.ROW,),
    Category.TITLE: (Category.TITLE_REGION,),
    Category.SUBTITLE: (Category.TITLE_REGION,),
}


@dataclass
class LayoutElement:
    id: int
    category: Category
    rect: Rect
    parent: int | None = None
    reading_order: int = -1
    quad: Quad | None = None  # page frame only: scan-space corners


@dataclass
class PageLayout:
    page_id: int
    page_type: PageType
    elements: list[LayoutElement] = field(default_factory=list)
    image_size: tuple[int, int] | None = None  # scan (width, height)
    file_name: str | None = None
    corrected: bool = False

    def element(self, eid: int) -> LayoutElement:
        for el in self.elements:
            if el.id == eid:
                return el
        raise KeyError(f"no element {eid} on page {self.page_id}")

    def children_of(self, eid: int) -> list[LayoutElement]:
        return [el for el in self.elements if el.parent == eid]

    def frame(self) -> LayoutElement:
        frames = [el for el in self.elements if el.category == Category.PAGE_FRAME]
        if len(frames) != 1:
            raise HierarchyViolation(
                f"page {self.page_id} has {len(frames)} page frames, expected 1"
            )
        return frames[0]


def _quad_rect_size(quad: Quad) -> tuple[int, int]:
    """Axis-aligned size a frame quad rectifies to: mean opposing edge lengths."""
    tl, tr, br, bl = quad.corners
    w = (math.dist(tl, tr) + math.dist(bl, br)) / 2
    h = (math.dist(tl, bl) + math.dist(tr, br)) / 2
    return max(1, round(w)), max(1, round(h))


def assemble(
    frame: Quad,
    rows: list[Rect],
    regions_per_row: list[list[tuple[Rect, Category]]],
    refined_blocks: dict[tuple[int, int], tuple[Rect, Rect | None]] | None = None,
    *,
    page_id: int = 0,
    page_type: PageType = PageType.MAIN,
    rectified_size: tuple[int, int] | None = None,
    tol: float = 2.0,
) -> PageLayout:
    """Bind stage outputs into one layout tree with dense ids.

    All rects are rectified-frame coordinates; ``refined_blocks`` maps
    (row index, region index) to that title region's (title, subtitle)
    rects.  Ids count up in construction order: frame, then each row
    followed by its regions right-to-left, each region followed by its
    title/subtitle.

    Raises:
        HierarchyViolation: a child rect leaves its parent by more than ``tol``.
    """
    refined_blocks = refined_blocks or {}
    if len(regions_per_row) != len(rows):
        raise ValueError(
            f"got {len(rows)} rows but {len(regions_per_row)} region lists"
        )
    w, h = rectified_size if rectified_size is not None else _quad_rect_size(frame)
    frame_rect = Rect(0, 0, w, h)

    def check_inside(child: Rect, parent: Rect, what: str) -> None:
        if not parent.contains(child, tol=tol):
            raise HierarchyViolation(f"{what} rect {child} outside parent {parent}")

    elements: list[LayoutElement] = [
        LayoutElement(0, Category.PAGE_FRAME, frame_rect, parent=None, quad=frame)
    ]
    next_id = 1
    for i, (row_rect, regions) in enumerate(zip(rows, regions_per_row)):
        check_inside(row_rect, frame_rect, f"row {i}")
        row_id = next_id
        elements.append(LayoutElement(row_id, Category.ROW, row_rect, parent=0))
        next_id += 1
        for j, (region_rect, category) in enumerate(regions):
            if category not in (Category.TITLE_REGION, Category.TEXT_REGION, Category.OTHER):
                raise ValueError(f"region ({i},{j}) has non-region category {category}")
            check_inside(region_rect, row_rect, f"region ({i},{j})")
            region_id = next_id
            elements.append(LayoutElement(region_id, category, region_rect, parent=row_id))
            next_id += 1
            if (i, j) in refined_blocks:
                if category != Category.TITLE_REGION:
                    raise ValueError(f"refined block ({i},{j}) on a {category.name} region")
                title_rect, subtitle_rect = refined_blocks[(i, j)]
                check_inside(title_rect, region_rect, f"title ({i},{j})")
                elements.append(
                    LayoutElement(next_id, Category.TITLE, title_rect, parent=region_id)
                )
                next_id += 1
                if subtitle_rect is not None:
                    check_inside(subtitle_rect, region_rect, f"subtitle ({i},{j})")
                    elements.append(
                        LayoutElement(next_id, Category.SUBTITLE, subtitle_rect, parent=region_id)
                    )
                    next_id += 1
    return PageLayout(page_id=page_id, page_type=page_type, elements=elements)


def _right_to_left_key(el: LayoutElement):
    # ties in right edge: higher block first, then smaller id
    return (-el.rect.x2, el.rect.y, el.id)


def _order_row_children(children: list[LayoutElement], gap_break: float | None) -> list[LayoutElement]:
    blocks = sorted(children, key=_right_to_left_key)
    if gap_break is None or len(blocks) < 2:
        return blocks
    segments: list[list[LayoutElement]] = [[blocks[0]]]
    for prev, cur in zip(blocks, blocks[1:]):
        gap = prev.rect.x - cur.rect.x2  # whitespace between righter and lefter
        if gap > gap_break:
            segments.append([cur])
        else:
            segments[-1].append(cur)
    # segments right-to-left by their right edge, blocks right-to-left inside
    segments.sort(key=lambda seg: -max(el.rect.x2 for el in seg))
    return [el for seg in segments for el in seg]


def assign_reading_order(layout: PageLayout, gap_break: float | None = None) -> PageLayout:
    """Return the layout with sibling reading orders assigned (0..n-1 each).

    Pure relabeling: never adds, drops, or re-parents elements, and is
    idempotent for a fixed ``gap_break``.
    """
    orders: dict[int, int] = {}
    frame = layout.frame()
    orders[frame.id] = 0

    rows = sorted(
        (el for el in layout.elements if el.category == Category.ROW),
        key=lambda el: (el.rect.y, el.id),
    )
    for i, row in enumerate(rows):
        orders[row.id] = i
        for j, block in enumerate(_order_row_children(layout.children_of(row.id), gap_break)):
            orders[block.id] = j
            if block.category == Category.TITLE_REGION:
                parts = sorted(
                    layout.children_of(block.id),
                    key=lambda el: (el.category != Category.TITLE, el.id),
                )
                for k, part in enumerate(parts):
                    orders[part.id] = k

    elements = [replace(el, reading_order=orders.get(el.id, el.reading_order)) for el in layout.elements]
    return replace(layout, elements=elements)


def iter_reading_order(layout: PageLayout):
    """Depth-first traversal by reading_order: the page's reading sequence."""

    def walk(el: LayoutElement):
        yield el
        for child in sorted(layout.children_of(el.id), key=lambda c: c.reading_order):
            yield from walk(child)

    yield from walk(layout.frame())


def sibling_gaps(layout: PageLayout) -> list[tuple[int, float]]:
    """Horizontal whitespace between adjacent siblings, right to left.

    Yields (subject element id, gap) pairs where the subject is the block
    on the LEFT of the gap — when a block lost content, the enlarged gap
    shows up on its right side, so the left block is the suspect.
    """
    out: list[tuple[int, float]] = []
    for parent in layout.elements:
        if parent.category not in (Category.ROW, Category.TITLE_REGION):
            continue
        children = sorted(layout.children_of(parent.id), key=_right_to_left_key)
        for righter, lefter in zip(children, children[1:]):
            gap = max(0.0, righter.rect.x - lefter.rect.x2)
            out.append((lefter.id, gap))
    return out
