"""
Rasterization, intersection-over-union and label-map painting.

A pixel (column i, row j) belongs to a polygon iff its center (i + 0.5, j + 0.5)
is inside by the even-odd (crossing number) rule.
"""

import logging
import math
from typing import Mapping, NamedTuple, Protocol, Sequence

import numpy as np

from dla_toolkit.errors import DimensionMismatch, LabelOutOfRange
from dla_toolkit.geometry.shapes import BBox, BitMask, LabelMap, check_same_dims
from dla_toolkit.log import log_event
from dla_toolkit.page.models import Polygon

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


def rasterize(polygon: Polygon, width: int, height: int) -> BitMask:
    """Scanline even-odd fill sampled at pixel centers"""
    bits = np.zeros((height, width), dtype=bool)
    if polygon.area <= DEGENERATE_AREA:
        log_event(logger, "degenerate_polygon", logging.WARNING, vertices=len(polygon.vertices))
        return BitMask(bits=bits)

    pts = polygon.as_array()
    ax, ay = pts[:, 0], pts[:, 1]
    bx, by = np.roll(ax, -1), np.roll(ay, -1)

    row_start = max(0, math.floor(ay.min() - 0.5))
    row_stop = min(height, math.ceil(ay.max()))
    col_start = max(0, math.floor(ax.min() - 0.5))
    col_stop = min(width, math.ceil(ax.max()))
    if row_start >= row_stop or col_start >= col_stop:
        return BitMask(bits=bits)

    centers_x = np.arange(col_start, col_stop) + 0.5
    for row in range(row_start, row_stop):
        py = row + 0.5
        crossing = (ay <= py) != (by <= py)
        if not crossing.any():
            continue
        cax, cay, cbx, cby = ax[crossing], ay[crossing], bx[crossing], by[crossing]
        vt = (py - cay) / (cby - cay)
        xs = np.sort(cax + vt * (cbx - cax))
        # crossings strictly right of each center
        right = xs.size - np.searchsorted(xs, centers_x, side="right")
        bits[row, col_start:col_stop] = (right % 2) == 1
    return BitMask(bits=bits)


def iou_one_to_many(box: np.ndarray, others: np.ndarray) -> np.ndarray:
    """IoU of one (x0, y0, x1, y1) row against each row of ``others``"""
    others = np.asarray(others, dtype=np.float64).reshape(-1, 4)
    iw = np.maximum(0.0, np.minimum(box[2], others[:, 2]) - np.maximum(box[0], others[:, 0]))
    ih = np.maximum(0.0, np.minimum(box[3], others[:, 3]) - np.maximum(box[1], others[:, 1]))
    inter = iw * ih
    union = (box[2] - box[0]) * (box[3] - box[1]) + (others[:, 2] - others[:, 0]) * (others[:, 3] - others[:, 1]) - inter
    safe = np.where(union > 0, union, 1.0)
    return np.where(union > 0, inter / safe, 0.0)


def bbox_iou(a: BBox, b: BBox) -> float:
    return float(iou_one_to_many(np.asarray(a.as_tuple()), np.asarray([b.as_tuple()]))[0])


def mask_iou(a: BitMask, b: BitMask) -> float:
    """|a ∧ b| / |a ∨ b|; two empty masks score 0"""
    check_same_dims(a, b)
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 0.0
    return np.count_nonzero(a.bits & b.bits) / union


class PaintItem(NamedTuple):
    item_id: str
    score: float
    class_label: str
    mask: BitMask


class Paintable(Protocol):
    det_id: str
    score: float
    class_label: str

    def to_mask(self, width: int, height: int) -> BitMask: ...


def paint_items(items: Sequence[PaintItem], width: int, height: int,
                class_order: Mapping[str, int]) -> LabelMap:
    """Paint masks so the highest score (then smallest id) owns contested pixels"""
    num_classes = max(class_order.values(), default=0) + 1
    labels = np.zeros((height, width), dtype=np.int32)
    ranked = sorted(items, key=lambda item: (-item.score, item.item_id))
    for item in reversed(ranked):
        if (item.mask.width, item.mask.height) != (width, height):
            raise DimensionMismatch(
                f"mask of {item.item_id!r} is {item.mask.width}x{item.mask.height}, canvas {width}x{height}")
        if item.class_label not in class_order:
            raise LabelOutOfRange(f"class {item.class_label!r} has no index in the class order")
        labels[item.mask.bits] = class_order[item.class_label]
    return LabelMap(labels=labels, num_classes=num_classes)


def paint_label_map(detections: Sequence[Paintable], width: int, height: int,
                    class_order: Mapping[str, int]) -> LabelMap:
    items = [PaintItem(d.det_id, d.score, d.class_label, d.to_mask(width, height)) for d in detections]
    return paint_items(items, width, height, class_order)
