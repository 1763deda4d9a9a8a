"""
Anchor shapes, sliding-window anchor grids and the center/log box-delta
parameterization of proposals relative to anchors.
"""

import math
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dla_toolkit.errors import NonPositiveAnchor
from dla_toolkit.geometry.shapes import BBox

# RPN configuration used for all experiments on the target datasets
DEFAULT_SCALES = (32, 64, 128, 256, 512)
DEFAULT_RATIOS = ("1:1", "1:2", "2:1")

Ratio = Union[str, Tuple[int, int], Fraction, float]


class AnchorShape(BaseModel):
    model_config = ConfigDict(frozen=True)

    width: float = Field(gt=0)
    height: float = Field(gt=0)
    scale: float = Field(gt=0)
    ratio: str


class BoxDelta(BaseModel):
    """Center offsets divided by anchor size, log width/height ratios"""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    dx: float
    dy: float
    dw: float
    dh: float


def parse_ratio(ratio: Ratio) -> Tuple[float, str]:
    """Return (h / w, "h:w" label) for "2:1", (2, 1), Fraction(2) or 2.0"""
    if isinstance(ratio, str):
        h, _, w = ratio.partition(":")
        value, label = float(h) / float(w), ratio
    elif isinstance(ratio, tuple):
        value, label = ratio[0] / ratio[1], f"{ratio[0]}:{ratio[1]}"
    else:
        fraction = Fraction(ratio).limit_denominator(1000)
        value, label = float(ratio), f"{fraction.numerator}:{fraction.denominator}"
    if value <= 0:
        raise ValueError(f"aspect ratio must be positive: {ratio!r}")
    return value, label


def anchor_shapes(scales: Iterable[float] = DEFAULT_SCALES,
                  ratios: Iterable[Ratio] = DEFAULT_RATIOS) -> List[AnchorShape]:
    """One shape per (scale, ratio): w = s / sqrt(r), h = s * sqrt(r) with r = h / w"""
    scales, ratios = list(scales), [parse_ratio(r) for r in ratios]
    if not scales or not ratios:
        raise ValueError("anchor scales and ratios must be non-empty")
    return [
        AnchorShape(width=s / math.sqrt(r), height=s * math.sqrt(r), scale=s, ratio=label)
        for s in scales
        for r, label in ratios
    ]


def anchor_grid(shapes: Sequence[AnchorShape], width: int, height: int, stride: int) -> List[BBox]:
    """Anchors centered on every stride cell whose origin lies inside the image.

    Order: row of cells, then column, then shape. Boxes are not clipped.
    """
    if stride < 1:
        raise ValueError("stride must be at least 1")
    cols = max(1, math.ceil(width / stride))
    rows = max(1, math.ceil(height / stride))
    centers_x = np.arange(cols) * stride + stride / 2
    centers_y = np.arange(rows) * stride + stride / 2
    return [
        BBox.from_center(float(cx), float(cy), shape.width, shape.height)
        for cy in centers_y
        for cx in centers_x
        for shape in shapes
    ]


def overhanging(boxes: Sequence[BBox], width: int, height: int) -> List[bool]:
    return [b.x0 < 0 or b.y0 < 0 or b.x1 > width or b.y1 > height for b in boxes]


def _check_anchor(anchor: BBox) -> None:
    if anchor.width <= 0 or anchor.height <= 0:
        raise NonPositiveAnchor(f"anchor {anchor.as_tuple()} has no area")


def encode_delta(anchor: BBox, target: BBox) -> BoxDelta:
    _check_anchor(anchor)
    acx, acy = anchor.center
    tcx, tcy = target.center
    try:
        return BoxDelta(
            dx=(tcx - acx) / anchor.width,
            dy=(tcy - acy) / anchor.height,
            dw=math.log(target.width / anchor.width),
            dh=math.log(target.height / anchor.height),
        )
    except ValueError as e:
        raise NonPositiveAnchor(f"target {target.as_tuple()} has no area") from e


def decode_delta(anchor: BBox, delta: BoxDelta, clip_to: Optional[Tuple[int, int]] = None) -> BBox:
    _check_anchor(anchor)
    acx, acy = anchor.center
    box = BBox.from_center(
        acx + delta.dx * anchor.width,
        acy + delta.dy * anchor.height,
        anchor.width * math.exp(delta.dw),
        anchor.height * math.exp(delta.dh),
    )
    return box.clip(*clip_to) if clip_to is not None else box
