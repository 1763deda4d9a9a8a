"""
Detection and pipeline configuration schemas.
"""

from typing import Dict, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from skimage.measure import approximate_polygon, find_contours

from dla_toolkit.baselines.lines import LineGeometryConfig
from dla_toolkit.errors import DimensionMismatch
from dla_toolkit.geometry.raster import rasterize
from dla_toolkit.geometry.shapes import BBox, BitMask
from dla_toolkit.page.models import Polygon
from dla_toolkit.proposals.nms import DEFAULT_NMS_THRESHOLD, DEFAULT_ROI_CAP, DEFAULT_SCORE_THRESHOLD

PROB_SLACK = 1e-6


class PageHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    page_id: str
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    image_filename: str = ""


class Detection(BaseModel):
    """One object hypothesis: class probabilities, box and a mask and/or polygon"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    page_id: str
    det_id: str
    class_probs: Dict[str, float]
    box: BBox
    mask: Optional[BitMask] = None
    polygon: Optional[Polygon] = None

    @field_validator("class_probs")
    @classmethod
    def _probabilities(cls, probs):
        if not probs:
            raise ValueError("a detection needs at least one class probability")
        if any(p < 0 or p > 1 for p in probs.values()):
            raise ValueError("class probabilities must lie in [0, 1]")
        if sum(probs.values()) > 1 + PROB_SLACK:
            raise ValueError(f"class probabilities sum to {sum(probs.values()):.4f} > 1")
        return probs

    @property
    def score(self) -> float:
        return max(self.class_probs.values())

    @property
    def class_label(self) -> str:
        return min(self.class_probs, key=lambda label: (-self.class_probs[label], label))

    def to_mask(self, width: int, height: int) -> BitMask:
        if self.mask is not None:
            if (self.mask.width, self.mask.height) != (width, height):
                raise DimensionMismatch(
                    f"detection {self.det_id} mask is {self.mask.width}x{self.mask.height}, page {width}x{height}")
            return self.mask
        if self.polygon is not None:
            return rasterize(self.polygon, width, height)
        return rasterize(Polygon.from_box(*self.box.as_tuple()), width, height)

    def to_polygon(self) -> Polygon:
        if self.polygon is not None:
            return self.polygon
        if self.mask is not None and self.mask.area > 0:
            return mask_outline(self.mask)
        return Polygon.from_box(*self.box.as_tuple())


def mask_outline(mask: BitMask, tolerance: float = 0.5) -> Polygon:
    """Outer contour of the largest connected blob on the pixel-edge grid"""
    padded = np.pad(mask.bits, 1).astype(np.float64)
    contour = max(find_contours(padded, 0.5), key=len)
    contour = approximate_polygon(contour, tolerance)[:-1]
    if len(contour) < 3:
        return Polygon.from_box(*mask.bbox().as_tuple())
    # padded (row, col) -> image (x, y); pixel centers sit at +0.5
    xy = np.column_stack([contour[:, 1] - 0.5, contour[:, 0] - 0.5])
    return Polygon(vertices=tuple(map(tuple, xy.tolist())))


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    nms_threshold: float = Field(default=DEFAULT_NMS_THRESHOLD, ge=0.0, le=1.0)
    roi_cap: int = Field(default=DEFAULT_ROI_CAP, ge=1)
    n_train_max: int = Field(default=0, ge=0)
    score_threshold: float = Field(default=DEFAULT_SCORE_THRESHOLD, ge=0.0, le=1.0)
    line_geometry: LineGeometryConfig = LineGeometryConfig()
    textline_label: str = "text-line"
    class_wise_nms: bool = True
    insertion_iou: Literal["mask", "box"] = "mask"
