"""
Axis-aligned boxes and raster grids.
"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from dla_toolkit.errors import DimensionMismatch


class BBox(BaseModel):
    model_config = ConfigDict(frozen=True)

    x0: float
    y0: float
    x1: float
    y1: float

    @model_validator(mode="after")
    def _ordered(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"box corners out of order: {self.as_tuple()}")
        return self

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def center(self) -> Tuple[float, float]:
        return self.x0 + 0.5 * self.width, self.y0 + 0.5 * self.height

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.x0, self.y0, self.x1, self.y1

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, height: float) -> "BBox":
        return cls(x0=cx - 0.5 * width, y0=cy - 0.5 * height, x1=cx + 0.5 * width, y1=cy + 0.5 * height)

    def clip(self, width: float, height: float) -> "BBox":
        x0, x1 = sorted((min(max(self.x0, 0.0), width), min(max(self.x1, 0.0), width)))
        y0, y1 = sorted((min(max(self.y0, 0.0), height), min(max(self.y1, 0.0), height)))
        return BBox(x0=x0, y0=y0, x1=x1, y1=y1)


def _frozen_grid(array: np.ndarray, dtype) -> np.ndarray:
    grid = np.array(array, dtype=dtype, copy=True)
    if grid.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {grid.shape}")
    grid.flags.writeable = False
    return grid


class BitMask(BaseModel):
    """Binary raster, indexed ``bits[row, column]`` (height x width)"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    bits: np.ndarray

    @field_validator("bits", mode="before")
    @classmethod
    def _as_bool_grid(cls, value):
        return _frozen_grid(value, bool)

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    @classmethod
    def empty(cls, width: int, height: int) -> "BitMask":
        return cls(bits=np.zeros((height, width), dtype=bool))

    def bbox(self) -> BBox:
        """Tight pixel-edge box of the set pixels (zero box for an empty mask)"""
        rows = np.flatnonzero(self.bits.any(axis=1))
        cols = np.flatnonzero(self.bits.any(axis=0))
        if rows.size == 0:
            return BBox(x0=0, y0=0, x1=0, y1=0)
        return BBox(x0=float(cols[0]), y0=float(rows[0]), x1=float(cols[-1] + 1), y1=float(rows[-1] + 1))

    def __eq__(self, other) -> bool:
        return isinstance(other, BitMask) and self.bits.shape == other.bits.shape and bool(
            np.array_equal(self.bits, other.bits))


class LabelMap(BaseModel):
    """Per-pixel class indices, 0 meaning background"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    labels: np.ndarray
    num_classes: int

    @field_validator("labels", mode="before")
    @classmethod
    def _as_index_grid(cls, value):
        return _frozen_grid(value, np.int32)

    @model_validator(mode="after")
    def _indices_in_range(self):
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"label indices must lie in [0, {self.num_classes})")
        return self

    @property
    def width(self) -> int:
        return int(self.labels.shape[1])

    @property
    def height(self) -> int:
        return int(self.labels.shape[0])

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.num_classes)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LabelMap) and self.num_classes == other.num_classes
                and self.labels.shape == other.labels.shape
                and bool(np.array_equal(self.labels, other.labels)))


def check_same_dims(a, b) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(f"{a.width}x{a.height} vs {b.width}x{b.height}")
