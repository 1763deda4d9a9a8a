"""
Domain types for a document page's layout.

Models are immutable; operations that need stricter guarantees than the models
enforce (e.g. two distinct baseline points) raise from the operation itself.
"""

from typing import Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Point = Tuple[float, float]


class Polygon(BaseModel):
    """Implicitly closed ring of (x, y) pixel coordinates"""

    model_config = ConfigDict(frozen=True)

    vertices: Tuple[Point, ...]

    @field_validator("vertices")
    @classmethod
    def _at_least_three(cls, vertices):
        if len(vertices) < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {len(vertices)}")
        return vertices

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)

    @property
    def area(self) -> float:
        """Absolute shoelace area"""
        pts = self.as_array()
        x, y = pts[:, 0], pts[:, 1]
        return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        pts = self.as_array()
        return (float(pts[:, 0].min()), float(pts[:, 1].min()),
                float(pts[:, 0].max()), float(pts[:, 1].max()))

    @classmethod
    def from_box(cls, x0: float, y0: float, x1: float, y1: float) -> "Polygon":
        return cls(vertices=((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


class Baseline(BaseModel):
    """Piece-wise linear curve a text line sits on"""

    model_config = ConfigDict(frozen=True)

    points: Tuple[Point, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64).reshape(-1, 2)

    @property
    def length(self) -> float:
        pts = self.as_array()
        if len(pts) < 2:
            return 0.0
        return float(np.hypot(*np.diff(pts, axis=0).T).sum())

    @property
    def mean_y(self) -> float:
        return float(self.as_array()[:, 1].mean())


class TextLine(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    polygon: Polygon
    baseline: Optional[Baseline] = None
    score: float = Field(default=1.0, ge=0.0, le=1.0)


class Region(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    class_label: str = "unknown"
    polygon: Polygon
    lines: Tuple[TextLine, ...] = ()
    score: float = Field(default=1.0, ge=0.0, le=1.0)


class Page(BaseModel):
    model_config = ConfigDict(frozen=True)

    image_filename: str
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    regions: Tuple[Region, ...] = ()
    orphan_lines: Tuple[TextLine, ...] = ()
    reading_order: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _each_line_once(self):
        seen = set()
        for line in self.iter_lines():
            if line.id in seen:
                raise ValueError(f"text line {line.id!r} appears more than once on the page")
            seen.add(line.id)
        region_ids = [region.id for region in self.regions]
        if len(region_ids) != len(set(region_ids)):
            raise ValueError("region ids must be unique")
        return self

    def iter_lines(self) -> Iterator[TextLine]:
        for region in self.regions:
            yield from region.lines
        yield from self.orphan_lines

    @property
    def line_count(self) -> int:
        return sum(1 for _ in self.iter_lines())

    def baselines(self) -> List[Baseline]:
        return [line.baseline for line in self.iter_lines() if line.baseline is not None]

    @property
    def dims(self) -> Tuple[int, int]:
        return self.width, self.height
