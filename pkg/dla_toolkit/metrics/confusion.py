"""
Pixel confusion accumulation and the Jaccard metrics computed from it.

``counts[i, j]`` is the number of pixels of true class i predicted as class j;
class 0 is background. Accumulation is associative and commutative, so pages may
be evaluated in any order (or concurrently) and merged.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from dla_toolkit.errors import EmptyAccumulator, LabelOutOfRange
from dla_toolkit.geometry.shapes import LabelMap, check_same_dims


class ConfusionMatrix(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    counts: np.ndarray

    @field_validator("counts", mode="before")
    @classmethod
    def _square_counts(cls, value):
        counts = np.array(value, dtype=np.int64, copy=True)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f"confusion counts must be K x K, got shape {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        counts.flags.writeable = False
        return counts

    @classmethod
    def zeros(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(counts=np.zeros((num_classes, num_classes), dtype=np.int64))

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def class_pixels(self) -> np.ndarray:
        """τ_i, pixels of each true class"""
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise LabelOutOfRange(f"cannot merge K={self.num_classes} with K={other.num_classes}")
        return ConfusionMatrix(counts=self.counts + other.counts)

    __add__ = merge

    def iou_denominators(self) -> np.ndarray:
        return self.class_pixels + self.counts.sum(axis=0) - np.diag(self.counts)

    def per_class_iou(self) -> np.ndarray:
        """η_ii / (τ_i + Σ_j η_ji − η_ii); 0 where the denominator is 0"""
        denominators = self.iou_denominators()
        diagonal = np.diag(self.counts).astype(np.float64)
        safe = np.where(denominators > 0, denominators, 1)
        return np.where(denominators > 0, diagonal / safe, 0.0)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and bool(np.array_equal(self.counts, other.counts))


def accumulate_confusion(gt: LabelMap, hyp: LabelMap, acc: Optional[ConfusionMatrix] = None) -> ConfusionMatrix:
    check_same_dims(gt, hyp)
    num_classes = acc.num_classes if acc is not None else max(gt.num_classes, hyp.num_classes)
    for grid in (gt, hyp):
        if grid.labels.size and grid.labels.max() >= num_classes:
            raise LabelOutOfRange(f"label {int(grid.labels.max())} outside K={num_classes}")
    flat = gt.labels.ravel().astype(np.int64) * num_classes + hyp.labels.ravel()
    page = np.bincount(flat, minlength=num_classes ** 2).reshape(num_classes, num_classes)
    page_matrix = ConfusionMatrix(counts=page)
    return page_matrix if acc is None else acc.merge(page_matrix)


def _selected_classes(acc: ConfusionMatrix, include_background: bool, skip_absent_classes: bool) -> np.ndarray:
    classes = np.arange(acc.num_classes)
    if not include_background:
        classes = classes[1:]
    if skip_absent_classes:
        classes = classes[acc.iou_denominators()[classes] > 0]
    return classes


def mean_iou(acc: ConfusionMatrix, include_background: bool = True, skip_absent_classes: bool = False) -> float:
    """Mean Jaccard index over K classes; absent classes count as 0 unless skipped"""
    classes = _selected_classes(acc, include_background, skip_absent_classes)
    if classes.size == 0:
        return 0.0
    return float(acc.per_class_iou()[classes].mean())


def fw_iou(acc: ConfusionMatrix, include_background: bool = True) -> float:
    """Jaccard index weighted by each class's share of true pixels"""
    classes = _selected_classes(acc, include_background, False)
    weights = acc.class_pixels[classes].astype(np.float64)
    if weights.sum() <= 0:
        raise EmptyAccumulator("no ground-truth pixels accumulated")
    return float((weights * acc.per_class_iou()[classes]).sum() / weights.sum())
