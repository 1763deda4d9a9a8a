"""
Tolerance-based baseline precision, recall and F1 over normalized baselines.

Every baseline is resampled at a fixed arc-length step. A hypothesis point counts
for precision when it lies within the tolerance (Euclidean distance to the
polyline) of some ground-truth baseline; recall is the same with roles swapped.
This point-coverage matching does not assign segments one-to-one.
"""

import logging
from typing import List, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dla_toolkit.baselines.lines import FALLBACK_INTERLINE, estimate_interline, normalize_baseline
from dla_toolkit.errors import DegenerateBaseline
from dla_toolkit.log import log_event
from dla_toolkit.page.models import Baseline

logger = logging.getLogger(__name__)

AUTO = "auto"
TOLERANCE_FACTOR = 0.25
TOLERANCE_MIN = 10.0
TOLERANCE_MAX = 30.0
DEFAULT_STEP = 5.0
_CHUNK = 512

Tolerance = Union[float, str]


class BaselineScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    matched_hyp_points: int = Field(default=0, ge=0)
    total_hyp_points: int = Field(default=0, ge=0)
    matched_gt_points: int = Field(default=0, ge=0)
    total_gt_points: int = Field(default=0, ge=0)

    @classmethod
    def from_counts(cls, matched_hyp: int, total_hyp: int, matched_gt: int, total_gt: int) -> "BaselineScore":
        if total_hyp == 0 and total_gt == 0:
            precision = recall = 1.0
        elif total_hyp == 0 or total_gt == 0:
            precision = recall = 0.0
        else:
            precision = matched_hyp / total_hyp
            recall = matched_gt / total_gt
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        return cls(
            precision=precision, recall=recall, f1=f1,
            matched_hyp_points=matched_hyp, total_hyp_points=total_hyp,
            matched_gt_points=matched_gt, total_gt_points=total_gt,
        )

    def merge(self, other: "BaselineScore") -> "BaselineScore":
        """Micro-average: pool the point counts of both scores"""
        return BaselineScore.from_counts(
            self.matched_hyp_points + other.matched_hyp_points,
            self.total_hyp_points + other.total_hyp_points,
            self.matched_gt_points + other.matched_gt_points,
            self.total_gt_points + other.total_gt_points,
        )


def resolve_tolerance(tolerance: Tolerance, gt: Sequence[Baseline], hyp: Sequence[Baseline] = ()) -> float:
    """Numeric tolerance, or 0.25 x interline distance clamped to [10, 30] for "auto"."""
    if tolerance != AUTO:
        return float(tolerance)
    reference = gt or hyp
    interline = estimate_interline(reference) if reference else FALLBACK_INTERLINE
    return float(np.clip(TOLERANCE_FACTOR * interline, TOLERANCE_MIN, TOLERANCE_MAX))


def _normalized(baselines: Sequence[Baseline], step: float) -> List[np.ndarray]:
    resampled = []
    for baseline in baselines:
        try:
            resampled.append(normalize_baseline(baseline, step).as_array())
        except DegenerateBaseline as e:
            log_event(logger, "baseline_skipped", logging.WARNING, reason=str(e))
    return resampled


def point_to_polylines(points: np.ndarray, polylines: Sequence[np.ndarray]) -> np.ndarray:
    """Distance of each point to the nearest segment of any polyline"""
    segments = np.concatenate([np.stack([p[:-1], p[1:]], axis=1) for p in polylines])
    starts, ends = segments[:, 0], segments[:, 1]
    direction = ends - starts
    length_sq = np.einsum("ij,ij->i", direction, direction)
    safe_length = np.where(length_sq > 0, length_sq, 1.0)

    best = np.empty(len(points))
    for lo in range(0, len(points), _CHUNK):
        chunk = points[lo:lo + _CHUNK, None, :]
        t = np.einsum("pmk,mk->pm", chunk - starts, direction) / safe_length
        t = np.clip(np.where(length_sq > 0, t, 0.0), 0.0, 1.0)
        nearest = starts + t[..., None] * direction
        best[lo:lo + _CHUNK] = np.sqrt(((chunk - nearest) ** 2).sum(axis=-1)).min(axis=1)
    return best


def _covered(points: List[np.ndarray], reference: List[np.ndarray], tolerance: float) -> int:
    if not points or not reference:
        return 0
    distances = point_to_polylines(np.concatenate(points), reference)
    return int(np.count_nonzero(distances <= tolerance))


def baseline_prf(gt: Sequence[Baseline], hyp: Sequence[Baseline], tolerance: Tolerance = AUTO,
                 step: float = DEFAULT_STEP) -> BaselineScore:
    tol = resolve_tolerance(tolerance, gt, hyp)
    gt_points, hyp_points = _normalized(gt, step), _normalized(hyp, step)
    return BaselineScore.from_counts(
        matched_hyp=_covered(hyp_points, gt_points, tol),
        total_hyp=sum(len(p) for p in hyp_points),
        matched_gt=_covered(gt_points, hyp_points, tol),
        total_gt=sum(len(p) for p in gt_points),
    )
