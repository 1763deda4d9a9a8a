"""
Non-maximal suppression and the RoI count rules applied at inference.
"""

from typing import List, Sequence, TypeVar

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dla_toolkit.geometry.raster import iou_one_to_many
from dla_toolkit.geometry.shapes import BBox

DEFAULT_NMS_THRESHOLD = 0.5
DEFAULT_ROI_CAP = 1000
DEFAULT_SCORE_THRESHOLD = 0.5
MIN_ROIS = 100
ROI_MARGIN = 50

T = TypeVar("T")


class ScoredBox(BaseModel):
    model_config = ConfigDict(frozen=True)

    box: BBox
    score: float = Field(ge=0.0, le=1.0)
    class_index: int = 0


def _descending(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score, ties by input position"""
    return np.argsort(-scores, kind="stable")


def nms_indices(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float, cap: int) -> List[int]:
    """Greedy suppression over an (n, 4) array; returns kept input indices in score order"""
    order = _descending(np.asarray(scores, dtype=np.float64))
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    keep: List[int] = []
    while order.size > 0 and len(keep) < cap:
        i = int(order[0])
        keep.append(i)
        rest = order[1:]
        overlap = iou_one_to_many(boxes[i], boxes[rest])
        order = rest[overlap <= iou_threshold]
    return keep


def nms_select(boxes: Sequence[ScoredBox], iou_threshold: float = DEFAULT_NMS_THRESHOLD,
               cap: int = DEFAULT_ROI_CAP, class_wise: bool = True) -> List[int]:
    """Indices of the boxes surviving suppression, by descending score then input index.

    ``class_wise`` suppresses only among boxes sharing a class index.
    """
    if not boxes:
        return []
    coords = np.array([b.box.as_tuple() for b in boxes], dtype=np.float64)
    scores = np.array([b.score for b in boxes], dtype=np.float64)
    if not class_wise:
        return nms_indices(coords, scores, iou_threshold, cap)

    classes = np.array([b.class_index for b in boxes])
    kept: List[int] = []
    for label in np.unique(classes):
        members = np.flatnonzero(classes == label)
        kept.extend(int(members[k]) for k in nms_indices(coords[members], scores[members], iou_threshold, cap))
    kept.sort(key=lambda k: (-scores[k], k))
    return kept[:cap]


def nms(boxes: Sequence[ScoredBox], iou_threshold: float = DEFAULT_NMS_THRESHOLD,
        cap: int = DEFAULT_ROI_CAP, class_wise: bool = True) -> List[ScoredBox]:
    return [boxes[k] for k in nms_select(boxes, iou_threshold, cap, class_wise)]


def roi_count(n_train_max: int) -> int:
    """m = max(100, n + 50) with n the most objects found on one training image"""
    return max(MIN_ROIS, n_train_max + ROI_MARGIN)


def select_rois(candidates: Sequence[T], n_train_max: int) -> List[T]:
    """Best m candidates by score (stable for ties)"""
    ranked = sorted(candidates, key=lambda c: -c.score)
    return ranked[:roi_count(n_train_max)]


def filter_by_score(detections: Sequence[T], threshold: float = DEFAULT_SCORE_THRESHOLD) -> List[T]:
    """Drop detections whose probability for every class is lower than ``threshold``"""
    return [d for d in detections if max(d.class_probs.values(), default=0.0) >= threshold]
