"""
Page and corpus evaluation: region label maps feed a global confusion matrix,
baselines feed a pooled point-coverage score.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from dla_toolkit.errors import DimensionMismatch
from dla_toolkit.geometry.raster import PaintItem, paint_items, rasterize
from dla_toolkit.geometry.shapes import LabelMap
from dla_toolkit.log import log_event
from dla_toolkit.metrics.baseline_score import AUTO, DEFAULT_STEP, BaselineScore, baseline_prf, resolve_tolerance
from dla_toolkit.metrics.confusion import ConfusionMatrix, accumulate_confusion
from dla_toolkit.page.models import Page

logger = logging.getLogger(__name__)


class EvalConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tolerance: Union[Literal["auto"], float] = AUTO
    step: float = Field(default=DEFAULT_STEP, gt=0)
    include_background: bool = True
    skip_absent_classes: bool = False


class PageEvaluation(BaseModel):
    model_config = ConfigDict(frozen=True)

    page_id: str
    confusion: ConfusionMatrix
    baseline: BaselineScore
    tolerance: float


class CorpusEvaluation(BaseModel):
    model_config = ConfigDict(frozen=True)

    pages: Tuple[PageEvaluation, ...]
    confusion: ConfusionMatrix
    baseline: BaselineScore


def build_class_order(labels: Iterable[str], preferred: Sequence[str] = ()) -> Dict[str, int]:
    """Map class labels to indices 1..K-1 (0 is background): preferred order first, rest sorted"""
    labels = set(labels)
    ordered = [label for label in preferred]
    ordered += sorted(label for label in labels if label not in ordered)
    return {label: index + 1 for index, label in enumerate(ordered)}


def page_label_map(page: Page, class_order: Mapping[str, int]) -> LabelMap:
    items = [
        PaintItem(region.id, region.score, region.class_label, rasterize(region.polygon, page.width, page.height))
        for region in page.regions
    ]
    return paint_items(items, page.width, page.height, class_order)


def evaluate_page_pair(gt: Page, hyp: Page, class_order: Mapping[str, int],
                       config: Optional[EvalConfig] = None, page_id: str = "") -> PageEvaluation:
    config = config or EvalConfig()
    if gt.dims != hyp.dims:
        raise DimensionMismatch(f"gt page is {gt.width}x{gt.height}, hypothesis {hyp.width}x{hyp.height}")
    num_classes = max(class_order.values(), default=0) + 1
    confusion = accumulate_confusion(
        page_label_map(gt, class_order),
        page_label_map(hyp, class_order),
        ConfusionMatrix.zeros(num_classes),
    )
    gt_baselines, hyp_baselines = gt.baselines(), hyp.baselines()
    tolerance = resolve_tolerance(config.tolerance, gt_baselines, hyp_baselines)
    score = baseline_prf(gt_baselines, hyp_baselines, tolerance, config.step)
    page_id = page_id or gt.image_filename
    log_event(logger, "page_evaluated", page=page_id, pixels=confusion.total,
              gt_lines=len(gt_baselines), hyp_lines=len(hyp_baselines), f1=score.f1)
    return PageEvaluation(page_id=page_id, confusion=confusion, baseline=score, tolerance=tolerance)


def merge_evaluations(pages: Sequence[PageEvaluation], num_classes: int) -> CorpusEvaluation:
    confusion = ConfusionMatrix.zeros(num_classes)
    baseline = BaselineScore.from_counts(0, 0, 0, 0)
    for page in pages:
        confusion = confusion.merge(page.confusion)
        baseline = baseline.merge(page.baseline)
    return CorpusEvaluation(pages=tuple(pages), confusion=confusion, baseline=baseline)


def evaluate_corpus(pairs: Sequence[Tuple[str, Page, Page]], class_order: Mapping[str, int],
                    config: Optional[EvalConfig] = None, jobs: int = 1) -> CorpusEvaluation:
    """Evaluate (page_id, gt, hyp) triples; results are merged in input order for any ``jobs``"""
    config = config or EvalConfig()

    def _one(pair):
        page_id, gt, hyp = pair
        return evaluate_page_pair(gt, hyp, class_order, config, page_id)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            pages: List[PageEvaluation] = list(executor.map(_one, pairs))
    else:
        pages = [_one(pair) for pair in pairs]
    return merge_evaluations(pages, max(class_order.values(), default=0) + 1)
