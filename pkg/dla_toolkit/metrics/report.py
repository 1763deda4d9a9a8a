"""
Evaluation reports: one ``key=value`` per line, or JSON. Scores are percentages
rounded to one decimal.
"""

import json
from typing import Dict, Mapping

from pydantic import BaseModel

from dla_toolkit.errors import EmptyAccumulator
from dla_toolkit.metrics.confusion import fw_iou, mean_iou
from dla_toolkit.metrics.evaluate import CorpusEvaluation, EvalConfig

MATCHING_NOTE = "point coverage within tolerance; approximates one-to-one segment matching"


def percent(value: float) -> float:
    return round(100.0 * value, 1)


class EvaluationReport(BaseModel):
    pages: int
    classes: Dict[str, int]
    per_class_iou: Dict[str, float]
    miou: float
    fw_iou: float
    precision: float
    recall: float
    f1: float
    tolerance: str
    tolerance_min: float
    tolerance_max: float
    step: float
    include_background: bool
    skip_absent_classes: bool
    baseline_matching: str = MATCHING_NOTE


def build_report(result: CorpusEvaluation, class_order: Mapping[str, int], config: EvalConfig) -> EvaluationReport:
    names = {0: "background", **{index: label for label, index in class_order.items()}}
    per_class = result.confusion.per_class_iou()
    try:
        weighted = fw_iou(result.confusion, config.include_background)
    except EmptyAccumulator:
        weighted = 0.0
    tolerances = [page.tolerance for page in result.pages] or [0.0]
    return EvaluationReport(
        pages=len(result.pages),
        classes={names.get(i, f"class{i}"): i for i in range(result.confusion.num_classes)},
        per_class_iou={names.get(i, f"class{i}"): percent(v) for i, v in enumerate(per_class)},
        miou=percent(mean_iou(result.confusion, config.include_background, config.skip_absent_classes)),
        fw_iou=percent(weighted),
        precision=percent(result.baseline.precision),
        recall=percent(result.baseline.recall),
        f1=percent(result.baseline.f1),
        tolerance=str(config.tolerance),
        tolerance_min=round(min(tolerances), 3),
        tolerance_max=round(max(tolerances), 3),
        step=config.step,
        include_background=config.include_background,
        skip_absent_classes=config.skip_absent_classes,
    )


def render_text(report: EvaluationReport) -> str:
    lines = []
    for key, value in report.model_dump().items():
        if isinstance(value, dict):
            lines.extend(f"{key}.{name}={item}" for name, item in value.items())
        else:
            lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def render_json(report: EvaluationReport) -> str:
    return json.dumps(report.model_dump(), indent=2) + "\n"
