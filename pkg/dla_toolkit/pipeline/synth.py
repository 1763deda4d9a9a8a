"""
Synthetic layouts with known-by-construction evaluation targets.

Each page stacks regions in a main column, fills them with horizontal text
lines, and derives a detection set from the ground truth: optionally jittered,
with dropped regions (false negatives) and extra regions placed in the empty
right margin (false positives).
"""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from dla_toolkit.baselines.lines import LineGeometryConfig, baseline_to_polygon
from dla_toolkit.geometry.shapes import BBox
from dla_toolkit.page.models import Baseline, Page, Polygon, Region, TextLine
from dla_toolkit.pipeline.schemas import Detection

MAIN_COLUMN = (0.08, 0.80)
MARGIN_COLUMN = (0.84, 0.96)
PAGE_PAD = 0.04
REGION_GAP = 8.0
LINE_MARGIN_X = 10.0
MIN_LINE_SPACING = 24.0


class SynthSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_regions: int = Field(default=4, ge=0)
    lines_per_region: int = Field(default=3, ge=0)
    class_labels: Tuple[str, ...] = ("paragraph", "marginalia")
    jitter: float = Field(default=0.0, ge=0.0)
    false_positives: int = Field(default=0, ge=0)
    false_negatives: int = Field(default=0, ge=0)
    width: int = Field(default=600, gt=0)
    height: int = Field(default=800, gt=0)
    textline_label: str = "text-line"
    line_geometry: LineGeometryConfig = LineGeometryConfig()


def _score(rng: np.random.Generator) -> float:
    return round(float(rng.uniform(0.7, 1.0)), 3)


def _jitter_points(points: np.ndarray, rng: np.random.Generator, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return points
    return points + rng.normal(0.0, sigma, size=points.shape)


def _polygon(points: np.ndarray) -> Polygon:
    return Polygon(vertices=tuple(map(tuple, points.tolist())))


def _box(polygon: Polygon, width: int, height: int) -> BBox:
    x0, y0, x1, y1 = polygon.bounds
    return BBox(x0=x0, y0=y0, x1=x1, y1=y1).clip(width, height)


def _layout(spec: SynthSpec, rng: np.random.Generator) -> List[Region]:
    cfg = spec.line_geometry
    x0, x1 = MAIN_COLUMN[0] * spec.width, MAIN_COLUMN[1] * spec.width
    top, bottom = PAGE_PAD * spec.height, (1 - PAGE_PAD) * spec.height
    band = (bottom - top) / max(spec.n_regions, 1)

    regions = []
    for k in range(spec.n_regions):
        ry0, ry1 = top + k * band + REGION_GAP / 2, top + (k + 1) * band - REGION_GAP / 2
        label = str(rng.choice(spec.class_labels))
        spacing = (ry1 - ry0 - cfg.offset_below - 2) / max(spec.lines_per_region, 1)
        if spec.lines_per_region and spacing < MIN_LINE_SPACING:
            raise ValueError(f"{spec.lines_per_region} lines do not fit a {ry1 - ry0:.0f}px region")
        lines = []
        for j in range(spec.lines_per_region):
            y = ry0 + (j + 1) * spacing
            baseline = Baseline(points=((x0 + LINE_MARGIN_X, y), ((x0 + x1) / 2, y), (x1 - LINE_MARGIN_X, y)))
            lines.append(TextLine(id=f"r{k:03d}_l{j:03d}", polygon=baseline_to_polygon(baseline, cfg),
                                  baseline=baseline))
        regions.append(Region(id=f"r{k:03d}", class_label=label,
                              polygon=Polygon.from_box(x0, ry0, x1, ry1), lines=tuple(lines)))
    return regions


def generate_synthetic_page(seed: int, spec: SynthSpec = SynthSpec(),
                            page_id: str = "") -> Tuple[Page, List[Detection]]:
    """Deterministic (ground-truth page, perturbed detections) pair for ``seed``"""
    rng = np.random.default_rng(seed)
    page_id = page_id or f"synth_{seed:05d}"
    regions = _layout(spec, rng)
    page = Page(image_filename=f"{page_id}.png", width=spec.width, height=spec.height, regions=tuple(regions))

    dropped = set()
    if spec.false_negatives and regions:
        count = min(spec.false_negatives, len(regions))
        dropped = {int(i) for i in rng.choice(len(regions), size=count, replace=False)}

    detections: List[Detection] = []
    for k, region in enumerate(regions):
        polygon = _polygon(_jitter_points(region.polygon.as_array(), rng, spec.jitter))
        if k not in dropped:
            detections.append(Detection(
                page_id=page_id, det_id=f"{page_id}:{region.id}",
                class_probs={region.class_label: _score(rng)},
                box=_box(polygon, spec.width, spec.height), polygon=polygon,
            ))
        for line in region.lines:
            points = line.baseline.as_array().copy()
            if spec.jitter > 0:
                points[:, 1] += rng.normal(0.0, spec.jitter, size=len(points))
            line_polygon = baseline_to_polygon(Baseline(points=tuple(map(tuple, points.tolist()))),
                                               spec.line_geometry)
            detections.append(Detection(
                page_id=page_id, det_id=f"{page_id}:{line.id}",
                class_probs={spec.textline_label: _score(rng)},
                box=_box(line_polygon, spec.width, spec.height), polygon=line_polygon,
            ))

    if spec.false_positives:
        mx0, mx1 = MARGIN_COLUMN[0] * spec.width, MARGIN_COLUMN[1] * spec.width
        slot = (1 - 2 * PAGE_PAD) * spec.height / spec.false_positives
        for k in range(spec.false_positives):
            fy0 = PAGE_PAD * spec.height + k * slot + REGION_GAP / 2
            polygon = Polygon.from_box(mx0, fy0, mx1, fy0 + slot - REGION_GAP)
            label = str(rng.choice(spec.class_labels))
            detections.append(Detection(
                page_id=page_id, det_id=f"{page_id}:fp{k:03d}",
                class_probs={label: _score(rng)},
                box=_box(polygon, spec.width, spec.height), polygon=polygon,
            ))
    return page, detections


def generate_corpus(seed: int, n_pages: int, spec: SynthSpec = SynthSpec()) -> List[Tuple[Page, List[Detection]]]:
    return [generate_synthetic_page(seed + i, spec, page_id=f"synth_{seed:05d}_{i:04d}") for i in range(n_pages)]
