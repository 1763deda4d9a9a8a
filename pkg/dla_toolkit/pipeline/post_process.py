"""
Inference post-processing: turns one page's raw detections into a Page.

Stage order: NMS capped at ``roi_cap`` → best m = max(100, n + 50) RoIs →
score filter → split text lines from regions → baseline extraction on each
text-line mask → insertion of every line into the region of maximum IoU
(lines overlapping no region are kept as orphans).
"""

import logging
from typing import List, Optional, Sequence, Tuple

from dla_toolkit.baselines.lines import baseline_to_polygon, mask_to_baseline
from dla_toolkit.errors import EmptyMask
from dla_toolkit.geometry.raster import bbox_iou, mask_iou
from dla_toolkit.geometry.shapes import BBox, BitMask
from dla_toolkit.log import log_event
from dla_toolkit.page.models import Page, Region, TextLine
from dla_toolkit.pipeline.schemas import Detection, PipelineConfig
from dla_toolkit.proposals.nms import ScoredBox, filter_by_score, nms_select, select_rois

logger = logging.getLogger(__name__)


def _suppress(detections: Sequence[Detection], config: PipelineConfig) -> List[Detection]:
    class_index = {label: i for i, label in enumerate(sorted({d.class_label for d in detections}))}
    boxes = [ScoredBox(box=d.box, score=d.score, class_index=class_index[d.class_label]) for d in detections]
    kept = nms_select(boxes, config.nms_threshold, config.roi_cap, config.class_wise_nms)
    return [detections[k] for k in kept]


def _overlap(config: PipelineConfig, line: Tuple[BBox, BitMask], region: Tuple[BBox, BitMask]) -> float:
    if config.insertion_iou == "box":
        return bbox_iou(line[0], region[0])
    return mask_iou(line[1], region[1])


def post_process(detections: Sequence[Detection], config: Optional[PipelineConfig], image_dims: Tuple[int, int],
                 page_id: str = "", image_filename: str = "") -> Page:
    """Assemble one page from its detections; ``image_dims`` is the (width, height) of the page image"""
    config = config or PipelineConfig()
    width, height = image_dims
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    image_filename = image_filename or page_id

    survivors = _suppress(list(detections), config) if detections else []
    after_nms = len(survivors)
    survivors = select_rois(survivors, config.n_train_max)
    survivors = filter_by_score(survivors, config.score_threshold)
    log_event(logger, "detections_filtered", page=page_id, received=len(detections),
              after_nms=after_nms, kept=len(survivors))

    region_dets = [d for d in survivors if d.class_label != config.textline_label]
    line_dets = [d for d in survivors if d.class_label == config.textline_label]

    regions = []
    for n, det in enumerate(region_dets, start=1):
        mask = det.to_mask(width, height)
        regions.append((f"r{n:04d}", det, (det.box, mask)))

    members = {region_id: [] for region_id, _, _ in regions}
    orphans: List[TextLine] = []
    for n, det in enumerate(line_dets, start=1):
        mask = det.to_mask(width, height)
        try:
            baseline = mask_to_baseline(mask, config.line_geometry)
        except EmptyMask:
            log_event(logger, "line_skipped", logging.WARNING, page=page_id, detection=det.det_id, reason="empty mask")
            continue
        polygon = det.polygon or baseline_to_polygon(baseline, config.line_geometry)
        line = TextLine(id=f"l{n:04d}", polygon=polygon, baseline=baseline, score=det.score)

        scored = [
            (_overlap(config, (det.box, mask), geometry), region_det.score, region_id)
            for region_id, region_det, geometry in regions
        ]
        scored = [s for s in scored if s[0] > 0]
        if scored:
            best = min(scored, key=lambda s: (-s[0], -s[1], s[2]))
            members[best[2]].append(line)
        else:
            orphans.append(line)

    page = Page(
        image_filename=image_filename,
        width=width,
        height=height,
        regions=tuple(
            Region(id=region_id, class_label=det.class_label, polygon=det.to_polygon(),
                   lines=tuple(members[region_id]), score=det.score)
            for region_id, det, _ in regions
        ),
        orphan_lines=tuple(orphans),
    )
    log_event(logger, "page_assembled", page=page_id, regions=len(page.regions),
              lines=page.line_count, orphans=len(orphans))
    return page


def page_to_detections(page: Page, textline_label: str = "text-line", page_id: str = "") -> List[Detection]:
    """Re-express a Page as score-1.0 detections (regions first, then lines)"""
    page_id = page_id or page.image_filename

    def _box(polygon) -> BBox:
        return BBox(**dict(zip(("x0", "y0", "x1", "y1"), polygon.bounds))).clip(page.width, page.height)

    detections = [
        Detection(page_id=page_id, det_id=region.id, class_probs={region.class_label: 1.0},
                  box=_box(region.polygon), polygon=region.polygon)
        for region in page.regions
    ]
    detections += [
        Detection(page_id=page_id, det_id=line.id, class_probs={textline_label: 1.0},
                  box=_box(line.polygon), polygon=line.polygon)
        for line in page.iter_lines()
    ]
    return detections
