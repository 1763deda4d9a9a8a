import math

import numpy as np
import pytest

from dla_toolkit.errors import DetectionFormatError, NonPositiveAnchor
from dla_toolkit.geometry.shapes import BBox, BitMask
from dla_toolkit.page.models import Polygon
from dla_toolkit.pipeline.schemas import Detection, PageHeader
from dla_toolkit.proposals.anchors import (
    BoxDelta, anchor_grid, anchor_shapes, decode_delta, encode_delta, overhanging, parse_ratio,
)
from dla_toolkit.proposals.detections_io import (
    decode_rle, encode_rle, format_detections, parse_detections, read_detections, write_detections,
)
from dla_toolkit.proposals.losses import binary_cross_entropy, combine_losses, cross_entropy, smooth_l1
from dla_toolkit.proposals.nms import ScoredBox, filter_by_score, nms, nms_select, roi_count, select_rois


def scored(box, score, class_index=0):
    return ScoredBox(box=BBox(x0=box[0], y0=box[1], x1=box[2], y1=box[3]), score=score, class_index=class_index)


def detection(score, label="paragraph", det_id="d"):
    return Detection(page_id="p", det_id=det_id, class_probs={label: score}, box=BBox(x0=0, y0=0, x1=1, y1=1))


def iou_oracle(a, b):
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def nms_oracle(boxes, scores, threshold, cap):
    order = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    kept = []
    for i in order:
        if all(iou_oracle(boxes[i], boxes[k]) <= threshold for k in kept):
            kept.append(i)
    return kept[:cap]


def test_anchor_shapes_default_configuration():
    shapes = anchor_shapes()
    assert len(shapes) == 15
    for shape in shapes:
        assert abs(shape.width * shape.height - shape.scale ** 2) <= 1


def test_anchor_shape_sizes():
    square = anchor_shapes([64], ["1:1"])[0]
    assert (square.width, square.height) == (64, 64)
    tall = anchor_shapes([32], ["2:1"])[0]
    assert tall.width == pytest.approx(22.63, abs=0.01)
    assert tall.height == pytest.approx(45.25, abs=0.01)
    assert parse_ratio((1, 2)) == (0.5, "1:2")
    assert parse_ratio(2.0) == (2.0, "2:1")
    with pytest.raises(ValueError):
        anchor_shapes([], ["1:1"])


def test_anchor_grid_counts():
    one = anchor_shapes([32], ["1:1"])
    assert len(anchor_grid(one, 64, 64, 32)) == 4
    assert len(anchor_grid(anchor_shapes(), 256, 256, 32)) == 960
    assert len(anchor_grid(anchor_shapes(), 20, 20, 64)) == 15


def test_anchor_grid_centers_and_overhang():
    grid = anchor_grid(anchor_shapes([64], ["1:1"]), 64, 64, 32)
    assert [b.center for b in grid] == [(16, 16), (48, 16), (16, 48), (48, 48)]
    assert overhanging(grid, 64, 64) == [True, True, True, True]
    assert overhanging([BBox(x0=0, y0=0, x1=64, y1=64)], 64, 64) == [False]


def test_encode_delta_examples():
    anchor = BBox(x0=0, y0=0, x1=10, y1=10)
    assert encode_delta(anchor, anchor) == BoxDelta(dx=0, dy=0, dw=0, dh=0)
    delta = encode_delta(anchor, BBox(x0=5, y0=5, x1=25, y1=25))
    assert (delta.dx, delta.dy) == (1.0, 1.0)
    assert delta.dw == pytest.approx(math.log(2))
    assert delta.dh == pytest.approx(math.log(2))


def test_delta_inverse_on_random_boxes(rng):
    for _ in range(200):
        ax, ay, tx, ty = rng.uniform(-100, 500, 4)
        aw, ah, tw, th = rng.uniform(1, 300, 4)
        anchor = BBox(x0=ax, y0=ay, x1=ax + aw, y1=ay + ah)
        target = BBox(x0=tx, y0=ty, x1=tx + tw, y1=ty + th)
        back = decode_delta(anchor, encode_delta(anchor, target))
        assert np.allclose(back.as_tuple(), target.as_tuple(), atol=1e-6, rtol=0)


def test_delta_errors_and_clipping():
    flat = BBox(x0=0, y0=0, x1=0, y1=10)
    with pytest.raises(NonPositiveAnchor):
        encode_delta(flat, BBox(x0=0, y0=0, x1=5, y1=5))
    with pytest.raises(NonPositiveAnchor):
        encode_delta(BBox(x0=0, y0=0, x1=5, y1=5), flat)
    with pytest.raises(NonPositiveAnchor):
        decode_delta(flat, BoxDelta(dx=0, dy=0, dw=0, dh=0))
    box = decode_delta(BBox(x0=90, y0=90, x1=110, y1=110), BoxDelta(dx=0, dy=0, dw=0, dh=0), clip_to=(100, 100))
    assert box.as_tuple() == (90, 90, 100, 100)


def test_nms_examples():
    a, b = scored((0, 0, 10, 10), 0.9), scored((1, 1, 11, 11), 0.8)
    assert nms([a, b], 0.5) == [a]
    far = scored((50, 50, 60, 60), 0.3)
    assert nms([far, a], 0.5) == [a, far]
    same = [scored((0, 0, 10, 10), 0.7) for _ in range(2000)]
    assert nms_select(same, 0.5, cap=1000) == [0]
    assert nms([], 0.5) == []


def test_nms_matches_oracle(rng):
    for _ in range(500):
        n = int(rng.integers(0, 51))
        xy = rng.uniform(0, 100, (n, 2))
        wh = rng.uniform(1, 40, (n, 2))
        coords = np.hstack([xy, xy + wh]).tolist()
        scores = np.round(rng.uniform(0, 1, n), 2).tolist()
        threshold = float(rng.uniform(0.1, 0.9))
        cap = int(rng.integers(1, 60))
        boxes = [scored(c, s) for c, s in zip(coords, scores)]
        kept = nms_select(boxes, threshold, cap, class_wise=False)
        assert kept == nms_oracle(coords, scores, threshold, cap)
        for i in kept:
            for j in kept:
                if i != j:
                    assert iou_oracle(coords[i], coords[j]) <= threshold


def test_nms_is_class_wise_by_default():
    boxes = [scored((0, 0, 10, 10), 0.9, 0), scored((0, 0, 10, 10), 0.8, 1)]
    assert nms_select(boxes, 0.5) == [0, 1]
    assert nms_select(boxes, 0.5, class_wise=False) == [0]


def test_roi_count_formula():
    assert roi_count(10) == 100
    assert roi_count(100) == 150
    assert roi_count(50) == 100


def test_select_rois_keeps_best_by_score(rng):
    candidates = [scored((0, 0, 1, 1), float(s)) for s in rng.uniform(0, 1, 300)]
    best = select_rois(candidates, 100)
    assert len(best) == 150
    assert [c.score for c in best] == sorted((c.score for c in candidates), reverse=True)[:150]
    assert len(select_rois(candidates[:40], 10)) == 40
    sizes = [len(select_rois(candidates, n)) for n in range(0, 400, 25)]
    assert sizes == sorted(sizes)


def test_filter_by_score():
    assert filter_by_score([detection(0.49)]) == []
    assert len(filter_by_score([detection(0.5)])) == 1
    batch = [detection(0.2), detection(0.5), detection(0.9)]
    assert [d.score for d in filter_by_score(batch)] == [0.5, 0.9]
    split = Detection(page_id="p", det_id="s", class_probs={"a": 0.45, "b": 0.45},
                      box=BBox(x0=0, y0=0, x1=1, y1=1))
    assert filter_by_score([split]) == []


def test_combine_losses():
    assert combine_losses(1, 2, 3, 4) == 10
    assert combine_losses(0, 0, 0, 0) == 0
    assert combine_losses(1, 5, 1, 1, lambda_rpn=2, lambda_r=0) == 4
    with pytest.raises(ValueError):
        combine_losses(-1, 0, 0, 0)


def test_loss_components():
    assert cross_entropy([[0.25] * 4], [2]) == pytest.approx(math.log(4))
    assert cross_entropy([[1.0, 0.0], [0.0, 1.0]], [0, 1]) == pytest.approx(0.0)
    assert smooth_l1([[0.5, 0, 0, 0]], [[0, 0, 0, 0]]) == pytest.approx(0.125)
    assert smooth_l1([[2.0, 0, 0, 0]], [[0, 0, 0, 0]]) == pytest.approx(1.5)
    assert binary_cross_entropy([0.5, 0.5], [1, 0]) == pytest.approx(math.log(2))
    total = combine_losses(cross_entropy([[0.5, 0.5]], [0]), 0.0, smooth_l1([[2.0, 0, 0, 0]], [[0, 0, 0, 0]]), 0.0)
    assert total == pytest.approx(math.log(2) + 1.5)


def test_rle_encoding():
    mask = BitMask(bits=np.array([[0, 1, 1], [1, 0, 0]], dtype=bool))
    assert encode_rle(mask) == "3x2:0 1 3 2"
    assert decode_rle("2x2:1 4") == BitMask(bits=np.ones((2, 2), dtype=bool))
    with pytest.raises(ValueError):
        decode_rle("2x2:0 3")


def test_detections_file_preserves_records(tmp_path):
    header = PageHeader(page_id="p1", width=4, height=3, image_filename="p1.png")
    mask = BitMask(bits=np.array([[0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0]], dtype=bool))
    dets = [
        Detection(page_id="p1", det_id="x", class_probs={"paragraph": 0.8, "heading": 0.15},
                  box=BBox(x0=0.5, y0=0, x1=3.25, y1=2), polygon=Polygon.from_box(0.5, 0, 3.25, 2)),
        Detection(page_id="p1", det_id="y", class_probs={"text-line": 0.9},
                  box=BBox(x0=1, y0=0, x1=3, y1=2), mask=mask),
    ]
    path = write_detections(tmp_path / "dets.tsv", [header], dets)
    headers, pages = read_detections(path)
    assert headers == {"p1": header}
    first, second = pages["p1"]
    assert (first.det_id, second.det_id) == ("p1:0", "p1:1")
    assert first.class_probs == {"heading": 0.15, "paragraph": 0.8}
    assert first.polygon == dets[0].polygon and first.box == dets[0].box
    assert second.mask == mask and second.polygon is None
    assert second.class_label == "text-line" and second.score == 0.9


def test_detections_grammar():
    text = ("# produced by a detector\n\n"
            "@page\tp1\t100\t50\tp1.png\n"
            "p1\tparagraph\t0.75\t0 0 10 10\n"
            "p1\tmarginalia\t0.6\t20 0 30 10\t20,0 30,0 30,10\n")
    headers, pages = parse_detections(text)
    assert (headers["p1"].width, headers["p1"].height) == (100, 50)
    assert [d.class_label for d in pages["p1"]] == ["paragraph", "marginalia"]
    assert pages["p1"][1].polygon.vertices == ((20, 0), (30, 0), (30, 10))
    assert format_detections(headers.values(), pages["p1"]).splitlines()[1] == "p1\tparagraph\t0.75\t0 0 10 10"


def test_detections_format_errors():
    with pytest.raises(DetectionFormatError) as info:
        parse_detections("p9\tparagraph\t0.5\t0 0 1 1\n")
    assert info.value.line_number == 1
    with pytest.raises(DetectionFormatError) as info:
        parse_detections("@page\tp1\t10\t10\n\np1\tparagraph\t0.5\t0 0 1\n")
    assert info.value.line_number == 3
    with pytest.raises(DetectionFormatError):
        parse_detections("@page\tp1\t10\t10\np1\tparagraph\t1.5\t0 0 1 1\n")
    with pytest.raises(DetectionFormatError):
        parse_detections("@page\tp1\t4\t4\np1\tparagraph\t0.5\t0 0 1 1\t\t2x2:1 4\n")


@pytest.mark.parametrize("record", [
    "p1\tparagraph\t0.9\t0 0 1 1\t\t\tmarginalia=0.8",
    "p1\tparagraph\t0.5\t0 0 1 1\t\t\tparagraph=0.8,heading=0.1",
    "p1\theading\t0.8\t0 0 1 1\t\t\tparagraph=0.8,heading=0.1",
])
def test_probs_must_agree_with_label_and_score(record):
    with pytest.raises(DetectionFormatError) as info:
        parse_detections("@page\tp1\t10\t10\n" + record + "\n")
    assert info.value.line_number == 2


def test_consistent_probs_are_read():
    _, pages = parse_detections("@page\tp1\t10\t10\n"
                                "p1\tparagraph\t0.8\t0 0 1 1\t\t\theading=0.1,paragraph=0.8\n"
                                "p1\theading\t0.45\t0 0 1 1\t\t\theading=0.45,paragraph=0.45\n")
    first, tied = pages["p1"]
    assert first.class_probs == {"heading": 0.1, "paragraph": 0.8}
    assert (first.class_label, first.score) == ("paragraph", 0.8)
    assert tied.class_label == "heading" and tied.score == 0.45
