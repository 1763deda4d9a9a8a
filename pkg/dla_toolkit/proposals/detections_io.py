"""
Line-delimited detections interchange file.

Grammar (fields separated by TAB; ``#`` comments and blank lines are ignored)::

    @page    <page_id>  <width>  <height>  [<image_filename>]
    <page_id>  <class_label>  <score>  <x0 y0 x1 y1>  [<polygon>]  [<rle>]  [<probs>]

``polygon`` is a PAGE point list ``x,y x,y ...``; ``rle`` is ``WxH:v n1 n2 ...``,
row-major run lengths starting with value ``v`` (0 or 1); ``probs`` is
``label=p,label=p`` and defaults to ``{class_label: score}``; when given, its
most probable class and probability must match ``class_label`` and ``score``.
Empty optional fields may be left blank or omitted when trailing. Every
record's page must be declared by an ``@page`` header before it.
"""

import math
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from dla_toolkit.errors import DetectionFormatError
from dla_toolkit.geometry.shapes import BBox, BitMask
from dla_toolkit.page.models import Polygon
from dla_toolkit.page.pagexml import parse_points
from dla_toolkit.pipeline.schemas import Detection, PageHeader

HEADER = "@page"


def encode_rle(mask: BitMask) -> str:
    flat = mask.bits.ravel().astype(np.int8)
    if flat.size == 0:
        return f"{mask.width}x{mask.height}:0"
    boundaries = np.flatnonzero(np.diff(flat)) + 1
    runs = np.diff(np.concatenate([[0], boundaries, [flat.size]]))
    return f"{mask.width}x{mask.height}:{int(flat[0])} " + " ".join(map(str, runs.tolist()))


def decode_rle(text: str) -> BitMask:
    dims, _, body = text.partition(":")
    width, _, height = dims.partition("x")
    width, height = int(width), int(height)
    values = body.split()
    start, runs = int(values[0]), np.array(values[1:], dtype=np.int64)
    if runs.sum() != width * height:
        raise ValueError(f"runs cover {runs.sum()} pixels, mask has {width * height}")
    run_values = (np.arange(len(runs)) + start) % 2
    return BitMask(bits=np.repeat(run_values.astype(bool), runs).reshape(height, width))


def _format_number(value: float) -> str:
    return f"{value:.6g}"


def _format_record(det: Detection) -> str:
    box = " ".join(_format_number(v) for v in det.box.as_tuple())
    polygon = " ".join(f"{_format_number(x)},{_format_number(y)}" for x, y in det.polygon.vertices) if det.polygon else ""
    rle = encode_rle(det.mask) if det.mask is not None else ""
    probs = ""
    if det.class_probs != {det.class_label: det.score}:
        probs = ",".join(f"{label}={_format_number(p)}" for label, p in sorted(det.class_probs.items()))
    fields = [det.page_id, det.class_label, _format_number(det.score), box, polygon, rle, probs]
    while fields and fields[-1] == "":
        fields.pop()
    return "\t".join(fields)


def format_detections(headers: Iterable[PageHeader], detections: Iterable[Detection]) -> str:
    lines = [f"{HEADER}\t{h.page_id}\t{h.width}\t{h.height}\t{h.image_filename}" for h in headers]
    lines += [_format_record(det) for det in detections]
    return "\n".join(lines) + "\n"


def write_detections(path, headers: Iterable[PageHeader], detections: Iterable[Detection]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_detections(headers, detections), encoding="utf-8")
    return path


def _parse_probs(text: str) -> Dict[str, float]:
    probs = {}
    for item in text.split(","):
        label, _, value = item.partition("=")
        probs[label.strip()] = float(value)
    return probs


def _class_probs(label: str, score: str, probs: str) -> Dict[str, float]:
    if not probs:
        return {label: float(score)}
    class_probs = _parse_probs(probs)
    best = max(class_probs.values())
    if label not in class_probs or not math.isclose(class_probs[label], best, rel_tol=1e-6, abs_tol=1e-9):
        raise ValueError(f"label {label!r} is not the most probable class in {probs!r}")
    if not math.isclose(float(score), best, rel_tol=1e-6, abs_tol=1e-9):
        raise ValueError(f"score {score} differs from the highest class probability {best:g}")
    return class_probs


def _parse_record(fields: Sequence[str], index: int, header: PageHeader) -> Detection:
    fields = list(fields) + [""] * (7 - len(fields))
    page_id, label, score, box, polygon, rle, probs = fields[:7]
    coords = [float(v) for v in box.split()]
    if len(coords) != 4:
        raise ValueError(f"box needs 4 numbers, got {len(coords)}")
    mask = decode_rle(rle) if rle else None
    if mask is not None and (mask.width, mask.height) != (header.width, header.height):
        raise ValueError(f"mask is {mask.width}x{mask.height}, page {header.width}x{header.height}")
    return Detection(
        page_id=page_id,
        det_id=f"{page_id}:{index}",
        class_probs=_class_probs(label, score, probs),
        box=BBox(x0=coords[0], y0=coords[1], x1=coords[2], y1=coords[3]),
        mask=mask,
        polygon=Polygon(vertices=parse_points(polygon)) if polygon else None,
    )


def parse_detections(text: str) -> Tuple[Dict[str, PageHeader], Dict[str, List[Detection]]]:
    """Page headers and per-page detections, in file order"""
    headers: Dict[str, PageHeader] = {}
    detections: Dict[str, List[Detection]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = raw.rstrip("\r\n").split("\t")
        try:
            if fields[0] == HEADER:
                header = PageHeader(page_id=fields[1], width=int(fields[2]), height=int(fields[3]),
                                    image_filename=fields[4] if len(fields) > 4 else "")
                headers[header.page_id] = header
                detections.setdefault(header.page_id, [])
                continue
            if fields[0] not in headers:
                raise DetectionFormatError(f"page {fields[0]!r} used before its {HEADER} header", number)
            page_detections = detections[fields[0]]
            page_detections.append(_parse_record(fields, len(page_detections), headers[fields[0]]))
        except (ValueError, IndexError, ValidationError) as e:
            raise DetectionFormatError(str(e), number) from e
    return headers, detections


def read_detections(path) -> Tuple[Dict[str, PageHeader], Dict[str, List[Detection]]]:
    return parse_detections(Path(path).read_text(encoding="utf-8"))
