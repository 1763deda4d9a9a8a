"""
PAGE-XML reader and writer.

Reads any revision sharing the 2013-07-15 element vocabulary. Region class labels
come from the ``type`` attribute, then from ``custom="structure {type:...;}"``,
else ``unknown``. Text lines that belong to no region are written into a marker
TextRegion (``custom="orphan-lines"``) and read back as orphan lines.
"""

import logging
import math
import re
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

from lxml import etree
from pydantic import BaseModel, ValidationError

from dla_toolkit.errors import DegenerateBaseline, MalformedXml, UnsupportedSchema
from dla_toolkit.log import log_event
from dla_toolkit.page.models import Baseline, Page, Point, Polygon, Region, TextLine

logger = logging.getLogger(__name__)

PAGE_NS = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2013-07-15"
PAGE_NS_PREFIX = "http://schema.primaresearch.org/PAGE/gts/pagecontent/"
XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"
SCHEMA_LOCATION = f"{PAGE_NS} {PAGE_NS}/pagecontent.xsd"

ORPHAN_MARKER = "orphan-lines"
ORPHAN_REGION_ID = "orphan_lines"
DEFAULT_TIMESTAMP = "1970-01-01T00:00:00"

# TextRegion/@type values of the 2013 schema; anything else goes to @custom
TEXT_REGION_TYPES = frozenset({
    "paragraph", "heading", "caption", "header", "footer", "page-number",
    "drop-capital", "credit", "floating", "signature-mark", "catch-word",
    "marginalia", "footnote", "footnote-continued", "endnote", "TOC-entry",
    "list-label", "other",
})

_STRUCTURE_TYPE = re.compile(r"structure\s*\{[^}]*?type:\s*([^;}]+)")
_SCORE_VALUE = re.compile(r"score\s*\{[^}]*?value:\s*([0-9.eE+-]+)")


class ParseIssue(BaseModel):
    """A non-fatal problem found while reading a PAGE document"""

    kind: str
    element_id: str = ""
    message: str = ""


def _local(tag) -> str:
    return etree.QName(tag).localname if isinstance(tag, str) else ""


def _child(element, name: str):
    for child in element:
        if _local(child.tag) == name:
            return child
    return None


def _children(element, name: str):
    return [child for child in element if _local(child.tag) == name]


def parse_points(text: str) -> Tuple[Point, ...]:
    """Parse a PAGE point list ``"x,y x,y ..."``"""
    points = []
    for pair in text.split():
        x, _, y = pair.partition(",")
        try:
            points.append((float(x), float(y)))
        except ValueError:
            raise MalformedXml(f"bad point {pair!r} in point list") from None
    return tuple(points)


def _element_points(element) -> Optional[Tuple[Point, ...]]:
    """Points of a Coords/Baseline element, from @points or legacy Point children"""
    if element is None:
        return None
    if element.get("points") is not None:
        return parse_points(element.get("points"))
    legacy = _children(element, "Point")
    if legacy:
        try:
            return tuple((float(p.get("x")), float(p.get("y"))) for p in legacy)
        except (TypeError, ValueError):
            raise MalformedXml("Point element needs numeric x and y attributes") from None
    return ()


def resolve_class_label(element) -> str:
    label = element.get("type")
    if label:
        return label
    match = _STRUCTURE_TYPE.search(element.get("custom", ""))
    if match:
        return match.group(1).strip()
    return "unknown"


def _score(element) -> float:
    match = _SCORE_VALUE.search(element.get("custom", ""))
    if not match:
        return 1.0
    try:
        score = float(match.group(1))
    except ValueError:
        score = math.nan
    if not 0.0 <= score <= 1.0:
        raise MalformedXml(f"{element.get('id', '')}: score {match.group(1)!r} is not in [0, 1]")
    return score


class _Reader:
    def __init__(self, width: int, height: int, issues: List[ParseIssue], line_geometry=None):
        self.width = width
        self.height = height
        self.issues = issues
        self.line_geometry = line_geometry

    def issue(self, kind: str, element_id: str, message: str) -> None:
        self.issues.append(ParseIssue(kind=kind, element_id=element_id, message=message))
        log_event(logger, "page_issue", logging.WARNING, kind=kind, element=element_id, detail=message)

    def _check_bounds(self, points: Sequence[Point], element_id: str) -> None:
        if any(x < 0 or y < 0 or x > self.width or y > self.height for x, y in points):
            self.issue("OutOfBounds", element_id, "coordinates exceed image bounds (kept as read)")

    def polygon(self, element, element_id: str) -> Optional[Polygon]:
        points = _element_points(_child(element, "Coords"))
        if points is None:
            self.issue("MissingCoords", element_id, "element has no Coords; skipped")
            return None
        try:
            polygon = Polygon(vertices=points)
        except ValidationError:
            self.issue("MissingCoords", element_id, f"Coords has {len(points)} points; skipped")
            return None
        self._check_bounds(points, element_id)
        return polygon

    def line(self, element) -> Optional[TextLine]:
        line_id = element.get("id", "")
        baseline = None
        points = _element_points(_child(element, "Baseline"))
        if points:
            baseline = Baseline(points=points)
        else:
            self.issue("MissingBaseline", line_id, "text line has an empty or missing Baseline")

        polygon = None
        if _child(element, "Coords") is None and baseline is not None and self.line_geometry is not None:
            from dla_toolkit.baselines.lines import baseline_to_polygon

            try:
                polygon = baseline_to_polygon(baseline, self.line_geometry)
            except DegenerateBaseline:
                pass
        if polygon is None:
            polygon = self.polygon(element, line_id)
        if polygon is None:
            return None
        return TextLine(id=line_id, polygon=polygon, baseline=baseline, score=_score(element))

    def region(self, element) -> Tuple[Optional[Region], List[TextLine]]:
        region_id = element.get("id", "")
        lines = [line for line in map(self.line, _children(element, "TextLine")) if line is not None]
        if ORPHAN_MARKER in element.get("custom", ""):
            return None, lines
        polygon = self.polygon(element, region_id)
        if polygon is None:
            return None, []
        region = Region(
            id=region_id,
            class_label=resolve_class_label(element),
            polygon=polygon,
            lines=tuple(lines),
            score=_score(element),
        )
        return region, []


def _reading_order(page_element) -> Tuple[str, ...]:
    order = _child(page_element, "ReadingOrder")
    if order is None:
        return ()
    refs = []
    for element in order.iter():
        if _local(element.tag) in ("RegionRefIndexed", "RegionRef") and element.get("regionRef"):
            try:
                index = int(element.get("index", len(refs)))
            except ValueError:
                raise MalformedXml(f"reading order index {element.get('index')!r} is not an integer") from None
            refs.append((index, element.get("regionRef")))
    return tuple(ref for _, ref in sorted(refs, key=lambda item: item[0]))


def parse_page_xml(data: bytes, issues: Optional[List[ParseIssue]] = None, line_geometry=None) -> Page:
    """Read a PAGE-XML document into a Page.

    Non-fatal problems are appended to ``issues`` when given and always logged.
    ``line_geometry`` (a LineGeometryConfig) enables generating missing text-line
    polygons from their baselines.
    """
    issues = issues if issues is not None else []
    try:
        root = etree.fromstring(data)
    except etree.XMLSyntaxError as e:
        raise MalformedXml(f"not parseable as XML: {e}") from e

    namespace = etree.QName(root).namespace
    if not namespace or not namespace.startswith(PAGE_NS_PREFIX):
        raise UnsupportedSchema(f"root element namespace {namespace!r} is not a PAGE namespace")
    if namespace != PAGE_NS:
        issues.append(ParseIssue(kind="SchemaVersion", message=f"namespace {namespace} parsed best-effort"))
        log_event(logger, "page_issue", logging.WARNING, kind="SchemaVersion", namespace=namespace)

    page_element = _child(root, "Page")
    if page_element is None:
        raise MalformedXml("document has no Page element")
    try:
        width = int(page_element.get("imageWidth"))
        height = int(page_element.get("imageHeight"))
    except (TypeError, ValueError) as e:
        raise MalformedXml("Page element lacks integer imageWidth/imageHeight") from e

    reader = _Reader(width, height, issues, line_geometry)
    regions, orphans = [], []
    for element in page_element:
        if not _local(element.tag).endswith("Region"):
            continue
        try:
            region, loose_lines = reader.region(element)
        except ValidationError as e:
            raise MalformedXml(f"region {element.get('id', '')!r}: {e}") from e
        if region is not None:
            regions.append(region)
        orphans.extend(loose_lines)

    try:
        return Page(
            image_filename=page_element.get("imageFilename", ""),
            width=width,
            height=height,
            regions=tuple(regions),
            orphan_lines=tuple(orphans),
            reading_order=_reading_order(page_element),
        )
    except ValidationError as e:
        raise MalformedXml(f"page violates layout invariants: {e}") from e


def read_page_file(path, issues: Optional[List[ParseIssue]] = None, line_geometry=None) -> Page:
    return parse_page_xml(Path(path).read_bytes(), issues, line_geometry)


def list_page_files(directory) -> List[Path]:
    return sorted(Path(directory).glob("*.xml"))


def _round_clamp(value: float, upper: int) -> int:
    return int(min(max(math.floor(value + 0.5), 0), upper))


def format_points(points: Iterable[Point], width: int, height: int) -> str:
    return " ".join(f"{_round_clamp(x, width)},{_round_clamp(y, height)}" for x, y in points)


def _custom(label: Optional[str], score: float) -> str:
    parts = []
    if label is not None:
        parts.append(f"structure {{type:{label};}}")
    if score != 1.0:
        parts.append(f"score {{value:{score:.6g};}}")
    return " ".join(parts)


def _sub(parent, name: str, **attrs):
    return etree.SubElement(parent, f"{{{PAGE_NS}}}{name}", **attrs)


def _write_line(parent, line: TextLine, width: int, height: int) -> None:
    element = _sub(parent, "TextLine", id=line.id)
    custom = _custom(None, line.score)
    if custom:
        element.set("custom", custom)
    _sub(element, "Coords", points=format_points(line.polygon.vertices, width, height))
    if line.baseline is not None and line.baseline.points:
        _sub(element, "Baseline", points=format_points(line.baseline.points, width, height))


def write_page_xml(page: Page, creator: str = "dla_toolkit", timestamp: str = DEFAULT_TIMESTAMP) -> bytes:
    """Serialize a Page as PAGE 2013-07-15 XML (integer coordinates clamped to the image)"""
    root = etree.Element(f"{{{PAGE_NS}}}PcGts", nsmap={None: PAGE_NS, "xsi": XSI_NS})
    root.set(f"{{{XSI_NS}}}schemaLocation", SCHEMA_LOCATION)
    metadata = _sub(root, "Metadata")
    _sub(metadata, "Creator").text = creator
    _sub(metadata, "Created").text = timestamp
    _sub(metadata, "LastChange").text = timestamp

    page_element = _sub(
        root, "Page",
        imageFilename=page.image_filename,
        imageWidth=str(page.width),
        imageHeight=str(page.height),
    )
    if page.reading_order:
        group = _sub(_sub(page_element, "ReadingOrder"), "OrderedGroup", id="ro_main")
        for index, ref in enumerate(page.reading_order):
            _sub(group, "RegionRefIndexed", index=str(index), regionRef=ref)

    for region in page.regions:
        element = _sub(page_element, "TextRegion", id=region.id)
        if region.class_label in TEXT_REGION_TYPES:
            element.set("type", region.class_label)
            custom = _custom(None, region.score)
        else:
            label = None if region.class_label == "unknown" else region.class_label
            custom = _custom(label, region.score)
        if custom:
            element.set("custom", custom)
        _sub(element, "Coords", points=format_points(region.polygon.vertices, page.width, page.height))
        for line in region.lines:
            _write_line(element, line, page.width, page.height)

    if page.orphan_lines:
        element = _sub(page_element, "TextRegion", id=ORPHAN_REGION_ID, custom=ORPHAN_MARKER)
        bounds = [line.polygon.bounds for line in page.orphan_lines]
        box = Polygon.from_box(
            min(b[0] for b in bounds), min(b[1] for b in bounds),
            max(b[2] for b in bounds), max(b[3] for b in bounds),
        )
        _sub(element, "Coords", points=format_points(box.vertices, page.width, page.height))
        for line in page.orphan_lines:
            _write_line(element, line, page.width, page.height)

    return etree.tostring(root, xml_declaration=True, encoding="UTF-8", pretty_print=True)


def write_page_file(page: Page, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_page_xml(page))
    return path
