import numpy as np
import pytest
from lxml import etree

from conftest import dataset_dir, make_line, make_region
from dla_toolkit.baselines.lines import LineGeometryConfig
from dla_toolkit.errors import MalformedXml, UnsupportedSchema
from dla_toolkit.page.models import Baseline, Page, Polygon, Region, TextLine
from dla_toolkit.page.pagexml import (
    PAGE_NS, ORPHAN_MARKER, ParseIssue, list_page_files, parse_page_xml, read_page_file, write_page_xml,
)
from dla_toolkit.page.stats import (
    DATASET_CLASSES, ClassStats, corpus_stats, max_objects_per_page, merge_stats, split_stats,
)
from dla_toolkit.pipeline.synth import SynthSpec, generate_synthetic_page


def _page_doc(body: str, namespace: str = PAGE_NS) -> bytes:
    ns = f' xmlns="{namespace}"' if namespace else ""
    return (f'<PcGts{ns}><Page imageFilename="x.png" imageWidth="100" imageHeight="100">'
            f"{body}</Page></PcGts>").encode()


def test_parse_minimal_page(minimal_page_xml):
    page = parse_page_xml(minimal_page_xml)
    assert page.dims == (300, 200)
    assert len(page.regions) == 1
    region = page.regions[0]
    assert region.class_label == "paragraph"
    assert len(region.lines) == 1
    assert region.lines[0].baseline.points == ((0.0, 100.0), (200.0, 100.0))


def test_region_without_coords_is_skipped():
    issues = []
    page = parse_page_xml(_page_doc('<TextRegion id="r1" type="paragraph"/>'), issues)
    assert page.regions == ()
    assert [issue.kind for issue in issues] == ["MissingCoords"]
    assert issues[0].element_id == "r1"


def test_missing_baseline_is_reported():
    issues = []
    doc = _page_doc('<TextRegion id="r1"><Coords points="0,0 50,0 50,50 0,50"/>'
                    '<TextLine id="l1"><Coords points="1,1 40,1 40,20 1,20"/></TextLine></TextRegion>')
    page = parse_page_xml(doc, issues)
    assert page.regions[0].lines[0].baseline is None
    assert ParseIssue(kind="MissingBaseline", element_id="l1", message=issues[0].message) in issues


def test_out_of_bounds_coordinates_are_kept():
    issues = []
    page = parse_page_xml(_page_doc('<TextRegion id="r1"><Coords points="-5,0 120,0 120,50 -5,50"/></TextRegion>'),
                          issues)
    assert page.regions[0].polygon.bounds == (-5.0, 0.0, 120.0, 50.0)
    assert [issue.kind for issue in issues] == ["OutOfBounds"]


def test_legacy_point_children():
    doc = _page_doc('<TextRegion id="r1"><Coords><Point x="0" y="0"/><Point x="10" y="0"/>'
                    '<Point x="10" y="10"/></Coords></TextRegion>')
    assert parse_page_xml(doc).regions[0].polygon.vertices == ((0.0, 0.0), (10.0, 0.0), (10.0, 10.0))


def test_class_label_resolution():
    doc = _page_doc(
        '<TextRegion id="a" type="heading"><Coords points="0,0 5,0 5,5"/></TextRegion>'
        '<TextRegion id="b" custom="readingOrder {index:1;} structure {type:par;}"><Coords points="0,0 5,0 5,5"/></TextRegion>'
        '<GraphicRegion id="c"><Coords points="0,0 5,0 5,5"/></GraphicRegion>'
    )
    assert [r.class_label for r in parse_page_xml(doc).regions] == ["heading", "par", "unknown"]


def test_schema_errors():
    with pytest.raises(MalformedXml):
        parse_page_xml(b"<PcGts><Page")
    with pytest.raises(UnsupportedSchema):
        parse_page_xml(_page_doc("", namespace=""))
    with pytest.raises(UnsupportedSchema):
        parse_page_xml(_page_doc("", namespace="http://example.org/alto"))
    with pytest.raises(MalformedXml):
        parse_page_xml(f'<PcGts xmlns="{PAGE_NS}"><Metadata/></PcGts>'.encode())


LINE = '<TextLine id="l1"{custom}><Coords points="0,0 5,0 5,5"/><Baseline points="0,5 5,5"/></TextLine>'


@pytest.mark.parametrize("body", [
    '<TextRegion id="r1"><Coords points="10,abc 5,0 5,5"/></TextRegion>',
    '<TextRegion id="r1"><Coords points="10 5,0 5,5"/></TextRegion>',
    '<TextRegion id="r1"><Coords><Point x="1" y="one"/><Point x="5" y="0"/><Point x="5" y="5"/></Coords></TextRegion>',
    '<TextRegion id="r1" custom="score {value:1.5;}"><Coords points="0,0 5,0 5,5"/></TextRegion>',
    '<TextRegion id="r1"><Coords points="0,0 5,0 5,5"/>' + LINE.format(custom=' custom="score {value:2;}"')
    + "</TextRegion>",
    '<TextRegion id="r1"><Coords points="0,0 5,0 5,5"/>' + LINE.format(custom=' custom="score {value:1e;}"')
    + "</TextRegion>",
    '<ReadingOrder><OrderedGroup id="g"><RegionRefIndexed index="x" regionRef="r1"/></OrderedGroup></ReadingOrder>',
])
def test_bad_values_raise_malformed_xml(body):
    with pytest.raises(MalformedXml):
        parse_page_xml(_page_doc(body))


def test_valid_scores_are_read():
    body = ('<TextRegion id="r1" custom="score {value:0.25;}"><Coords points="0,0 50,0 50,50"/>'
            + LINE.format(custom=' custom="score {value:1;}"') + "</TextRegion>")
    region = parse_page_xml(_page_doc(body)).regions[0]
    assert (region.score, region.lines[0].score) == (0.25, 1.0)


def test_foreign_schema_version_is_parsed_with_issue():
    issues = []
    other = "http://schema.primaresearch.org/PAGE/gts/pagecontent/2019-07-15"
    page = parse_page_xml(_page_doc('<TextRegion id="r1"><Coords points="0,0 5,0 5,5"/></TextRegion>', other),
                          issues)
    assert len(page.regions) == 1
    assert [issue.kind for issue in issues] == ["SchemaVersion"]


def test_duplicate_line_ids_are_rejected():
    line = '<TextLine id="dup"><Coords points="1,1 4,1 4,4"/><Baseline points="1,4 4,4"/></TextLine>'
    doc = _page_doc(f'<TextRegion id="r1"><Coords points="0,0 50,0 50,50"/>{line}{line}</TextRegion>')
    with pytest.raises(MalformedXml):
        parse_page_xml(doc)


def test_missing_line_coords_generated_from_baseline():
    doc = _page_doc('<TextRegion id="r1"><Coords points="0,0 99,0 99,99 0,99"/>'
                    '<TextLine id="l1"><Baseline points="10,50 90,50"/></TextLine></TextRegion>')
    issues = []
    assert parse_page_xml(doc, issues).regions[0].lines == ()
    assert "MissingCoords" in [issue.kind for issue in issues]

    page = parse_page_xml(doc, line_geometry=LineGeometryConfig())
    assert page.regions[0].lines[0].polygon.bounds == (10.0, 34.0, 90.0, 54.0)


def test_reading_order_is_kept():
    doc = _page_doc(
        '<ReadingOrder><OrderedGroup id="g"><RegionRefIndexed index="1" regionRef="a"/>'
        '<RegionRefIndexed index="0" regionRef="b"/></OrderedGroup></ReadingOrder>'
        '<TextRegion id="a"><Coords points="0,0 5,0 5,5"/></TextRegion>'
        '<TextRegion id="b"><Coords points="0,0 5,0 5,5"/></TextRegion>'
    )
    page = parse_page_xml(doc)
    assert page.reading_order == ("b", "a")
    assert parse_page_xml(write_page_xml(page)).reading_order == ("b", "a")


def test_round_trip_minimal_page(minimal_page_xml):
    page = parse_page_xml(minimal_page_xml)
    assert parse_page_xml(write_page_xml(page)) == page


def test_write_clamps_to_image():
    page = Page(image_filename="c.png", width=50, height=50, regions=(
        Region(id="r1", polygon=Polygon(vertices=((-3.2, 10), (60.7, 10), (20, 49.6)))),
    ))
    coords = etree.fromstring(write_page_xml(page)).find(f".//{{{PAGE_NS}}}Coords")
    assert coords.get("points") == "0,10 50,10 20,50"


def test_write_emits_every_region_and_line():
    page = Page(image_filename="w.png", width=400, height=400, regions=(
        make_region("a", "paragraph", (10, 10, 300, 150), n_lines=3),
        make_region("b", "marginalia", (10, 200, 300, 300), n_lines=2),
    ))
    root = etree.fromstring(write_page_xml(page))
    assert len(root.findall(f".//{{{PAGE_NS}}}TextRegion")) == 2
    assert len(root.findall(f".//{{{PAGE_NS}}}TextLine")) == 5


def test_non_enum_label_and_score_survive_round_trip():
    page = Page(image_filename="s.png", width=100, height=100, regions=(
        Region(id="r1", class_label="staff", polygon=Polygon.from_box(0, 0, 50, 50), score=0.75),
    ))
    xml = write_page_xml(page)
    assert b'type="staff"' not in xml
    region = parse_page_xml(xml).regions[0]
    assert (region.class_label, region.score) == ("staff", 0.75)


def test_orphan_lines_round_trip():
    page = Page(image_filename="o.png", width=300, height=300,
                regions=(make_region("r1", "paragraph", (0, 0, 100, 100), n_lines=1),),
                orphan_lines=(make_line("o1", 150, 250, 200), make_line("o2", 150, 250, 260)))
    xml = write_page_xml(page)
    assert ORPHAN_MARKER.encode() in xml
    again = parse_page_xml(xml)
    assert [line.id for line in again.orphan_lines] == ["o1", "o2"]
    assert [r.id for r in again.regions] == ["r1"]
    assert again == page


def test_round_trip_synthetic_pages_within_half_pixel():
    for seed in range(5):
        page, _ = generate_synthetic_page(seed, SynthSpec(n_regions=3, lines_per_region=2))
        again = parse_page_xml(write_page_xml(page))
        assert [r.id for r in again.regions] == [r.id for r in page.regions]
        assert [r.class_label for r in again.regions] == [r.class_label for r in page.regions]
        assert [l.id for l in again.iter_lines()] == [l.id for l in page.iter_lines()]
        for before, after in zip(page.iter_lines(), again.iter_lines()):
            assert np.abs(before.polygon.as_array() - after.polygon.as_array()).max() <= 0.5
            assert np.abs(before.baseline.as_array() - after.baseline.as_array()).max() <= 0.5


def test_written_page_is_deterministic(tmp_path):
    page, _ = generate_synthetic_page(3)
    assert write_page_xml(page) == write_page_xml(page)


def test_list_page_files_sorted(tmp_path, minimal_page_xml):
    for name in ("b.xml", "a.xml", "notes.txt"):
        (tmp_path / name).write_bytes(minimal_page_xml)
    assert [p.name for p in list_page_files(tmp_path)] == ["a.xml", "b.xml"]
    assert read_page_file(tmp_path / "a.xml").image_filename == "minimal.png"


def test_corpus_stats_on_fixture(two_class_pages):
    stats = corpus_stats(two_class_pages)
    assert stats == {
        "marginalia": ClassStats(region_count=2, line_count=2),
        "paragraph": ClassStats(region_count=2, line_count=6),
    }
    assert corpus_stats([]) == {}


def test_corpus_stats_is_additive(two_class_pages):
    extra, _ = generate_synthetic_page(11)
    a, b = two_class_pages, [extra]
    assert corpus_stats(a + b) == merge_stats(corpus_stats(a), corpus_stats(b))


def test_line_conservation(two_class_pages):
    page = two_class_pages[0].model_copy(update={"orphan_lines": (make_line("o1", 10, 90, 200),)})
    counted = sum(s.line_count for s in corpus_stats([page]).values()) + len(page.orphan_lines)
    assert counted == page.line_count == 5


def test_split_stats_table(two_class_pages):
    image_only = Page(image_filename="i.png", width=100, height=100,
                      regions=(Region(id="g", class_label="graphic", polygon=Polygon.from_box(0, 0, 9, 9)),))
    frame = split_stats({"Train": two_class_pages, "Test": [image_only]}, class_order=("paragraph",))
    assert list(frame.index) == ["paragraph", "graphic", "marginalia"]
    assert frame.loc["paragraph", ("#Regions", "Train")] == 2
    assert frame.loc["paragraph", ("#Lines", "Total")] == 6
    assert frame.loc["graphic", ("#Regions", "Total")] == 1
    assert frame.loc["graphic", ("#Lines", "Test")] == "---"
    assert split_stats({}).empty


def test_single_split_has_no_total_column(two_class_pages):
    frame = split_stats({"train": two_class_pages})
    assert list(frame.columns) == [("#Regions", "train"), ("#Lines", "train")]
    row = " ".join(frame.to_string().splitlines()[-1].split())
    assert row == "paragraph 2 6"


def test_max_objects_per_page(two_class_pages):
    assert max_objects_per_page(two_class_pages) == 6
    assert max_objects_per_page([]) == 0


def _split_stats(name: str, split: str):
    pages = [read_page_file(p) for p in list_page_files(dataset_dir(name) / split)]
    return corpus_stats(pages)


def test_ohg_training_split():
    stats = _split_stats("ohg", "train")
    assert stats["par"] == ClassStats(region_count=422, line_count=7716)
    assert stats["not"] == ClassStats(region_count=18, line_count=112)


def test_bozen_training_split():
    stats = _split_stats("bozen", "train")
    assert set(stats) <= set(DATASET_CLASSES["bozen"])
    assert stats["paragraph"] == ClassStats(region_count=788, line_count=7118)


def test_vorau_training_split():
    stats = _split_stats("vorau", "train")
    assert stats["staff"].region_count == 1194
    assert stats["lyrics"].line_count == 1628
