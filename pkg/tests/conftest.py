import os
from pathlib import Path

import numpy as np
import pytest

from dla_toolkit.page.models import Baseline, Page, Polygon, Region, TextLine
from dla_toolkit.page.pagexml import PAGE_NS

MINIMAL_PAGE = f"""<?xml version="1.0" encoding="UTF-8"?>
<PcGts xmlns="{PAGE_NS}">
  <Metadata><Creator>test</Creator></Metadata>
  <Page imageFilename="minimal.png" imageWidth="300" imageHeight="200">
    <TextRegion id="r1" type="paragraph">
      <Coords points="0,80 210,80 210,110 0,110"/>
      <TextLine id="l1">
        <Coords points="0,84 200,84 200,104 0,104"/>
        <Baseline points="0,100 200,100"/>
      </TextLine>
    </TextRegion>
  </Page>
</PcGts>
""".encode("utf-8")


@pytest.fixture
def minimal_page_xml() -> bytes:
    return MINIMAL_PAGE


@pytest.fixture
def rng():
    return np.random.default_rng(20190801)


def make_line(line_id: str, x0: float, x1: float, y: float) -> TextLine:
    return TextLine(
        id=line_id,
        polygon=Polygon.from_box(x0, y - 16, x1, y + 4),
        baseline=Baseline(points=((x0, y), (x1, y))),
    )


def make_region(region_id: str, label: str, box, n_lines: int = 0) -> Region:
    x0, y0, x1, y1 = box
    lines = tuple(
        make_line(f"{region_id}_l{k}", x0 + 5, x1 - 5, y0 + 20 + 30 * k) for k in range(n_lines)
    )
    return Region(id=region_id, class_label=label, polygon=Polygon.from_box(*box), lines=lines)


@pytest.fixture
def two_class_pages():
    """Two pages, each with one 3-line paragraph and one 1-line marginalia"""
    pages = []
    for n in range(2):
        pages.append(Page(
            image_filename=f"fixture_{n}.png",
            width=400,
            height=300,
            regions=(
                make_region(f"p{n}_par", "paragraph", (20, 20, 300, 120), n_lines=3),
                make_region(f"p{n}_mar", "marginalia", (320, 20, 390, 60), n_lines=1),
            ),
        ))
    return pages


def dataset_dir(name: str) -> Path:
    """Root of a public dataset given through DLA_<NAME>_DIR, or skip"""
    value = os.environ.get(f"DLA_{name.upper()}_DIR")
    if not value:
        pytest.skip(f"DLA_{name.upper()}_DIR not set")
    return Path(value)
