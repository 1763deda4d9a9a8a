"""
Corpus statistics: region and text-line counts per class label.
"""

from collections import defaultdict
from typing import Dict, Iterable, Mapping, Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict

from dla_toolkit.page.models import Page

# Region classes of the three public datasets the toolkit targets
DATASET_CLASSES: Dict[str, tuple] = {
    "ohg": ("par", "pac", "tip", "pag", "nop", "not"),
    "bozen": ("page-number", "paragraph", "marginalia", "heading"),
    "vorau": ("drop-capital", "staff", "lyrics"),
}


class ClassStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    region_count: int = 0
    line_count: int = 0

    def __add__(self, other: "ClassStats") -> "ClassStats":
        return ClassStats(
            region_count=self.region_count + other.region_count,
            line_count=self.line_count + other.line_count,
        )


def corpus_stats(pages: Iterable[Page]) -> Dict[str, ClassStats]:
    """Region count and nested text-line count per class label, sorted by label"""
    regions: Dict[str, int] = defaultdict(int)
    lines: Dict[str, int] = defaultdict(int)
    for page in pages:
        for region in page.regions:
            regions[region.class_label] += 1
            lines[region.class_label] += len(region.lines)
    return {
        label: ClassStats(region_count=regions[label], line_count=lines[label])
        for label in sorted(regions)
    }


def merge_stats(*tables: Mapping[str, ClassStats]) -> Dict[str, ClassStats]:
    merged: Dict[str, ClassStats] = defaultdict(ClassStats)
    for table in tables:
        for label, stats in table.items():
            merged[label] = merged[label] + stats
    return dict(sorted(merged.items()))


def max_objects_per_page(pages: Iterable[Page]) -> int:
    """Largest number of regions plus text lines found on a single page"""
    return max((len(page.regions) + page.line_count for page in pages), default=0)


def split_stats(splits: Mapping[str, Sequence[Page]], class_order: Sequence[str] = ()) -> pd.DataFrame:
    """Dataset-characteristics table with one column per split, plus Total for several splits.

    Rows follow ``class_order`` first, then any remaining labels alphabetically.
    Classes that never hold a text line report their line counts as "---".
    """
    per_split = {name: corpus_stats(pages) for name, pages in splits.items()}
    total = merge_stats(*per_split.values())
    if len(per_split) > 1:
        per_split["Total"] = total
    labels = [label for label in class_order if label in total]
    labels += [label for label in total if label not in labels]
    if not labels:
        return pd.DataFrame()

    rows = []
    for label in labels:
        regions = [table.get(label, ClassStats()).region_count for table in per_split.values()]
        if total[label].line_count == 0:
            lines = ["---"] * len(per_split)
        else:
            lines = [table.get(label, ClassStats()).line_count for table in per_split.values()]
        rows.append(regions + lines)
    columns = pd.MultiIndex.from_tuples(
        [("#Regions", name) for name in per_split] + [("#Lines", name) for name in per_split])
    return pd.DataFrame(rows, index=pd.Index(labels, name="Name"), columns=columns)
