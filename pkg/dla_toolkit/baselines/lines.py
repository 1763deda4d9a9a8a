"""
Conversions between baselines and the polygons enclosing their text lines.

A text-line polygon is the baseline offset a fixed amount of pixels above and
below. The reverse direction extracts the bottom contour of the rasterized
polygon, drops the slanted end caps of sloped lines, smooths it with a moving median, lifts it by the lower offset and
simplifies it with Douglas-Peucker.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.ndimage import median_filter
from shapely.geometry import LineString

from dla_toolkit.errors import DegenerateBaseline, EmptyInput, EmptyMask
from dla_toolkit.geometry.raster import rasterize
from dla_toolkit.geometry.shapes import BitMask
from dla_toolkit.page.models import Baseline, Polygon

FALLBACK_INTERLINE = 60.0


class LineGeometryConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    offset_above: float = Field(default=16.0, gt=0)
    offset_below: float = Field(default=4.0, gt=0)
    resample_step: float = Field(default=5.0, gt=0)
    simplify_epsilon: float = Field(default=2.0, gt=0)

    @property
    def median_window(self) -> int:
        window = int(round(self.resample_step * 3))
        return window + 1 if window % 2 == 0 else window


def monotonize(points) -> np.ndarray:
    """Sort by x and merge points sharing an x into their mean y"""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    xs, inverse = np.unique(pts[:, 0], return_inverse=True)
    ys = np.bincount(inverse, weights=pts[:, 1]) / np.bincount(inverse)
    return np.column_stack([xs, ys])


def _distinct_points(baseline: Baseline) -> np.ndarray:
    pts = monotonize(baseline.points)
    if len(pts) < 2:
        raise DegenerateBaseline(f"baseline needs 2 distinct x positions, got {len(pts)}")
    return pts


def _unit(vectors: np.ndarray) -> np.ndarray:
    return vectors / np.linalg.norm(vectors, axis=-1, keepdims=True)


def baseline_to_polygon(baseline: Baseline, config: Optional[LineGeometryConfig] = None) -> Polygon:
    """Offset the baseline along its local normal; upper side forward, lower side backward"""
    config = config or LineGeometryConfig()
    pts = _distinct_points(baseline)
    seg = _unit(np.diff(pts, axis=0))
    tangents = np.vstack([seg[:1], seg[:-1] + seg[1:], seg[-1:]])
    tangents = _unit(tangents)
    # image y grows downwards, so "above" is (ty, -tx)
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])
    upper = pts + config.offset_above * normals
    lower = pts - config.offset_below * normals
    ring = np.vstack([upper, lower[::-1]])
    return Polygon(vertices=tuple(map(tuple, ring.tolist())))


def _odd_window(window: int, size: int) -> int:
    window = min(window, size if size % 2 == 1 else size - 1)
    return max(window, 1)


def _cap_length(bottoms: np.ndarray, limit: int) -> int:
    """Columns at the end of ``bottoms`` that lie on a slanted end cap.

    The cap is the run after the last maximum of the tail, when it climbs more
    than one pixel per column.
    """
    tail = bottoms[-limit:]
    if tail.size < 2:
        return 0
    after = int(np.argmax(tail[::-1]))
    if after and tail[-1 - after] - tail[-1] > after:
        return after
    return 0


def _trim_end_caps(bottoms: np.ndarray, config: LineGeometryConfig) -> Tuple[int, int]:
    # a line rotated by at most 45 degrees has caps this wide at most
    limit = int(math.ceil((config.offset_above + config.offset_below) * math.sqrt(0.5))) + 1
    stop = bottoms.size - _cap_length(bottoms, limit)
    start = _cap_length(bottoms[:stop][::-1], limit)
    return start, stop


def mask_to_baseline(mask: BitMask, config: Optional[LineGeometryConfig] = None) -> Baseline:
    config = config or LineGeometryConfig()
    occupied = mask.bits.any(axis=0)
    cols = np.flatnonzero(occupied)
    if cols.size == 0:
        raise EmptyMask("text-line mask has no set pixels")

    # bottom edge of the lowest set pixel in each occupied column
    flipped = mask.bits[::-1, cols]
    bottoms = (mask.height - np.argmax(flipped, axis=0)).astype(np.float64)
    start, stop = _trim_end_caps(bottoms, config)
    cols, bottoms = cols[start:stop], bottoms[start:stop]
    if cols.size == 1:
        y = bottoms[0] - config.offset_below
        return Baseline(points=((float(cols[0]), y), (float(cols[0] + 1), y)))

    xs = cols + 0.5
    xs[0], xs[-1] = cols[0], cols[-1] + 1
    window = _odd_window(config.median_window, cols.size)
    ys = median_filter(bottoms, size=window, mode="reflect") - config.offset_below

    simplified = LineString(np.column_stack([xs, ys])).simplify(config.simplify_epsilon, preserve_topology=False)
    return Baseline(points=tuple(map(tuple, np.asarray(simplified.coords).tolist())))


def polygon_to_baseline(polygon: Polygon, config: Optional[LineGeometryConfig] = None,
                        image_bounds: Optional[Tuple[int, int]] = None) -> Baseline:
    if image_bounds is None:
        _, _, x1, y1 = polygon.bounds
        image_bounds = (max(1, math.ceil(x1)), max(1, math.ceil(y1)))
    mask = rasterize(polygon, *image_bounds)
    return mask_to_baseline(mask, config)


def normalize_baseline(baseline: Baseline, step: float = 5.0) -> Baseline:
    """Resample at arc-length distances 0, step, 2·step, ... and the full length L"""
    if step <= 0:
        raise ValueError("step must be positive")
    pts = _distinct_points(baseline)
    cumulative = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    length = cumulative[-1]
    distances = np.arange(0.0, length, step)
    distances = distances[(distances == 0) | (distances < length - 1e-9)]
    xs = np.interp(distances, cumulative, pts[:, 0])
    ys = np.interp(distances, cumulative, pts[:, 1])
    resampled = np.vstack([np.column_stack([xs, ys]), pts[-1:]])
    resampled[0] = pts[0]
    return Baseline(points=tuple(map(tuple, resampled.tolist())))


def estimate_interline(baselines: Sequence[Baseline]) -> float:
    """Median distance from each baseline's mean y to the nearest other baseline's"""
    if not baselines:
        raise EmptyInput("no baselines to estimate the interline distance from")
    if len(baselines) == 1:
        return FALLBACK_INTERLINE
    means = np.array([b.mean_y for b in baselines])
    gaps = np.abs(means[:, None] - means[None, :])
    np.fill_diagonal(gaps, np.inf)
    return float(np.median(gaps.min(axis=1)))
