"""
Binary portable graymap (PGM, P5) dumps of masks and label maps for visual inspection.
"""

from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from dla_toolkit.geometry.shapes import BitMask, LabelMap


def to_gray(grid: Union[BitMask, LabelMap]) -> np.ndarray:
    if isinstance(grid, BitMask):
        return np.where(grid.bits, 255, 0).astype(np.uint8)
    step = 255 // max(grid.num_classes - 1, 1)
    return (grid.labels * step).astype(np.uint8)


def save_pgm(grid: Union[BitMask, LabelMap], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_gray(grid)).save(path, format="PPM")
    return path
