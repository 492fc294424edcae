import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from citymorph import SettlementRaster


def make_raster(cells, cell_size: float = 43.0, origin_id: str = "scene") -> SettlementRaster:
    arr = np.asarray(cells, dtype=np.uint8)
    return SettlementRaster(
        width=arr.shape[1],
        height=arr.shape[0],
        cell_size=cell_size,
        origin_id=origin_id,
        cells=arr,
    )


def grid_from_string(pattern: str) -> np.ndarray:
    rows = [line.strip() for line in pattern.strip().splitlines()]
    return np.array([[int(ch) for ch in row] for row in rows], dtype=np.uint8)


def random_raster(rng: np.random.Generator, height: int, width: int,
                  density: float = 0.5, cell_size: float = 43.0,
                  origin_id: str = "rand") -> SettlementRaster:
    cells = (rng.random((height, width)) < density).astype(np.uint8)
    return make_raster(cells, cell_size=cell_size, origin_id=origin_id)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
