"""The six settlement indices: CA, NP, LPI, CLUMPY, AI, NLSI.

Composition metrics (CA, NP, LPI) come straight from a connected-component
labeling of the occupied class. Configuration metrics (CLUMPY, AI, NLSI) are
built on rook (shared-side) adjacency counts:

* adjacencies are counted single-count between cells inside the raster;
  sides on the raster boundary never count as adjacencies,
* class perimeter counts every occupied cell side not shared with another
  occupied cell, including raster-boundary sides,
* ``AI = 100 * e_like / max_e_like`` where ``max_e_like`` is the largest
  adjacency count achievable by packing ``n`` cells into a near-square block
  (with ``s = isqrt(n)`` and remainder ``r = n - s*s``: ``2s(s-1)`` plus
  ``2r-1`` if ``r <= s`` else ``2r-2``),
* ``CLUMPY`` compares the aggregation ratio ``G = e_like / max_e_like``
  with the class proportion ``P``: ``(G-P)/(1-P)`` when ``G >= P`` or
  ``P >= 0.5``, else ``(G-P)/P``; clamped into [-1, 1],
* ``NLSI = (e - e_min) / (e_max - e_min)`` with ``e_min`` the perimeter of
  the near-square packing and ``e_max = 4n`` for class proportion <= 0.5,
  else ``3*A - 2n``; clamped into [0, 1].

Degenerate conventions, applied consistently here and in any reimplementation
meant to agree with this one: a single-cell class scores AI = 100,
CLUMPY = 1, NLSI = 0; a class covering the entire raster scores CLUMPY = 1;
NLSI is 0 whenever ``e_max <= e_min``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_binary_grid
from .errors import EmptyClassError
from .raster import SettlementRaster

HSI_COLUMNS = ("CA", "NP", "LPI", "CLUMPY", "AI", "NLSI")

_STRUCTURE_4 = ndimage.generate_binary_structure(2, 1)
_STRUCTURE_8 = ndimage.generate_binary_structure(2, 2)


@dataclass(frozen=True)
class PatchLabeling:
    """Connected components of the occupied class plus adjacency tallies.

    ``labels`` assigns 0 to background and 1..n_patches to occupied cells.
    ``like_adjacencies`` is the single-count number of occupied/occupied
    shared sides; ``total_urban_adjacencies`` counts every side of an
    occupied cell that faces another in-raster cell of any class.
    """

    labels: np.ndarray = field(repr=False)
    patch_sizes: np.ndarray
    like_adjacencies: int
    total_urban_adjacencies: int

    @property
    def n_patches(self) -> int:
        return len(self.patch_sizes)

    @property
    def urban_cell_count(self) -> int:
        return int(self.patch_sizes.sum()) if len(self.patch_sizes) else 0


def label_patches(raster: SettlementRaster | np.ndarray, connectivity: int = 8) -> PatchLabeling:
    """Label occupied patches under 4- or 8-neighbor connectivity.

    Adjacency tallies are always rook (shared sides), independent of the
    patch-neighbor rule.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    grid = raster.cells if isinstance(raster, SettlementRaster) else as_binary_grid(raster)
    structure = _STRUCTURE_8 if connectivity == 8 else _STRUCTURE_4
    labels, n_patches = ndimage.label(grid, structure=structure)
    if n_patches:
        sizes = np.bincount(labels.ravel())[1:]
    else:
        sizes = np.zeros(0, dtype=np.int64)

    occupied = grid.astype(bool)
    like = int(np.count_nonzero(occupied[:, 1:] & occupied[:, :-1])) + int(
        np.count_nonzero(occupied[1:, :] & occupied[:-1, :])
    )
    n = int(occupied.sum())
    boundary_sides = (
        int(occupied[0, :].sum())
        + int(occupied[-1, :].sum())
        + int(occupied[:, 0].sum())
        + int(occupied[:, -1].sum())
    )
    return PatchLabeling(
        labels=labels,
        patch_sizes=sizes.astype(np.int64),
        like_adjacencies=like,
        total_urban_adjacencies=4 * n - boundary_sides,
    )


def max_like_adjacencies(n: int) -> int:
    """Largest single-count like-adjacency total for ``n`` cells (near-square packing)."""
    if n <= 1:
        return 0
    s = math.isqrt(n)
    r = n - s * s
    base = 2 * s * (s - 1)
    if r == 0:
        return base
    if r <= s:
        return base + 2 * r - 1
    return base + 2 * r - 2


def min_class_perimeter(n: int) -> int:
    """Smallest perimeter (in cell sides) of any arrangement of ``n`` cells."""
    if n == 0:
        return 0
    s = math.isqrt(n)
    r = n - s * s
    if r == 0:
        return 4 * s
    if r <= s:
        return 4 * s + 2
    return 4 * s + 4


def compute_ca(labeling: PatchLabeling, cell_size: float) -> float:
    """Class area in hectares: occupied cells x cell area / 10 000."""
    if cell_size <= 0:
        raise ValueError(f"cell_size must be positive, got {cell_size}")
    return labeling.urban_cell_count * cell_size**2 / 10_000.0


def compute_lpi(labeling: PatchLabeling, raster: SettlementRaster) -> float:
    """Largest patch as a percentage of the landscape area."""
    if labeling.n_patches == 0:
        raise EmptyClassError("LPI is undefined for a raster with no occupied cells")
    return float(labeling.patch_sizes.max()) / (raster.width * raster.height) * 100.0


def compute_aggregation(labeling: PatchLabeling, raster: SettlementRaster) -> tuple[float, float, float]:
    """CLUMPY, AI and NLSI from the adjacency tallies.

    Returns
    -------
    (clumpy, ai, nlsi) : tuple of float
        CLUMPY in [-1, 1], AI in [0, 100], NLSI in [0, 1].
    """
    n = labeling.urban_cell_count
    if n == 0:
        raise EmptyClassError("aggregation metrics are undefined for an empty class")
    area = raster.width * raster.height
    e_like = labeling.like_adjacencies
    max_e_like = max_like_adjacencies(n)

    if max_e_like == 0:
        # single cell: maximally compact by convention
        return 1.0, 100.0, 0.0

    ratio = e_like / max_e_like
    ai = 100.0 * ratio

    proportion = n / area
    if proportion == 1.0:
        clumpy = 1.0
    elif ratio >= proportion or proportion >= 0.5:
        clumpy = (ratio - proportion) / (1.0 - proportion)
    else:
        clumpy = (ratio - proportion) / proportion
    clumpy = min(1.0, max(-1.0, clumpy))

    e = 4 * n - 2 * e_like
    e_min = min_class_perimeter(n)
    e_max = 4 * n if proportion <= 0.5 else 3 * area - 2 * n
    if e_max <= e_min:
        nlsi = 0.0
    else:
        nlsi = min(1.0, max(0.0, (e - e_min) / (e_max - e_min)))
    return clumpy, ai, nlsi


@dataclass(frozen=True)
class HsiVector:
    """The six settlement indices for one scene (CA in hectares, LPI/AI in percent)."""

    ca: float
    num_patches: int
    lpi: float
    clumpy: float
    ai: float
    nlsi: float

    def as_row(self) -> tuple[float, int, float, float, float, float]:
        """Values in the canonical CA,NP,LPI,CLUMPY,AI,NLSI column order."""
        return (self.ca, self.num_patches, self.lpi, self.clumpy, self.ai, self.nlsi)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_row(), dtype=np.float64)


def compute_hsi(raster: SettlementRaster, connectivity: int = 8) -> HsiVector:
    """All six indices for one raster.

    Raises
    ------
    EmptyClassError
        If the raster has no occupied cells.
    """
    labeling = label_patches(raster, connectivity=connectivity)
    if labeling.urban_cell_count == 0:
        raise EmptyClassError(f"{raster.origin_id}: no occupied cells")
    ca = compute_ca(labeling, raster.cell_size)
    lpi = compute_lpi(labeling, raster)
    clumpy, ai, nlsi = compute_aggregation(labeling, raster)
    return HsiVector(
        ca=ca, num_patches=labeling.n_patches, lpi=lpi, clumpy=clumpy, ai=ai, nlsi=nlsi
    )


class HsiExtractor(BaseEstimator, TransformerMixin):
    """Transformer mapping a sequence of rasters to an (n, 6) index matrix.

    Stateless; ``fit`` exists so the extractor can sit at the head of an
    sklearn pipeline.
    """

    def __init__(self, connectivity: int = 8):
        self.connectivity = connectivity

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        rows = [compute_hsi(raster, connectivity=self.connectivity).as_array() for raster in X]
        return np.vstack(rows) if rows else np.empty((0, len(HSI_COLUMNS)))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(HSI_COLUMNS, dtype=object)
