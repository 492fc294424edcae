"""Binary settlement rasters and corpus manifests.

The interchange format is the ESRI ASCII grid: a short textual header
(``ncols``, ``nrows``, ``xllcorner``, ``yllcorner``, ``cellsize``, optional
``NODATA_value``) followed by whitespace-separated cell values. Cells are
strictly binary (1 = occupied/urban, 0 = not); nodata cells are folded into
0 so that every scene keeps its full rectangular extent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridFormatError, ManifestError

_HEADER_KEYS = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"}


@dataclass(frozen=True)
class SettlementRaster:
    """A georeferenced binary occupancy grid.

    Parameters
    ----------
    width, height : int
        Grid dimensions in cells.
    cell_size : float
        Side length of one cell in meters.
    origin_id : str
        City or scene identifier.
    cells : numpy.ndarray
        ``(height, width)`` array of 0/1 values, row-major, first row on top.
    """

    width: int
    height: int
    cell_size: float
    origin_id: str
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"raster dimensions must be positive, got {self.width}x{self.height}")
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        cells = np.array(self.cells, dtype=np.uint8)  # copy: frozen below
        if cells.shape != (self.height, self.width):
            raise ValueError(
                f"cells shape {cells.shape} does not match {self.height}x{self.width}"
            )
        if not np.isin(cells, (0, 1)).all():
            raise ValueError("cell values must be exactly 0 or 1")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @property
    def occupied_count(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def extent_km2(self) -> float:
        """Scene area in square kilometers (all cells, occupied or not)."""
        return self.width * self.height * self.cell_size**2 / 1e6


def load_raster(path) -> SettlementRaster:
    """Load an ESRI ASCII grid as a binary settlement raster.

    Any ``NODATA_value`` cells map to 0. Values other than 0, 1 and the
    declared nodata sentinel are rejected with the offending row/column.
    The identifier is taken from the file stem.

    Raises
    ------
    GridFormatError
        On a malformed header, missing cells, or non-binary values.
    """
    path = Path(path)
    tokens = path.read_text().split()
    if not tokens:
        raise GridFormatError(f"{path}: empty grid file")

    header: dict[str, float] = {}
    pos = 0
    while pos + 1 < len(tokens) and tokens[pos].lower() in _HEADER_KEYS:
        key = tokens[pos].lower()
        try:
            header[key] = float(tokens[pos + 1])
        except ValueError:
            raise GridFormatError(f"{path}: header {tokens[pos]!r} has non-numeric value "
                                  f"{tokens[pos + 1]!r}") from None
        pos += 2

    for required in ("ncols", "nrows", "cellsize"):
        if required not in header:
            raise GridFormatError(f"{path}: missing required header line {required!r}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    cell_size = header["cellsize"]
    if ncols <= 0 or nrows <= 0:
        raise GridFormatError(f"{path}: non-positive grid dimensions {ncols}x{nrows}")
    if cell_size <= 0:
        raise GridFormatError(f"{path}: non-positive cellsize {cell_size}")
    nodata = header.get("nodata_value")

    body = tokens[pos:]
    expected = ncols * nrows
    if len(body) != expected:
        raise GridFormatError(
            f"{path}: expected {expected} cell values for {nrows}x{ncols}, found {len(body)}"
        )

    cells = np.empty((nrows, ncols), dtype=np.uint8)
    for i, tok in enumerate(body):
        row, col = divmod(i, ncols)
        try:
            value = float(tok)
        except ValueError:
            raise GridFormatError(
                f"{path}: unparseable cell value {tok!r} at row {row}, column {col}"
            ) from None
        if value == 0.0:
            cells[row, col] = 0
        elif value == 1.0:
            cells[row, col] = 1
        elif nodata is not None and value == nodata:
            cells[row, col] = 0
        else:
            raise GridFormatError(
                f"{path}: non-binary cell value {tok} at row {row}, column {col}"
            )

    return SettlementRaster(
        width=ncols, height=nrows, cell_size=cell_size, origin_id=path.stem, cells=cells
    )


def save_raster(raster: SettlementRaster, path) -> None:
    """Write a raster as an ESRI ASCII grid (bit-exact round trip via load)."""
    path = Path(path)
    lines = [
        f"ncols {raster.width}",
        f"nrows {raster.height}",
        "xllcorner 0.0",
        "yllcorner 0.0",
        f"cellsize {raster.cell_size!r}",
    ]
    for row in raster.cells:
        lines.append(" ".join(str(int(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class ManifestEntry:
    city_id: str
    raster_path: Path
    road_path: Path | None = None
    population: float | None = None
    area_km2: float | None = None


@dataclass(frozen=True)
class CityManifest:
    """Corpus bookkeeping: one row per city, paths resolved at load time."""

    entries: tuple[ManifestEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


MANIFEST_COLUMNS = ("city_id", "raster_path", "road_path", "population", "area_km2")


def load_manifest(path) -> CityManifest:
    """Load a corpus manifest CSV.

    Columns: ``city_id,raster_path,road_path,population,area_km2``; the last
    three may be blank. Relative paths resolve against the manifest's
    directory. Duplicate ids, missing raster files and unparseable rows are
    rejected with the row number.
    """
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames[:2]) != MANIFEST_COLUMNS[:2]:
            raise ManifestError(
                f"{path}: expected header starting with 'city_id,raster_path', "
                f"got {reader.fieldnames}"
            )
        for rownum, row in enumerate(reader, start=2):
            city_id = (row.get("city_id") or "").strip()
            raster_field = (row.get("raster_path") or "").strip()
            if not city_id or not raster_field:
                raise ManifestError(f"{path}: row {rownum}: city_id and raster_path are required")
            if city_id in seen:
                raise ManifestError(f"{path}: row {rownum}: duplicate city_id {city_id!r}")
            seen.add(city_id)
            raster_path = (base / raster_field).resolve()
            if not raster_path.is_file():
                raise ManifestError(
                    f"{path}: row {rownum}: raster file not found: {raster_path}"
                )
            road_field = (row.get("road_path") or "").strip()
            road_path = (base / road_field).resolve() if road_field else None
            try:
                population = float(row["population"]) if (row.get("population") or "").strip() else None
                area_km2 = float(row["area_km2"]) if (row.get("area_km2") or "").strip() else None
            except ValueError as exc:
                raise ManifestError(f"{path}: row {rownum}: {exc}") from None
            entries.append(ManifestEntry(city_id, raster_path, road_path, population, area_km2))
    return CityManifest(entries=tuple(entries))
