"""Road networks: polyline ingestion, total length, and network density.

Geometry must arrive in projected meters. Two formats are read: a GeoJSON
subset (FeatureCollection of LineString/MultiLineString) and a flat CSV of
``line_id,vertex_index,x_m,y_m`` rows. Coordinates that all fit inside the
longitude/latitude box are taken to be geographic and rejected.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ProjectionError

_GEOJSON_SUFFIXES = {".geojson", ".json"}


@dataclass(frozen=True)
class RoadNetwork:
    city_id: str
    polylines: tuple[np.ndarray, ...] = field(repr=False)
    categories: tuple[str | None, ...] = ()
    skipped_features: int = 0

    def __post_init__(self):
        for line in self.polylines:
            if line.ndim != 2 or line.shape[1] != 2 or len(line) < 2:
                raise ValueError("each polyline needs >= 2 (x, y) vertices")
            if not np.isfinite(line).all():
                raise ValueError("polyline coordinates must be finite")


@dataclass(frozen=True)
class TransportIndex:
    """Total road length L (km), city area A (km^2), and density ND = L/A."""

    road_length_km: float
    area_km2: float
    density: float


def _check_projected(polylines, path) -> None:
    xs = np.concatenate([line[:, 0] for line in polylines])
    ys = np.concatenate([line[:, 1] for line in polylines])
    if (np.abs(xs) <= 180).all() and (np.abs(ys) <= 90).all():
        raise ProjectionError(
            f"{path}: coordinates fall inside the lon/lat box; supply projected "
            "meter coordinates (e.g. a UTM zone), not geographic degrees"
        )


def load_roads(path) -> RoadNetwork:
    """Load a road network from GeoJSON or the CSV polyline format.

    Non-line GeoJSON features are skipped and tallied in
    ``skipped_features``. The city id comes from the file stem.
    """
    path = Path(path)
    if path.suffix.lower() in _GEOJSON_SUFFIXES:
        polylines, categories, skipped = _read_geojson(path)
    else:
        polylines, categories, skipped = _read_polyline_csv(path)
    if polylines:
        _check_projected(polylines, path)
    return RoadNetwork(
        city_id=path.stem,
        polylines=tuple(polylines),
        categories=tuple(categories),
        skipped_features=skipped,
    )


def _read_geojson(path: Path):
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON: {exc}") from None
    features = doc.get("features")
    if doc.get("type") != "FeatureCollection" or not isinstance(features, list):
        raise ValueError(f"{path}: expected a GeoJSON FeatureCollection")
    polylines: list[np.ndarray] = []
    categories: list[str | None] = []
    skipped = 0
    for feature in features:
        geometry = feature.get("geometry") or {}
        gtype = geometry.get("type")
        category = (feature.get("properties") or {}).get("category")
        if gtype == "LineString":
            parts = [geometry.get("coordinates", [])]
        elif gtype == "MultiLineString":
            parts = geometry.get("coordinates", [])
        else:
            skipped += 1
            continue
        for part in parts:
            coords = np.asarray(part, dtype=np.float64)
            polylines.append(coords)
            categories.append(category)
    return polylines, categories, skipped


def _read_polyline_csv(path: Path):
    rows: dict[str, list[tuple[int, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ("line_id", "vertex_index", "x_m", "y_m")
        if reader.fieldnames is None or tuple(reader.fieldnames[:4]) != expected:
            raise ValueError(f"{path}: expected header {','.join(expected)}")
        for rownum, row in enumerate(reader, start=2):
            try:
                line_id = row["line_id"]
                idx = int(row["vertex_index"])
                x, y = float(row["x_m"]), float(row["y_m"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: row {rownum}: {exc}") from None
            rows.setdefault(line_id, []).append((idx, x, y))
    polylines = []
    for line_id in rows:
        vertices = sorted(rows[line_id])
        polylines.append(np.array([(x, y) for _, x, y in vertices], dtype=np.float64))
    return polylines, [None] * len(polylines), 0


def total_length_km(network: RoadNetwork) -> float:
    """Sum of Euclidean segment lengths over all polylines, in kilometers."""
    total = 0.0
    for line in network.polylines:
        deltas = np.diff(line, axis=0)
        total += float(np.hypot(deltas[:, 0], deltas[:, 1]).sum())
    return total / 1000.0


def network_density(length_km: float, area_km2: float, allow_zero_length: bool = False) -> TransportIndex:
    """Network density ND = L / A in km per km^2."""
    if area_km2 <= 0:
        raise ValueError(f"area must be positive, got {area_km2} km^2")
    if length_km <= 0 and not allow_zero_length:
        raise ValueError(
            f"road length {length_km} km is not positive; pass allow_zero_length=True "
            "to report a zero-density network"
        )
    return TransportIndex(
        road_length_km=length_km, area_km2=area_km2, density=length_km / area_km2
    )


@dataclass(frozen=True)
class DescriptiveStats:
    minimum: float
    maximum: float
    mean: float
    std: float
    count: int
    single_sample: bool = False


def summarize_lengths(networks) -> DescriptiveStats:
    """Min/max/mean/sample-sd of total road length over a corpus."""
    lengths = [total_length_km(n) if isinstance(n, RoadNetwork) else float(n) for n in networks]
    if not lengths:
        raise ValueError("cannot summarize an empty corpus")
    arr = np.asarray(lengths, dtype=np.float64)
    single = len(arr) == 1
    std = 0.0 if single else float(arr.std(ddof=1))
    return DescriptiveStats(
        minimum=float(arr.min()),
        maximum=float(arr.max()),
        mean=float(arr.mean()),
        std=std,
        count=len(arr),
        single_sample=single,
    )


def concatenate_at(line_a: np.ndarray, line_b: np.ndarray) -> np.ndarray:
    """Join two polylines sharing an endpoint (helper for additivity checks)."""
    if not np.array_equal(line_a[-1], line_b[0]):
        raise ValueError("polylines do not share an endpoint")
    return np.vstack([line_a, line_b[1:]])


def rigid_transform(line: np.ndarray, angle_rad: float = 0.0, dx: float = 0.0, dy: float = 0.0) -> np.ndarray:
    """Rotate then translate a polyline (helper for invariance checks)."""
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    rot = np.array([[c, -s], [s, c]])
    return line @ rot.T + np.array([dx, dy])
