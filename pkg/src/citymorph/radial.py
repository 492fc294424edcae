"""Average radial profiles, peak search, and profile clustering.

A profile averages the occupancy field over concentric rings around a center
point. Ring ``d`` (0-indexed) holds the cells whose center-to-center distance
satisfies ``(d-1)*w < dist <= d*w`` for ring width ``w``; ring 0 is the cell
sitting exactly on the center, when one exists. Cell (row, col) is sampled at
the point ``(col + 0.5, row + 0.5)`` so profiles are exactly invariant under
90-degree rotation about the raster center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import as_matrix
from .raster import SettlementRaster


@dataclass(frozen=True)
class RadialProfile:
    """Mean occupancy per ring, plus the cell count behind each ring value.

    Rings with no cells carry value 0 and count 0.
    """

    city_id: str
    center: tuple[float, float]
    ring_width: int
    values: np.ndarray
    counts: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.values)


def geometric_center(raster: SettlementRaster) -> tuple[float, float]:
    return (raster.width / 2.0, raster.height / 2.0)


def urban_centroid(raster: SettlementRaster) -> tuple[float, float]:
    """Mean position of occupied cell centers; falls back to the geometric center."""
    rows, cols = np.nonzero(raster.cells)
    if len(rows) == 0:
        return geometric_center(raster)
    return (float(cols.mean()) + 0.5, float(rows.mean()) + 0.5)


def radial_profile(
    raster: SettlementRaster,
    center: tuple[float, float] | None = None,
    ring_width: int = 1,
) -> RadialProfile:
    """Average radial profile of a raster around ``center`` (default: geometric center)."""
    if ring_width < 1:
        raise ValueError(f"ring_width must be >= 1 cell, got {ring_width}")
    u0, v0 = center if center is not None else geometric_center(raster)
    if not (0 <= u0 <= raster.width and 0 <= v0 <= raster.height):
        raise ValueError(f"center {(u0, v0)} is outside the {raster.width}x{raster.height} raster")

    cols = np.arange(raster.width) + 0.5
    rows = np.arange(raster.height) + 0.5
    du = cols[None, :] - u0
    dv = rows[:, None] - v0
    dist = np.sqrt(du * du + dv * dv)

    ring = np.ceil(dist / ring_width).astype(np.int64)
    n_rings = int(ring.max()) + 1
    counts = np.bincount(ring.ravel(), minlength=n_rings)
    sums = np.bincount(ring.ravel(), weights=raster.cells.ravel().astype(np.float64),
                       minlength=n_rings)
    values = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return RadialProfile(
        city_id=raster.origin_id,
        center=(u0, v0),
        ring_width=ring_width,
        values=values,
        counts=counts.astype(np.int64),
    )


@dataclass(frozen=True)
class PeakSet:
    """Peaks accepted by the greedy scan: ring indices and their profile heights."""

    indices: tuple[int, ...]
    heights: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.indices)


def min_ring_separation(min_distance_m: float, cell_size: float, ring_width: int) -> int:
    """Meters-to-rings conversion: nearest integer (half up), at least 1."""
    return max(1, int(math.floor(min_distance_m / (cell_size * ring_width) + 0.5)))


def _local_maximum_runs(values: np.ndarray) -> list[int]:
    """Leftmost indices of flat runs that stand above both neighbors (or an edge)."""
    n = len(values)
    maxima = []
    start = 0
    while start < n:
        end = start
        while end + 1 < n and values[end + 1] == values[start]:
            end += 1
        left_ok = start == 0 or values[start - 1] < values[start]
        right_ok = end == n - 1 or values[end + 1] < values[start]
        if left_ok and right_ok:
            maxima.append(start)
        start = end + 1
    return maxima


def find_peaks(
    profile: RadialProfile,
    height_fraction: float = 0.8,
    min_distance_m: float = 430.0,
    cell_size: float | None = None,
) -> PeakSet:
    """Greedy left-to-right peak detection on a radial profile.

    A local maximum is accepted when its height reaches ``height_fraction``
    of the profile maximum and it sits at least the ring equivalent of
    ``min_distance_m`` beyond the previously accepted peak. Plateaus count
    once, at their leftmost ring.
    """
    if not 0 < height_fraction <= 1:
        raise ValueError(f"height_fraction must be in (0, 1], got {height_fraction}")
    if min_distance_m <= 0:
        raise ValueError(f"min_distance_m must be positive, got {min_distance_m}")
    values = np.asarray(profile.values, dtype=np.float64)
    if len(values) == 0:
        raise ValueError("cannot search an empty profile")
    if cell_size is None:
        raise ValueError("cell_size is required to convert the distance threshold to rings")
    min_sep = min_ring_separation(min_distance_m, cell_size, profile.ring_width)

    threshold = height_fraction * values.max()
    indices: list[int] = []
    for idx in _local_maximum_runs(values):
        if values[idx] < threshold:
            continue
        if indices and idx - indices[-1] < min_sep:
            continue
        indices.append(idx)
    return PeakSet(indices=tuple(indices), heights=tuple(float(values[i]) for i in indices))


def pad_profiles(profiles, length: int | None = None) -> np.ndarray:
    """Stack profile value vectors, padding shorter ones with trailing zeros.

    With ``length`` given, longer profiles are truncated to it.
    """
    rows = [np.asarray(p.values if isinstance(p, RadialProfile) else p, dtype=np.float64)
            for p in profiles]
    if not rows:
        raise ValueError("no profiles given")
    target = length if length is not None else max(len(r) for r in rows)
    out = np.zeros((len(rows), target))
    for i, r in enumerate(rows):
        m = min(len(r), target)
        out[i, :m] = r[:m]
    return out


def half_side_length(raster_side: int, ring_width: int = 1) -> int:
    """Profile length covering rings out to half the scene side."""
    return int(math.ceil((raster_side / 2.0) / ring_width)) + 1


class ProfileKMeans(BaseEstimator, ClusterMixin):
    """K-means over profile vectors with seeded k-means++ starts.

    Runs ``restarts`` independent initializations and keeps the lowest
    within-cluster sum of squares. Lloyd iterations stop when assignments
    stabilize or after ``max_iter`` rounds; a cluster left empty keeps its
    previous centroid, so inertia never increases within a run.
    """

    def __init__(self, n_clusters: int = 10, seed: int = 0, restarts: int = 10,
                 max_iter: int = 300):
        self.n_clusters = n_clusters
        self.seed = seed
        self.restarts = restarts
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = as_matrix(X)
        k = self.n_clusters
        if k < 1:
            raise ValueError(f"n_clusters must be >= 1, got {k}")
        if len(X) < k:
            raise ValueError(f"need at least {k} profiles for {k} clusters, got {len(X)}")

        best = None
        for restart in range(self.restarts):
            rng = np.random.default_rng((self.seed, restart))
            centroids = _kmeans_pp_init(X, k, rng)
            result = _lloyd(X, centroids, self.max_iter)
            if best is None or result[2] < best[2]:
                best = result
        centroids, labels, inertia, history, n_iter = best

        self.cluster_centers_ = centroids
        self.labels_ = labels
        self.inertia_ = inertia
        self.inertia_history_ = history
        self.n_iter_ = n_iter
        return self

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X)
        return _nearest(X, self.cluster_centers_)[0]

    def warm_fit(self, X, centroids) -> "ProfileKMeans":
        """Fit from explicit starting centroids (used by the elbow cascade)."""
        X = as_matrix(X)
        centroids, labels, inertia, history, n_iter = _lloyd(
            X, np.array(centroids, dtype=np.float64), self.max_iter
        )
        self.cluster_centers_ = centroids
        self.labels_ = labels
        self.inertia_ = inertia
        self.inertia_history_ = history
        self.n_iter_ = n_iter
        return self


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[j] = X[rng.integers(n)]
            continue
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(closest), r))
        idx = min(idx, n - 1)
        centroids[j] = X[idx]
        closest = np.minimum(closest, ((X - centroids[j]) ** 2).sum(axis=1))
    return centroids


def _nearest(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(X)), labels]


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int):
    labels = None
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new_labels, dists = _nearest(X, centroids)
        history.append(float(dists.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(len(centroids)):
            members = X[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    labels, dists = _nearest(X, centroids)
    inertia = float(dists.sum())
    history.append(inertia)
    return centroids, labels, inertia, history, n_iter


@dataclass(frozen=True)
class ProfileClustering:
    k: int
    seed: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float


def kmeans_profiles(profiles, k: int, seed: int = 0, restarts: int = 10) -> ProfileClustering:
    """Cluster radial profiles (padded to a common length) with K-means."""
    X = pad_profiles(profiles)
    model = ProfileKMeans(n_clusters=k, seed=seed, restarts=restarts).fit(X)
    return ProfileClustering(
        k=k, seed=seed, centroids=model.cluster_centers_,
        assignments=model.labels_, inertia=model.inertia_,
    )


def elbow_curve(profiles, k_max: int, seed: int = 0, restarts: int = 10) -> list[tuple[int, float, float]]:
    """Inertia versus k for k = 1..k_max, as (k, inertia, fraction-of-k1) rows.

    Each k additionally tries a warm start built from the previous best
    centroids plus the worst-fit point, which keeps the curve non-increasing.
    """
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    X = pad_profiles(profiles)
    rows: list[tuple[int, float, float]] = []
    base_inertia = None
    prev: ProfileKMeans | None = None
    for k in range(1, k_max + 1):
        model = ProfileKMeans(n_clusters=k, seed=seed, restarts=restarts).fit(X)
        if prev is not None:
            labels, dists = _nearest(X, prev.cluster_centers_)
            worst = int(np.argmax(dists))
            warm_centroids = np.vstack([prev.cluster_centers_, X[worst]])
            warm = ProfileKMeans(n_clusters=k, seed=seed, restarts=1,
                                 max_iter=model.max_iter).warm_fit(X, warm_centroids)
            if warm.inertia_ < model.inertia_:
                model = warm
        if base_inertia is None:
            base_inertia = model.inertia_
        fraction = model.inertia_ / base_inertia if base_inertia > 0 else 0.0
        rows.append((k, model.inertia_, fraction))
        prev = model
    return rows


@dataclass(frozen=True)
class DistributionReport:
    """Relative-frequency histograms of two labeled populations and their gap."""

    real_freq: dict[int, float]
    generated_freq: dict[int, float]
    tv_distance: float


def compare_distributions(real_labels, generated_labels) -> DistributionReport:
    """Histogram two integer-label populations and compute their total-variation distance."""
    real = [int(v) for v in real_labels]
    generated = [int(v) for v in generated_labels]
    if not real or not generated:
        raise ValueError("both populations must be nonempty")
    support = sorted(set(real) | set(generated))
    real_freq = {s: real.count(s) / len(real) for s in support}
    gen_freq = {s: generated.count(s) / len(generated) for s in support}
    tv = 0.5 * sum(abs(real_freq[s] - gen_freq[s]) for s in support)
    return DistributionReport(real_freq=real_freq, generated_freq=gen_freq, tv_distance=tv)
