"""Pearson and Chatterjee correlation, pointwise and as named matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_vector, check_same_length


class ConstantInputError(ValueError):
    """Raised when a correlation needs variance that a constant vector lacks."""


def pearson(x, y) -> float:
    """Product-moment correlation coefficient."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    n = check_same_length(x, y)
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0 or sy == 0:
        raise ConstantInputError("pearson is undefined for a constant vector")
    return float((xc @ yc) / np.sqrt(sx * sy))


def chatterjee(x, y, seed: int = 0) -> float:
    """Rank-increment correlation of y against x (asymmetric by design).

    Pairs are ordered by x, ties broken uniformly at random with the given
    seed; ``r_i`` is the number of observations with ``y <= y_(i)`` and the
    statistic is ``1 - 3 * sum|r_{i+1} - r_i| / (n^2 - 1)``.
    """
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    n = check_same_length(x, y)
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    order = perm[np.argsort(x[perm], kind="stable")]
    y_ordered = y[order]
    y_sorted = np.sort(y)
    ranks = np.searchsorted(y_sorted, y_ordered, side="right")
    jumps = int(np.abs(np.diff(ranks)).sum())
    return 1.0 - 3.0 * jumps / (n * n - 1.0)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Named pairwise coefficients; NaN marks pairs a method could not score."""

    names: tuple[str, ...]
    values: np.ndarray
    method: str

    def cell(self, row: str, col: str) -> float:
        return float(self.values[self.names.index(row), self.names.index(col)])

    def to_long_rows(self) -> list[tuple[str, str, str, float]]:
        rows = []
        for i, a in enumerate(self.names):
            for j, b in enumerate(self.names):
                rows.append((a, b, self.method, float(self.values[i, j])))
        return rows


def correlation_matrix(columns: dict[str, np.ndarray], method: str = "pearson",
                       seed: int = 0) -> CorrelationMatrix:
    """All pairwise coefficients over the given named columns.

    The Pearson matrix is symmetric with a unit diagonal. The Chatterjee
    matrix reads row-as-x, column-as-y and is not symmetric; even its
    diagonal stays below 1 at finite n. Pairs with a constant column are
    recorded as NaN rather than aborting the matrix.
    """
    if method not in ("pearson", "chatterjee"):
        raise ValueError(f"unknown method {method!r}")
    names = tuple(columns)
    vectors = [as_vector(columns[name], name) for name in names]
    p = len(names)
    values = np.full((p, p), np.nan)
    for i in range(p):
        for j in range(p):
            try:
                if method == "pearson":
                    values[i, j] = 1.0 if i == j else pearson(vectors[i], vectors[j])
                else:
                    values[i, j] = chatterjee(vectors[i], vectors[j], seed=seed)
            except ConstantInputError:
                continue
    return CorrelationMatrix(names=names, values=values, method=method)
