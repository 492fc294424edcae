"""Regression models relating settlement indices to network density.

Three estimators share the sklearn fit/predict surface: ordinary least
squares, ridge (closed-form normal equations with an unpenalized intercept),
and kernel ridge with an RBF kernel. Kernel ridge standardizes features and
centers targets internally; the dual coefficients solve ``(K + lambda*I)
alpha = y_centered`` and predictions are ``sum_n alpha_n k(x_n, x*)`` plus
the target mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg as slinalg
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_vector, check_same_length
from .errors import SingularSystemError

DEFAULT_LAMBDA_GRID = tuple(float(v) for v in 10.0 ** np.linspace(-3, 2, 6))
DEFAULT_GAMMA_GRID = tuple(float(v) for v in 10.0 ** np.linspace(-3, 1, 5))


@dataclass(frozen=True)
class RegressionDataset:
    """Feature matrix, targets, and ids for one modeling corpus."""

    feature_names: tuple[str, ...]
    features: np.ndarray
    targets: np.ndarray
    city_ids: tuple[str, ...]

    def __post_init__(self):
        features = as_matrix(self.features, "features")
        targets = as_vector(self.targets, "targets")
        n, p = features.shape
        if n < 2:
            raise ValueError(f"need at least 2 rows, got {n}")
        if p != len(self.feature_names):
            raise ValueError(f"{p} feature columns vs {len(self.feature_names)} names")
        if len(targets) != n or len(self.city_ids) != n:
            raise ValueError("features, targets and city_ids disagree on row count")
        features.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def n(self) -> int:
        return len(self.targets)

    def subset(self, indices) -> "RegressionDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return RegressionDataset(
            feature_names=self.feature_names,
            features=self.features[idx].copy(),
            targets=self.targets[idx].copy(),
            city_ids=tuple(self.city_ids[i] for i in idx),
        )

    def select_features(self, names) -> "RegressionDataset":
        cols = [self.feature_names.index(n) for n in names]
        return RegressionDataset(
            feature_names=tuple(names),
            features=self.features[:, cols].copy(),
            targets=self.targets.copy(),
            city_ids=self.city_ids,
        )


class FeatureStandardizer(BaseEstimator, TransformerMixin):
    """Z-score scaler. Constant features are refused by default; pass
    ``on_constant="unit"`` to give them unit scale instead (they then pass
    through centered, which is what a kernel distance needs)."""

    def __init__(self, on_constant: str = "raise"):
        self.on_constant = on_constant

    def fit(self, X, y=None):
        X = as_matrix(X)
        self.means_ = X.mean(axis=0)
        self.scales_ = X.std(axis=0)
        if (self.scales_ <= 0).any():
            if self.on_constant == "unit":
                self.scales_ = np.where(self.scales_ > 0, self.scales_, 1.0)
            else:
                bad = int(np.argmin(self.scales_))
                raise ValueError(f"feature column {bad} is constant and cannot be standardized")
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "means_")
        X = as_matrix(X)
        if X.shape[1] != len(self.means_):
            raise ValueError(f"expected {len(self.means_)} features, got {X.shape[1]}")
        return (X - self.means_) / self.scales_


def _solve_spd(A: np.ndarray, b: np.ndarray, context: str) -> np.ndarray:
    try:
        factor = slinalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"{context}: system is singular ({exc}); use a regularizer > 0"
        ) from None
    return slinalg.cho_solve(factor, b)


class RidgeRegression(BaseEstimator, RegressorMixin):
    """Least squares with an L2 coefficient penalty, solved in closed form.

    Minimizes ``0.5 * ||y - X beta||^2 + 0.5 * lam * ||beta||^2`` with the
    intercept handled by centering and left unpenalized. ``lam = 0`` is plain
    least squares and raises :class:`SingularSystemError` on collinearity.
    """

    def __init__(self, lam: float = 1.0):
        self.lam = lam

    def fit(self, X, y):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        X = as_matrix(X)
        y = as_vector(y, "y")
        check_same_length(X, y)
        self.x_mean_ = X.mean(axis=0)
        self.y_mean_ = float(y.mean())
        Xc = X - self.x_mean_
        yc = y - self.y_mean_
        gram = Xc.T @ Xc + self.lam * np.eye(X.shape[1])
        self.coef_ = _solve_spd(gram, Xc.T @ yc, "ridge fit")
        self.intercept_ = self.y_mean_ - float(self.x_mean_ @ self.coef_)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        X = as_matrix(X)
        return X @ self.coef_ + self.intercept_


class LinearRegression(RidgeRegression):
    """Ordinary least squares: ridge with a zero regularizer."""

    def __init__(self):
        super().__init__(lam=0.0)

    def get_params(self, deep=True):
        return {}

    def set_params(self, **params):
        if params:
            raise ValueError("LinearRegression takes no parameters")
        return self


def ridge_to_raw_space(model: RidgeRegression, scaler: FeatureStandardizer) -> RidgeRegression:
    """Re-express a ridge model fitted on standardized features in raw units.

    Predictions are identical; only the coefficient basis changes.
    """
    check_is_fitted(model, "coef_")
    raw = LinearRegression() if isinstance(model, LinearRegression) else RidgeRegression(lam=model.lam)
    raw.coef_ = model.coef_ / scaler.scales_
    raw.intercept_ = model.intercept_ - float((scaler.means_ / scaler.scales_) @ model.coef_)
    raw.x_mean_ = scaler.means_.copy()
    raw.y_mean_ = model.y_mean_
    return raw


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||a - b||^2)``, computed from explicit differences."""
    diff = A[:, None, :] - B[None, :, :]
    return np.exp(-gamma * (diff * diff).sum(axis=2))


class KernelRidgeRegression(BaseEstimator, RegressorMixin):
    """RBF-kernel ridge regression on standardized features.

    ``lam`` is the regularizer on the dual problem and ``gamma`` the kernel
    width. With ``lam = 0`` and distinct inputs the model interpolates the
    training targets.
    """

    def __init__(self, lam: float = 1.0, gamma: float = 0.1):
        self.lam = lam
        self.gamma = gamma

    def fit(self, X, y):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        X = as_matrix(X)
        y = as_vector(y, "y")
        check_same_length(X, y)
        self.standardizer_ = FeatureStandardizer(on_constant="unit").fit(X)
        Z = self.standardizer_.transform(X)
        self.y_mean_ = float(y.mean())
        K = rbf_kernel(Z, Z, self.gamma)
        self.dual_coef_ = _solve_spd(
            K + self.lam * np.eye(len(Z)), y - self.y_mean_, "kernel ridge fit"
        )
        self.support_inputs_ = Z
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "dual_coef_")
        Z = self.standardizer_.transform(as_matrix(X))
        return rbf_kernel(Z, self.support_inputs_, self.gamma) @ self.dual_coef_ + self.y_mean_


@dataclass(frozen=True)
class RegressionMetrics:
    mse: float
    mae: float
    r2: float
    adj_r2: float

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.mse, self.mae, self.r2, self.adj_r2)


def evaluate(predictions, targets, p: int) -> RegressionMetrics:
    """MSE, MAE, R^2 and adjusted R^2 for ``p`` model features."""
    predictions = as_vector(predictions, "predictions")
    targets = as_vector(targets, "targets")
    n = check_same_length(predictions, targets)
    if n < 2:
        raise ValueError(f"need at least 2 observations, got {n}")
    if n <= p + 1:
        raise ValueError(f"adjusted R^2 needs n > p + 1 (n={n}, p={p})")
    residuals = targets - predictions
    mse = float((residuals**2).mean())
    mae = float(np.abs(residuals).mean())
    ss_tot = float(((targets - targets.mean()) ** 2).sum())
    if ss_tot == 0:
        raise ValueError("R^2 is undefined for constant targets")
    r2 = 1.0 - float((residuals**2).sum()) / ss_tot
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1)
    return RegressionMetrics(mse=mse, mae=mae, r2=r2, adj_r2=adj_r2)


def train_test_split(dataset: RegressionDataset, test_fraction: float, seed: int):
    """Seeded shuffle split; the test side takes ``floor(n * fraction)`` rows."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = dataset.n
    n_test = int(np.floor(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise ValueError(f"split of {n} rows at {test_fraction} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return dataset.subset(train_idx), dataset.subset(test_idx)


@dataclass(frozen=True)
class GridSearchResult:
    best_lambda: float
    best_gamma: float | None
    table: tuple[tuple[float, float | None, float], ...] = field(repr=False)


def grid_search_cv(
    dataset: RegressionDataset,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    gamma_grid=DEFAULT_GAMMA_GRID,
    folds: int = 5,
    seed: int = 0,
    repeats: int = 1,
) -> GridSearchResult:
    """Pick (lambda, gamma) by mean validation MSE over seeded K folds.

    ``gamma_grid=None`` searches plain ridge models over lambda only.
    ``repeats`` reruns the K-fold split with reshuffled folds and averages,
    which stabilizes the selection on small samples. Exact MSE ties resolve
    toward the larger lambda, then the smaller gamma.
    """
    lambda_grid = tuple(lambda_grid)
    if not lambda_grid:
        raise ValueError("lambda_grid is empty")
    gammas: tuple[float | None, ...] = (None,) if gamma_grid is None else tuple(gamma_grid)
    if not gammas:
        raise ValueError("gamma_grid is empty")
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    n = dataset.n
    if folds > n:
        raise ValueError(f"{folds} folds over {n} rows would leave an empty fold")

    fold_indices = []
    for rep in range(repeats):
        perm = np.random.default_rng((seed, rep)).permutation(n)
        fold_indices.extend(np.array_split(perm, folds))

    best: tuple[float, float, float | None] | None = None  # (mse, lam, gamma)
    table = []
    for lam in lambda_grid:
        for gamma in gammas:
            fold_mse = []
            for holdout in fold_indices:
                mask = np.ones(n, dtype=bool)
                mask[holdout] = False
                train = dataset.subset(np.nonzero(mask)[0])
                model = (
                    RidgeRegression(lam=lam)
                    if gamma is None
                    else KernelRidgeRegression(lam=lam, gamma=gamma)
                )
                try:
                    model.fit(train.features, train.targets)
                except SingularSystemError:
                    # a candidate that cannot be fitted on some fold (e.g.
                    # lam=0 with duplicated rows) is disqualified, not fatal
                    fold_mse = [np.inf]
                    break
                pred = model.predict(dataset.features[holdout])
                fold_mse.append(float(((pred - dataset.targets[holdout]) ** 2).mean()))
            mse = float(np.mean(fold_mse))
            table.append((float(lam), None if gamma is None else float(gamma), mse))
            if best is None:
                best = (mse, lam, gamma)
            else:
                b_mse, b_lam, b_gamma = best
                if mse < b_mse:
                    best = (mse, lam, gamma)
                elif mse == b_mse:
                    if lam > b_lam or (
                        lam == b_lam
                        and gamma is not None
                        and b_gamma is not None
                        and gamma < b_gamma
                    ):
                        best = (mse, lam, gamma)
    assert best is not None
    return GridSearchResult(
        best_lambda=float(best[1]),
        best_gamma=None if best[2] is None else float(best[2]),
        table=tuple(table),
    )


@dataclass(frozen=True)
class SavedModel:
    estimator: BaseEstimator
    feature_names: tuple[str, ...]
    metadata: dict


def save_model(model: BaseEstimator, path, feature_names, metadata: dict | None = None) -> None:
    """Persist a fitted model (with enough state to predict) as JSON."""
    path = Path(path)
    doc: dict = {"feature_names": list(feature_names), "metadata": metadata or {}}
    if isinstance(model, KernelRidgeRegression):
        doc.update(
            model="krr",
            lam=model.lam,
            gamma=model.gamma,
            target_mean=model.y_mean_,
            standardizer={
                "means": model.standardizer_.means_.tolist(),
                "scales": model.standardizer_.scales_.tolist(),
            },
            support_inputs=model.support_inputs_.tolist(),
            dual_coefficients=model.dual_coef_.tolist(),
        )
    elif isinstance(model, RidgeRegression):
        doc.update(
            model="linear" if isinstance(model, LinearRegression) else "ridge",
            lam=model.lam,
            coefficients=model.coef_.tolist(),
            intercept=model.intercept_,
            x_mean=model.x_mean_.tolist(),
            y_mean=model.y_mean_,
        )
    else:
        raise TypeError(f"cannot persist model of type {type(model).__name__}")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(path) -> SavedModel:
    doc = json.loads(Path(path).read_text())
    kind = doc.get("model")
    if kind == "krr":
        model = KernelRidgeRegression(lam=doc["lam"], gamma=doc["gamma"])
        scaler = FeatureStandardizer()
        scaler.means_ = np.asarray(doc["standardizer"]["means"], dtype=np.float64)
        scaler.scales_ = np.asarray(doc["standardizer"]["scales"], dtype=np.float64)
        model.standardizer_ = scaler
        model.y_mean_ = float(doc["target_mean"])
        model.support_inputs_ = np.asarray(doc["support_inputs"], dtype=np.float64)
        model.dual_coef_ = np.asarray(doc["dual_coefficients"], dtype=np.float64)
    elif kind in ("ridge", "linear"):
        model = LinearRegression() if kind == "linear" else RidgeRegression(lam=doc["lam"])
        model.coef_ = np.asarray(doc["coefficients"], dtype=np.float64)
        model.intercept_ = float(doc["intercept"])
        model.x_mean_ = np.asarray(doc["x_mean"], dtype=np.float64)
        model.y_mean_ = float(doc["y_mean"])
    else:
        raise ValueError(f"{path}: unknown model kind {kind!r}")
    return SavedModel(
        estimator=model,
        feature_names=tuple(doc["feature_names"]),
        metadata=doc.get("metadata", {}),
    )
