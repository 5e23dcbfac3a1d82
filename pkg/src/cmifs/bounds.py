"""Ideal-error bounds and the linear minimum-MSE algebra behind the linear bound."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset, complement, index_set
from .errors import (
    NegativeInput,
    OutOfRange,
    SingularCovariance,
    WrongTaskKind,
    ZeroVarianceColumn,
)

SCHEMA_VERSION = 1
#: Pairwise |rho| at or below this counts as "uncorrelated".
UNCORRELATED_TOL = 0.05
_COND_LIMIT = 1e12


def regression_bound(sigma2: float, b: float, nu: float) -> float:
    """Ideal MSE after removal: sigma^2 + 2 B^2 nu."""
    for name, v in (("sigma2", sigma2), ("B", b), ("nu", nu)):
        if not math.isfinite(v) or v < 0:
            raise NegativeInput(f"{name} must be finite and >= 0, got {v}")
    if b == 0:
        raise NegativeInput("B must be > 0")
    return sigma2 + 2.0 * b * b * nu


def classification_bound(eps: float, nu: float, *, clip: bool = False) -> float:
    """Ideal 0-1 error after removal: eps + sqrt(2 nu).

    The raw value can exceed 1; pass ``clip=True`` for the value capped at 1.
    """
    if not (math.isfinite(eps) and 0 <= eps <= 1):
        raise OutOfRange(f"eps must lie in [0, 1], got {eps}")
    if not math.isfinite(nu) or nu < 0:
        raise OutOfRange(f"nu must be finite and >= 0, got {nu}")
    value = eps + math.sqrt(2.0 * nu)
    return min(value, 1.0) if clip else value


# -- linear algebra -------------------------------------------------------------


@dataclass(frozen=True)
class LinearFit:
    weights: np.ndarray
    bias: float
    mse: float
    ridge: float = 0.0

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.weights + self.bias


def _solve_normal_equations(cov_x: np.ndarray, cov_xy: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve cov_x w = cov_xy; one ridge retry when cov_x is (near) singular."""
    d = cov_x.shape[0]
    ridge = 0.0
    for attempt in range(2):
        mat = cov_x + ridge * np.eye(d)
        try:
            if np.linalg.cond(mat) < _COND_LIMIT:
                return np.linalg.solve(mat, cov_xy), ridge
        except np.linalg.LinAlgError:
            pass
        ridge = 1e-8 * np.trace(cov_x) / d
        if ridge <= 0:
            break
    raise SingularCovariance("feature covariance is singular even after ridge regularization")


def linear_mmse(x: np.ndarray, y: np.ndarray) -> LinearFit:
    """Best affine predictor of ``y`` from the columns of ``x`` (sample covariances, ddof=1)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if n < 2:
        raise SingularCovariance("need at least two samples")
    y_mean = y.mean()
    var_y = float(((y - y_mean) ** 2).sum() / (n - 1))
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[1] == 0:
        return LinearFit(np.zeros(0), float(y_mean), var_y)
    xc = x - x.mean(axis=0)
    yc = y - y_mean
    cov_x = xc.T @ xc / (n - 1)
    cov_xy = xc.T @ yc / (n - 1)
    w, ridge = _solve_normal_equations(cov_x, cov_xy)
    bias = float(y_mean - x.mean(axis=0) @ w)
    if ridge == 0.0:
        mse = var_y - float(cov_xy @ w)
    else:
        resid = yc - xc @ w
        mse = float(resid @ resid / (n - 1))
    return LinearFit(w, bias, max(mse, 0.0), ridge)


def fit_linear_mmse(ds: Dataset, s) -> LinearFit:
    """Closed-form minimum-MSE linear fit of the target on features ``s``."""
    if not ds.task.is_regression:
        raise WrongTaskKind("linear fits need a regression target")
    cols = list(index_set(s, ds.n_features))
    return linear_mmse(ds.features[:, cols], ds.target)


def residual_mse(fit: LinearFit, x: np.ndarray, y: np.ndarray) -> float:
    """Empirical residual MSE with the same 1/(N-1) normalization as the fit."""
    r = np.asarray(y) - fit.predict(np.asarray(x).reshape(len(y), -1))
    return float(r @ r / (len(y) - 1))


def _pearson(cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    std = cols.std(axis=0, ddof=1)
    scale = np.maximum(1.0, np.abs(cols.mean(axis=0)))
    bad = np.flatnonzero(std <= 1e-12 * scale)
    if bad.size:
        raise ZeroVarianceColumn(bad)
    z = (cols - cols.mean(axis=0)) / std
    r = z.T @ z / (cols.shape[0] - 1)
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r, std


def pearson_matrix(ds: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Feature-feature correlation matrix and feature-target correlation vector."""
    y = np.asarray(ds.target, dtype=np.float64).reshape(-1, 1)
    r, _ = _pearson(np.hstack([ds.features, y]))
    d = ds.n_features
    return r[:d, :d].copy(), r[:d, d].copy()


@dataclass
class LinearBoundReport:
    """Linear bound on the root-MSE of predicting Y from the kept features.

    ``general_bound`` and ``uncorrelated_bound`` are on the root-MSE scale; the
    ``*_squared`` companions are on the MSE scale. Weights enter the bound by
    absolute value.
    """

    removed: list[int]
    kept: list[int]
    sigma_full: float
    general_bound: float
    uncorrelated_bound: float
    premise_satisfied: bool
    weights: list[float]
    per_feature: list[dict]
    pearson: list[list[float]]
    target_correlation: list[float]
    sigma_y: float
    reduced_rmse: float

    @property
    def general_bound_squared(self) -> float:
        return self.general_bound**2

    @property
    def uncorrelated_bound_squared(self) -> float:
        return self.uncorrelated_bound**2

    def to_dict(self) -> dict:
        out = {"schema_version": SCHEMA_VERSION, **asdict(self)}
        out["general_bound_squared"] = self.general_bound_squared
        out["uncorrelated_bound_squared"] = self.uncorrelated_bound_squared
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def linear_subset_bound(ds: Dataset, a) -> LinearBoundReport:
    if not ds.task.is_regression:
        raise WrongTaskKind("the linear bound needs a regression target")
    d = ds.n_features
    removed = list(index_set(a, d))
    kept = list(complement(removed, d))
    x, y = ds.features, ds.target

    full = linear_mmse(x, y)
    sigma_full = math.sqrt(full.mse)
    reduced = linear_mmse(x[:, kept], y)

    per_feature = []
    general_sum = 0.0
    for i in removed:
        sigma_i = math.sqrt(linear_mmse(x[:, kept], x[:, i]).mse)
        w_i = float(full.weights[i])
        per_feature.append({"index": i, "weight": w_i, "residual_std": sigma_i})
        general_sum += abs(w_i) * sigma_i
    root_a = math.sqrt(len(removed))
    general = sigma_full + root_a * general_sum

    r, r_y = pearson_matrix(ds)
    sigma_y = float(np.std(y, ddof=1))
    unc_sum = 0.0
    for i in removed:
        shared = sum(r[i, j] ** 2 for j in kept)
        unc_sum += abs(r_y[i]) * math.sqrt(max(0.0, 1.0 - shared))
    uncorrelated = sigma_full + root_a * sigma_y * unc_sum

    premise = all(
        abs(r[i, j]) <= UNCORRELATED_TOL
        for group in (removed, kept)
        for i in group
        for j in group
        if i < j
    )
    return LinearBoundReport(
        removed=removed,
        kept=kept,
        sigma_full=sigma_full,
        general_bound=general,
        uncorrelated_bound=uncorrelated,
        premise_satisfied=premise,
        weights=[float(w) for w in full.weights],
        per_feature=per_feature,
        pearson=r.tolist(),
        target_correlation=[float(v) for v in r_y],
        sigma_y=sigma_y,
        reduced_rmse=math.sqrt(reduced.mse),
    )
