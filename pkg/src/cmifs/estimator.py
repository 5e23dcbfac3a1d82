"""k-nearest-neighbour estimators of mutual information.

The mixed estimator handles samples that mix continuous coordinates with
discrete mass points. Distances are max-norm throughout. For a point whose
k-th joint neighbour sits at distance zero, the neighbour count is replaced by
the number of exact duplicates and marginal counts use radius zero; otherwise
marginal counts are strictly inside the k-th neighbour radius. With no
duplicate points this is exactly the classic Kraskov-Stoegbauer-Grassberger
estimator (first variant).

Discrete target blocks (integer class labels) are placed infinitely far apart:
two samples with different labels are never neighbours in the joint space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import NonPositiveArgument, OutOfRange, ShapeMismatch, TooFewSamples

#: Above this many samples, neighbour queries go through a k-d tree.
BRUTE_FORCE_LIMIT = 4096
_CHUNK = 256


def digamma(x):
    """Digamma function for positive real arguments (scalar or array).

    Shifts the argument up to at least 6 with the recurrence
    psi(x) = psi(x + 1) - 1/x, then applies the asymptotic series.
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise NonPositiveArgument("digamma is only defined here for x > 0")
    v = arr.copy()
    acc = np.zeros_like(v)
    while True:
        small = v < 6.0
        if not np.any(small):
            break
        acc = acc - np.where(small, 1.0 / np.where(small, v, 1.0), 0.0)
        v = np.where(small, v + 1.0, v)
    inv2 = 1.0 / (v * v)
    # Bernoulli-number tail: 1/12, 1/120, 1/252, 1/240, 1/132, 691/32760, 1/12
    series = inv2 * (
        1.0 / 12
        - inv2 * (1.0 / 120
        - inv2 * (1.0 / 252
        - inv2 * (1.0 / 240
        - inv2 * (1.0 / 132
        - inv2 * (691.0 / 32760
        - inv2 / 12.0)))))
    )
    out = acc + np.log(v) - 0.5 / v - series
    if np.ndim(x) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5
    tie_epsilon: float = 1e-12

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise OutOfRange(f"k must be a positive integer, got {self.k}")
        if not (self.tie_epsilon >= 0):
            raise OutOfRange("tie_epsilon must be >= 0")

    def to_dict(self) -> dict:
        return {"k": int(self.k), "metric": "chebyshev", "tie_epsilon": self.tie_epsilon}


def auto_k(n: int) -> int:
    """Default neighbour count: 5% of the sample size, at least 3."""
    return max(3, int(math.floor(0.05 * n)))


@dataclass(frozen=True)
class MiEstimate:
    value: float
    n_samples: int
    k_used: int
    clamped: bool
    raw: float = 0.0


def _as_block(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ShapeMismatch("sample blocks must be 1-D or 2-D")
    return a


def _is_discrete(y: np.ndarray, discrete: bool | None) -> bool:
    if discrete is not None:
        return discrete
    return np.issubdtype(y.dtype, np.integer) or np.issubdtype(y.dtype, np.bool_)


def _labels(y: np.ndarray) -> np.ndarray:
    _, inv = np.unique(y, axis=0, return_inverse=True)
    return inv.reshape(-1)


# -- neighbour primitives -----------------------------------------------------
#
# Both paths return identical numbers: the k-d tree only prunes, every
# reported distance is the same max over coordinate differences.


def _pairwise_chunk(pts: np.ndarray, rows: slice) -> np.ndarray:
    d = np.zeros((rows.stop - rows.start, pts.shape[0]))
    for c in range(pts.shape[1]):
        col = pts[:, c]
        np.maximum(d, np.abs(col[rows, None] - col[None, :]), out=d)
    return d


def _kth_distance_tree(pts: np.ndarray, k: int, groups: np.ndarray | None) -> np.ndarray:
    n = pts.shape[0]
    out = np.full(n, np.inf)
    parts = [np.arange(n)] if groups is None else [np.flatnonzero(groups == g) for g in np.unique(groups)]
    for idx in parts:
        if idx.size <= k:
            continue
        sub = pts[idx]
        tree = cKDTree(sub)
        dist, _ = tree.query(sub, k=k + 1, p=np.inf)
        out[idx] = dist[:, k]
    return out


def _count_tree(pts: np.ndarray, radii: np.ndarray, inclusive: np.ndarray) -> np.ndarray:
    tree = cKDTree(pts)
    # strict d < r  <=>  d <= largest float below r
    r = np.where(inclusive, radii, np.nextafter(radii, -np.inf))
    r = np.maximum(r, 0.0)
    counts = tree.query_ball_point(pts, r, p=np.inf, return_length=True)
    return np.asarray(counts, dtype=np.int64) - 1


def _count_within(pts, radii, inclusive):
    if pts.shape[1] == 0:
        return np.full(pts.shape[0], pts.shape[0] - 1, dtype=np.int64)
    return _count_tree(pts, radii, inclusive)


# -- estimators ---------------------------------------------------------------


def _raw_mi(
    x: np.ndarray,
    y: np.ndarray,
    k: int,
    tie_epsilon: float,
    discrete_y: bool,
    brute_force_limit: int = BRUTE_FORCE_LIMIT,
) -> float:
    n = x.shape[0]
    xf = np.ascontiguousarray(x, dtype=np.float64)
    if discrete_y:
        groups, yf = _labels(y), None
    else:
        groups, yf = None, np.ascontiguousarray(y, dtype=np.float64)
    if n > brute_force_limit:
        k_i, n_x, n_y = _counts_tree(xf, yf, groups, k, tie_epsilon)
    else:
        k_i, n_x, n_y = _counts_brute(xf, yf, groups, k, tie_epsilon)
    terms = digamma(k_i) - digamma(n_x + 1.0) - digamma(n_y + 1.0)
    # fsum is exactly rounded, so the result does not depend on sample order
    return digamma(float(n)) + math.fsum(terms) / n


def _counts_brute(xf, yf, groups, k, eps):
    """Per-sample (k_i, n_x, n_y) from one pass over row chunks of the distance matrix."""
    n = xf.shape[0]
    k_i = np.empty(n)
    n_x = np.empty(n, dtype=np.int64)
    n_y = np.empty(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        rows = slice(start, min(n, start + _CHUNK))
        m = rows.stop - rows.start
        diag = (np.arange(m), np.arange(rows.start, rows.stop))
        dx = _pairwise_chunk(xf, rows)
        if groups is None:
            dy = _pairwise_chunk(yf, rows)
            joint = np.maximum(dx, dy)
        else:
            same = groups[rows, None] == groups[None, :]
            joint = np.where(same, dx, np.inf)
        joint[diag] = np.inf
        kth = np.partition(joint, k - 1, axis=1)[:, k - 1]
        mass = kth <= eps
        r = np.where(mass, eps, kth - eps)[:, None]
        inc = mass[:, None]
        # self sits at distance 0 in both marginals and is always counted once
        n_x[rows] = np.where(inc, dx <= r, dx < r).sum(axis=1) - 1
        if groups is None:
            n_y[rows] = np.where(inc, dy <= r, dy < r).sum(axis=1) - 1
        else:
            n_y[rows] = same.sum(axis=1) - 1
        k_i[rows] = np.where(mass, (joint <= eps).sum(axis=1), k)
    return k_i, n_x, n_y


def _counts_tree(xf, yf, groups, k, eps):
    n = xf.shape[0]
    joint = xf if groups is not None else np.hstack([xf, yf])
    kth = _kth_distance_tree(joint, k, groups)
    mass = kth <= eps
    radii = np.where(mass, eps, kth - eps)
    k_i = np.full(n, float(k))
    if np.any(mass):
        if groups is not None:
            dup = _count_within_groups(joint, groups, mass, eps)
        else:
            dup = _count_within(joint, np.full(n, eps), np.ones(n, bool))
        k_i[mass] = dup[mass]
    n_x = _count_within(xf, radii, mass)
    if groups is not None:
        n_y = np.bincount(groups)[groups] - 1
    else:
        n_y = _count_within(yf, radii, mass)
    return k_i, n_x, n_y


def _count_within_groups(pts, groups, mask, eps):
    out = np.zeros(pts.shape[0], dtype=np.int64)
    for g in np.unique(groups[mask]):
        idx = np.flatnonzero(groups == g)
        out[idx] = _count_within(pts[idx], np.full(idx.size, eps), np.ones(idx.size, bool))
    return out


def _check_blocks(*blocks: np.ndarray) -> int:
    n = blocks[0].shape[0]
    for b in blocks[1:]:
        if b.shape[0] != n:
            raise ShapeMismatch(f"blocks have {n} and {b.shape[0]} rows")
    return n


def knn_mi(x, y, cfg: KnnConfig = KnnConfig(), *, discrete_y: bool | None = None) -> MiEstimate:
    """Estimate I(X; Y) in nats from paired samples.

    ``y`` is treated as discrete class labels when it has an integer or bool
    dtype, unless ``discrete_y`` says otherwise. Negative raw estimates are
    clamped to zero and flagged.
    """
    xb = _as_block(x)
    yb = _as_block(y)
    n = _check_blocks(xb, yb)
    if xb.shape[1] == 0 or yb.shape[1] == 0:
        return MiEstimate(0.0, n, int(cfg.k), False, 0.0)
    if n <= cfg.k:
        raise TooFewSamples(f"need more than k={cfg.k} samples, got {n}")
    raw = _raw_mi(xb, yb, int(cfg.k), cfg.tie_epsilon, _is_discrete(yb, discrete_y))
    return MiEstimate(max(raw, 0.0), n, int(cfg.k), raw < 0, raw)


def knn_cmi(
    y, x_a, x_c, cfg: KnnConfig = KnnConfig(), *, discrete_y: bool | None = None
) -> MiEstimate:
    """Estimate I(Y; X_A | X_C) as I(Y; X_A, X_C) - I(Y; X_C).

    Both terms use the same k and the same coordinates. With an empty
    conditioning block this is exactly :func:`knn_mi`.
    """
    yb = _as_block(y)
    xa = _as_block(x_a)
    xc = _as_block(x_c) if x_c is not None else np.empty((yb.shape[0], 0))
    n = _check_blocks(yb, xa, xc)
    if xc.shape[1] == 0:
        return knn_mi(xa, yb, cfg, discrete_y=discrete_y)
    if n <= cfg.k:
        raise TooFewSamples(f"need more than k={cfg.k} samples, got {n}")
    disc = _is_discrete(yb, discrete_y)
    full = _raw_mi(np.hstack([xa, xc]), yb, int(cfg.k), cfg.tie_epsilon, disc)
    cond = _raw_mi(xc, yb, int(cfg.k), cfg.tie_epsilon, disc)
    raw = full - cond
    return MiEstimate(max(raw, 0.0), n, int(cfg.k), raw < 0, raw)
