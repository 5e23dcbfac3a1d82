import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import digamma as sp_digamma

from cmifs import estimator
from cmifs.errors import NonPositiveArgument, ShapeMismatch, TooFewSamples
from cmifs.estimator import KnnConfig, auto_k, digamma, knn_cmi, knn_mi

EULER_GAMMA = -0.5772156649015329  # mpmath.digamma(1) at 30 digits, rounded


def gaussian_mi(rho):
    return -0.5 * math.log(1 - rho**2)


def correlated_pair(rho, n, seed):
    rng = np.random.default_rng(seed)
    z = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=n)
    return z[:, 0], z[:, 1]


# -- digamma ------------------------------------------------------------------


def test_digamma_one():
    mpmath.mp.dps = 30
    assert float(mpmath.digamma(1)) == pytest.approx(EULER_GAMMA, abs=1e-15)
    assert digamma(1.0) == pytest.approx(EULER_GAMMA, abs=1e-10)


def test_digamma_recurrence():
    assert digamma(2.0) == pytest.approx(digamma(1.0) + 1.0, abs=1e-12)
    assert digamma(10.0) - digamma(9.0) == pytest.approx(1 / 9, abs=1e-12)


@pytest.mark.parametrize("x", [1e-3, 0.1, 0.5, 1.5, 2.0, 5.999, 6.0, 17.25, 1e3, 1e7])
def test_digamma_matches_high_precision(x):
    mpmath.mp.dps = 40
    assert digamma(x) == pytest.approx(float(mpmath.digamma(x)), abs=1e-10, rel=1e-12)


def test_digamma_vectorized():
    xs = np.arange(1, 3000, dtype=float)
    assert np.max(np.abs(digamma(xs) - sp_digamma(xs))) < 1e-10


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_digamma_rejects_non_positive(bad):
    with pytest.raises(NonPositiveArgument):
        digamma(bad)


# -- reference implementations ------------------------------------------------


def naive_ksg(x, y, k):
    """Classic KSG estimator (first variant), one point at a time."""
    x = x.reshape(len(x), -1)
    y = y.reshape(len(y), -1)
    n = len(x)
    acc = 0.0
    for i in range(n):
        dx = np.abs(x - x[i]).max(axis=1)
        dy = np.abs(y - y[i]).max(axis=1)
        dj = np.maximum(dx, dy)
        dj[i] = np.inf
        eps = np.sort(dj)[k - 1]
        nx = np.sum(dx < eps) - 1
        ny = np.sum(dy < eps) - 1
        acc += sp_digamma(nx + 1) + sp_digamma(ny + 1)
    return sp_digamma(k) + sp_digamma(n) - acc / n


def naive_mixed(x, y, k, eps=1e-12):
    """Mixed estimator with explicit duplicate handling; continuous y only.

    Distances within ``eps`` of each other count as equal.
    """
    x = x.reshape(len(x), -1)
    y = y.reshape(len(y), -1)
    n = len(x)
    acc = 0.0
    for i in range(n):
        dx = np.abs(x - x[i]).max(axis=1)
        dy = np.abs(y - y[i]).max(axis=1)
        dj = np.maximum(dx, dy)
        dj[i] = np.inf
        rho = np.sort(dj)[k - 1]
        if rho <= eps:
            ki = np.sum(dj <= eps)
            nx, ny = np.sum(dx <= eps) - 1, np.sum(dy <= eps) - 1
        else:
            ki = k
            nx, ny = np.sum(dx < rho - eps) - 1, np.sum(dy < rho - eps) - 1
        acc += sp_digamma(ki) - sp_digamma(nx + 1) - sp_digamma(ny + 1)
    return sp_digamma(n) + acc / n


def test_reduces_to_ksg_on_continuous_data():
    x, y = correlated_pair(0.6, 300, 11)
    est = knn_mi(x, y, KnnConfig(4))
    assert est.raw == pytest.approx(naive_ksg(x, y, 4), abs=1e-12)


def test_mixed_matches_naive_with_duplicates():
    rng = np.random.default_rng(5)
    x = np.round(rng.normal(size=(250, 2)), 1)
    y = np.round(x[:, 0] + rng.normal(size=250), 0)
    est = knn_mi(x, y, KnnConfig(5), discrete_y=False)
    assert est.raw == pytest.approx(naive_mixed(x, y, 5), abs=1e-12)


def test_tree_path_matches_brute_force():
    rng = np.random.default_rng(2)
    x = np.round(rng.normal(size=(700, 3)), 1)
    y = np.round(rng.normal(size=(700, 1)), 1)
    labels = rng.integers(0, 3, 700)
    for yy, disc in ((y, False), (labels, True)):
        brute = estimator._raw_mi(x, yy, 5, 1e-12, disc)
        tree = estimator._raw_mi(x, yy, 5, 1e-12, disc, brute_force_limit=100)
        assert brute == tree


# -- statistical behaviour ------------------------------------------------------


def test_independent_gaussians_near_zero():
    vals = [knn_mi(*correlated_pair(0.0, 2000, s), KnnConfig(5)).value for s in range(20)]
    assert np.mean(vals) <= 0.02


@pytest.mark.parametrize("rho", [0.5, 0.9])
def test_correlated_gaussians(rho):
    vals = [knn_mi(*correlated_pair(rho, 2000, s), KnnConfig(5)).value for s in range(10)]
    assert abs(np.mean(vals) - gaussian_mi(rho)) <= 0.05


def test_identical_discrete_labels_give_ln2():
    y = np.repeat([0, 1], 500)
    est = knn_mi(y.astype(float), y, KnnConfig(5))
    assert abs(est.value - math.log(2)) <= 0.02


def xor_sample(n, seed):
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(n, 2))
    return bits[:, 0] ^ bits[:, 1], bits[:, 0].astype(float), bits[:, 1].astype(float)


def test_xor_cmi_and_marginal():
    cmi, mi = [], []
    for s in range(5):
        y, x1, x2 = xor_sample(2000, s)
        cmi.append(knn_cmi(y, x1, x2, KnnConfig(5)).value)
        mi.append(knn_mi(x1, y, KnnConfig(5)).value)
    assert abs(np.mean(cmi) - math.log(2)) <= 0.05
    assert np.mean(mi) <= 0.02


def test_cmi_empty_conditioning_is_mi():
    x, y = correlated_pair(0.7, 500, 1)
    a = knn_cmi(y, x, np.empty((500, 0)), KnnConfig(5))
    b = knn_mi(x, y, KnnConfig(5))
    assert a == b
    assert knn_cmi(y, x, None, KnnConfig(5)) == b


def test_cmi_of_duplicated_column_is_small():
    rng = np.random.default_rng(4)
    xc = rng.normal(size=(2000, 2))
    y = xc[:, 0] + 0.5 * xc[:, 1] + 0.3 * rng.normal(size=2000)
    est = knn_cmi(y, xc[:, :1], xc, KnnConfig(5))
    assert est.value <= 0.05


def test_nested_gaussians_monotone():
    diffs = []
    for s in range(5):
        rng = np.random.default_rng(100 + s)
        x = rng.normal(size=(1000, 2))
        y = x[:, 0] + x[:, 1] + rng.normal(size=1000)
        both = knn_mi(x, y, KnnConfig(5)).value
        one = knn_mi(x[:, :1], y, KnnConfig(5)).value
        diffs.append(both - one)
    assert np.mean(diffs) >= -0.03


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_invariance_and_non_negativity(seed):
    rng = np.random.default_rng(seed)
    x = np.round(rng.normal(size=(120, 2)), 1)
    y = rng.integers(0, 2, 120)
    perm = rng.permutation(120)
    a = knn_mi(x, y, KnnConfig(4))
    b = knn_mi(x[perm], y[perm], KnnConfig(4))
    assert a.value == b.value
    assert a.value >= 0
    assert a.clamped == (a.raw < 0)
    c = knn_cmi(y, x[:, :1], x[:, 1:], KnnConfig(4))
    assert c.value >= 0


def test_errors_and_degenerate_blocks():
    x, y = correlated_pair(0.2, 10, 0)
    with pytest.raises(TooFewSamples):
        knn_mi(x, y, KnnConfig(10))
    with pytest.raises(ShapeMismatch):
        knn_mi(x, y[:5], KnnConfig(3))
    est = knn_mi(np.empty((10, 0)), y, KnnConfig(3))
    assert est.value == 0.0 and not est.clamped


def test_auto_k():
    assert auto_k(20) == 3
    assert auto_k(500) == 25
    assert auto_k(2000) == 100
