import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmifs.bounds import (
    classification_bound,
    fit_linear_mmse,
    linear_mmse,
    linear_subset_bound,
    pearson_matrix,
    regression_bound,
    residual_mse,
)
from cmifs.data import Dataset, TaskKind
from cmifs.errors import (
    NegativeInput,
    OutOfRange,
    SingularCovariance,
    WrongTaskKind,
    ZeroVarianceColumn,
)


def regression_ds(x, y):
    x = np.asarray(x, dtype=float)
    return Dataset(x, tuple(f"x{i + 1}" for i in range(x.shape[1])), np.asarray(y, float), TaskKind.regression())


def test_regression_bound_values():
    assert regression_bound(0.3, 1.0, 0.0) == 0.3
    assert regression_bound(0.0, 2.0, 0.1) == pytest.approx(0.8)


def test_classification_bound_values():
    assert classification_bound(0.1, 0.0) == 0.1
    assert classification_bound(0.1, 0.02) == pytest.approx(0.3)
    assert classification_bound(0.5, 1.0) > 1
    assert classification_bound(0.5, 1.0, clip=True) == 1.0


def test_bound_argument_errors():
    with pytest.raises(NegativeInput):
        regression_bound(-0.1, 1.0, 0.0)
    with pytest.raises(NegativeInput):
        regression_bound(0.1, 1.0, -1e-3)
    with pytest.raises(OutOfRange):
        classification_bound(1.5, 0.0)
    with pytest.raises(OutOfRange):
        classification_bound(0.1, -0.1)


@given(st.floats(0, 1), st.floats(0, 5), st.floats(0, 5))
def test_bounds_monotone_in_score(eps, nu1, nu2):
    lo, hi = sorted((nu1, nu2))
    assert classification_bound(eps, lo) <= classification_bound(eps, hi)
    assert regression_bound(eps, 1.5, lo) <= regression_bound(eps, 1.5, hi)


def test_exact_line_recovered():
    x = np.linspace(-1, 1, 20)
    fit = linear_mmse(x, 2 * x + 1)
    assert fit.weights[0] == pytest.approx(2.0, abs=1e-12)
    assert fit.bias == pytest.approx(1.0, abs=1e-12)
    assert fit.mse == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_closed_form_mse_matches_residuals(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((200, 3))
    y = x @ [1.0, -0.5, 0.2] + rng.standard_normal(200)
    fit = linear_mmse(x, y)
    assert fit.mse == pytest.approx(residual_mse(fit, x, y), abs=1e-8)
    # agrees with a least-squares solver
    coef, *_ = np.linalg.lstsq(np.column_stack([x, np.ones(200)]), y, rcond=None)
    assert np.allclose(fit.weights, coef[:3], atol=1e-10)


def test_independent_target_keeps_variance():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((4000, 1))
    y = rng.standard_normal(4000)
    fit = linear_mmse(x, y)
    assert fit.mse == pytest.approx(np.var(y, ddof=1), rel=2e-3)


def test_noisy_sum_mse():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((5000, 2))
    y = x[:, 0] + x[:, 1] + rng.normal(0, 0.1, 5000)
    assert fit_linear_mmse(regression_ds(x, y), [0, 1]).mse == pytest.approx(0.01, abs=0.002)


def test_fit_requires_regression():
    ds = Dataset(np.eye(3), ("a", "b", "c"), np.array([0, 1, 0]), TaskKind.classification())
    with pytest.raises(WrongTaskKind):
        fit_linear_mmse(ds, [0])
    with pytest.raises(WrongTaskKind):
        linear_subset_bound(ds, [0])


def test_singular_gets_ridge():
    rng = np.random.default_rng(0)
    z = rng.standard_normal(100)
    fit = linear_mmse(np.column_stack([z, z]), 3 * z)
    assert fit.ridge > 0
    assert fit.mse == pytest.approx(0.0, abs=1e-6)
    with pytest.raises(SingularCovariance):
        linear_mmse(np.zeros((10, 2)), rng.standard_normal(10))


def test_pearson_cases():
    rng = np.random.default_rng(5)
    z = rng.standard_normal(300)
    ds = regression_ds(np.column_stack([z, -2 * z + 1, rng.standard_normal(300)]), z)
    r, ry = pearson_matrix(ds)
    assert r[0, 1] == pytest.approx(-1.0)
    assert np.allclose(np.diag(r), 1.0)
    assert ry[0] == pytest.approx(1.0)
    assert abs(r[0, 2]) < 0.2
    with pytest.raises(ZeroVarianceColumn):
        pearson_matrix(regression_ds(np.column_stack([z, np.ones(300)]), z))


def test_nothing_removed_gives_full_fit(small_regression):
    rep = linear_subset_bound(small_regression, [])
    assert rep.general_bound == rep.sigma_full == rep.uncorrelated_bound
    assert rep.reduced_rmse == pytest.approx(rep.sigma_full)


def test_orthogonal_singleton():
    rng = np.random.default_rng(7)
    n = 20000
    x = rng.standard_normal((n, 2))
    y = 1.5 * x[:, 0] + 0.5 * x[:, 1] + 0.1 * rng.standard_normal(n)
    rep = linear_subset_bound(regression_ds(x, y), [1])
    # with independent features the bound is sigma + |w_2| sigma_2
    assert rep.per_feature[0]["weight"] == pytest.approx(0.5, abs=0.01)
    assert rep.per_feature[0]["residual_std"] == pytest.approx(1.0, abs=0.02)
    assert rep.reduced_rmse <= rep.general_bound + 1e-12
    assert rep.premise_satisfied
    assert rep.reduced_rmse <= rep.uncorrelated_bound + 0.01


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.integers(0, 3), unique=True, max_size=4))
def test_general_bound_holds(seed, removed):
    rng = np.random.default_rng(seed)
    mix = rng.standard_normal((4, 4))
    x = rng.standard_normal((300, 4)) @ mix
    y = x @ rng.standard_normal(4) + rng.standard_normal(300)
    rep = linear_subset_bound(regression_ds(x, y), removed)
    assert rep.reduced_rmse <= rep.general_bound * (1 + 1e-9) + 1e-9


def test_fewer_features_never_lower_mse():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((500, 4))
    y = x @ [1, 1, 1, 1] + rng.standard_normal(500)
    mses = [linear_mmse(x[:, :m], y).mse for m in range(5)]
    assert all(a >= b - 1e-12 for a, b in zip(mses, mses[1:]))


def test_report_json(small_regression):
    doc = json.loads(linear_subset_bound(small_regression, [1]).to_json())
    assert doc["removed"] == [1] and doc["kept"] == [0]
    assert doc["general_bound_squared"] == pytest.approx(doc["general_bound"] ** 2)
    assert math.isfinite(doc["uncorrelated_bound"])
