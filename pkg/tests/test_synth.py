import json

import numpy as np
import pytest
from scipy import stats

from cmifs.bounds import fit_linear_mmse
from cmifs.data import write_csv
from cmifs.errors import OutOfRange, RejectionStall
from cmifs.synth import (
    COND_GAUSS,
    EXAMPLE1,
    LINEAR_GAUSS,
    SamplingStats,
    SynthSpec,
    acceptance_probability,
    derive_seed,
    gen_conditional_gaussian,
    generate,
    linear_weights,
)


def test_conditional_gaussian_shape_and_condition():
    spec = SynthSpec(COND_GAUSS, n=400, d=12, k=5, seed=3)
    ds = generate(spec)
    assert ds.features.shape == (400, 12)
    assert set(np.unique(ds.target)) == {0, 1}
    ones = ds.features[ds.target == 1, :5]
    assert np.all(ones.sum(axis=1) > 3 * (5 - 2))


@pytest.mark.parametrize("sampler", ["conditional", "rejection"])
def test_conditioned_block_law(sampler):
    # the conditioned sum follows the truncated N(0, k) law either way
    k = 3
    ds = generate(SynthSpec(COND_GAUSS, n=8000, d=k, k=k, seed=1, sampler=sampler))
    s = ds.features[ds.target == 1].sum(axis=1)
    law = stats.truncnorm(3 / np.sqrt(k), np.inf, scale=np.sqrt(k))
    assert stats.kstest(s, law.cdf).pvalue > 1e-3
    # class-0 rows stay standard normal
    assert stats.kstest(ds.features[ds.target == 0, 0], "norm").pvalue > 1e-3


def test_rejection_acceptance_rate():
    st = SamplingStats()
    gen_conditional_gaussian(SynthSpec(COND_GAUSS, n=4000, d=2, k=2, seed=0, sampler="rejection"), st)
    assert acceptance_probability(2) == pytest.approx(0.5)
    assert st.acceptance_rate == pytest.approx(0.5, abs=0.02)


def test_rejection_stalls_for_large_k():
    with pytest.raises(RejectionStall):
        generate(SynthSpec(COND_GAUSS, n=50, d=10, k=9, seed=0, sampler="rejection"))
    # the exact sampler handles the same spec
    assert generate(SynthSpec(COND_GAUSS, n=50, d=10, k=9, seed=0)).n_samples == 50


def test_example1_linear_case():
    ds = generate(SynthSpec(EXAMPLE1, n=500, d=2, a=1.0, b=0.0, seed=2))
    assert np.allclose(ds.features[:, 1], np.exp(ds.features[:, 0]))
    assert fit_linear_mmse(ds, [0]).mse <= 1e-9


def test_linear_gaussian_recovers_weights():
    spec = SynthSpec(LINEAR_GAUSS, n=200, d=4, seed=5, noise_std=0.0)
    ds = generate(spec)
    assert np.allclose(fit_linear_mmse(ds, range(4)).weights, linear_weights(spec), atol=1e-6)
    fixed = SynthSpec(LINEAR_GAUSS, n=10, d=2, weights=(1.0, -2.0))
    assert np.array_equal(linear_weights(fixed), [1.0, -2.0])


@pytest.mark.parametrize("kind,d,k", [(COND_GAUSS, 6, 3), (EXAMPLE1, 2, 1), (LINEAR_GAUSS, 3, 1)])
def test_same_spec_same_bytes(tmp_path, kind, d, k):
    spec = SynthSpec(kind, n=100, d=d, k=k, seed=42)
    write_csv(generate(spec), tmp_path / "a.csv")
    write_csv(generate(spec), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    other = SynthSpec(kind, n=100, d=d, k=k, seed=43)
    assert not np.array_equal(generate(other).features, generate(spec).features)


def test_spec_validation_and_json():
    for bad in (dict(kind="nope", n=10, d=2), dict(kind=COND_GAUSS, n=10, d=2, k=3),
                dict(kind=EXAMPLE1, n=10, d=3), dict(kind=LINEAR_GAUSS, n=10, d=2, weights=(1.0,))):
        with pytest.raises(OutOfRange):
            SynthSpec(**bad)
    doc = json.loads(SynthSpec(LINEAR_GAUSS, n=10, d=2, weights=(1.0, 2.0)).to_json())
    assert doc["spec"]["weights"] == [1.0, 2.0]


def test_derive_seed():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert len({derive_seed(1, "a", i) for i in range(100)}) == 100
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert 0 <= derive_seed(2**40, "x") < 2**63
