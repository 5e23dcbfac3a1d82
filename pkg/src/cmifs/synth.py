"""Seeded synthetic problems.

Every generator draws from a single ``numpy.random.Generator`` (PCG64) seeded
with ``spec.seed``; the draw order is fixed and documented per generator, so a
spec maps to exactly one dataset. Sub-seeds for batches of problems come from
:func:`derive_seed`.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .data import Dataset, TaskKind
from .errors import OutOfRange, RejectionStall

COND_GAUSS = "conditional-gaussian"
EXAMPLE1 = "example1"
LINEAR_GAUSS = "linear-gaussian"
#: Rejection sampling gives up when a draw is accepted less often than this.
MIN_ACCEPTANCE = 1e-6


def derive_seed(seed: int, *keys) -> int:
    """Stable 63-bit sub-seed for (seed, key, ...); keys may be ints or strings."""
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for key in keys:
        words.append(zlib.crc32(str(key).encode()) if isinstance(key, str) else int(key) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    n: int
    d: int
    k: int = 1
    seed: int = 0
    a: float = 1.0
    b: float = 1.0
    sigma_z: float = 1.0
    weights: tuple[float, ...] | None = None
    noise_std: float = 0.1
    sampler: str = "conditional"

    def __post_init__(self):
        if self.kind not in (COND_GAUSS, EXAMPLE1, LINEAR_GAUSS):
            raise OutOfRange(f"unknown generator kind {self.kind!r}")
        if self.n < 1 or self.d < 1 or not 1 <= self.k <= self.d:
            raise OutOfRange(f"need n >= 1 and 1 <= k <= d, got n={self.n} d={self.d} k={self.k}")
        if self.kind == EXAMPLE1 and self.d != 2:
            raise OutOfRange("example1 has exactly two features")
        if self.weights is not None and len(self.weights) != self.d:
            raise OutOfRange("need one weight per feature")
        if self.sampler not in ("conditional", "rejection"):
            raise OutOfRange(f"unknown sampler {self.sampler!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out

    def to_json(self) -> str:
        return json.dumps({"schema_version": 1, "spec": self.to_dict()}, indent=2)


def _names(d: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(d))


def acceptance_probability(k: int) -> float:
    """P(sum of k standard normals > 3(k - 2))."""
    return float(stats.norm.sf(3.0 * (k - 2) / math.sqrt(k)))


@dataclass
class SamplingStats:
    proposals: int = 0
    accepted: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposals if self.proposals else float("nan")


def _conditioned_block_rejection(rng, n_rows, k, stats_out):
    threshold = 3.0 * (k - 2)
    if acceptance_probability(k) < MIN_ACCEPTANCE:
        raise RejectionStall(
            f"acceptance probability {acceptance_probability(k):.3g} for k={k} is below {MIN_ACCEPTANCE}"
        )
    rows = []
    have = 0
    while have < n_rows:
        batch = rng.standard_normal((max(64, 2 * (n_rows - have)), k))
        ok = batch[batch.sum(axis=1) > threshold]
        stats_out.proposals += batch.shape[0]
        stats_out.accepted += ok.shape[0]
        rows.append(ok)
        have += ok.shape[0]
    return np.vstack(rows)[:n_rows]


def _conditioned_block_exact(rng, n_rows, k):
    """Exact draw of k iid N(0,1) conditioned on their sum exceeding 3(k - 2).

    The sum S ~ N(0, k) is drawn from its truncated law; the deviations from
    the mean are independent of S and come from centring a fresh Gaussian row.
    """
    threshold = 3.0 * (k - 2)
    scale = math.sqrt(k)
    s = stats.truncnorm.rvs(threshold / scale, np.inf, scale=scale, size=n_rows, random_state=rng)
    s = np.maximum(s, np.nextafter(threshold, np.inf))
    z = rng.standard_normal((n_rows, k))
    return z - z.mean(axis=1, keepdims=True) + (s / k)[:, None]


def gen_conditional_gaussian(spec: SynthSpec, stats_out: SamplingStats | None = None) -> Dataset:
    """Binary problem: class 1 has its first k features conditioned on a large sum.

    Draw order: labels (n Bernoulli(1/2)), then the n x d standard-normal
    matrix, then the conditioned block for the class-1 rows.
    """
    if spec.kind != COND_GAUSS:
        raise OutOfRange("spec is not a conditional-gaussian spec")
    rng = np.random.default_rng(spec.seed)
    y = (rng.random(spec.n) < 0.5).astype(np.int64)
    x = rng.standard_normal((spec.n, spec.d))
    ones = np.flatnonzero(y == 1)
    if ones.size:
        if spec.sampler == "rejection":
            block = _conditioned_block_rejection(rng, ones.size, spec.k, stats_out or SamplingStats())
        else:
            block = _conditioned_block_exact(rng, ones.size, spec.k)
        x[ones, : spec.k] = block
    return Dataset(x, _names(spec.d), y, TaskKind.classification(), "y", ("0", "1"))


def gen_example1(spec: SynthSpec) -> Dataset:
    """X1 = Z, X2 = exp(Z), Y = a X1 + b X2 with Z ~ N(0, sigma_z^2)."""
    if spec.kind != EXAMPLE1:
        raise OutOfRange("spec is not an example1 spec")
    rng = np.random.default_rng(spec.seed)
    z = rng.normal(0.0, spec.sigma_z, size=spec.n)
    x = np.column_stack([z, np.exp(z)])
    y = spec.a * x[:, 0] + spec.b * x[:, 1]
    return Dataset(x, _names(2), y, TaskKind.regression())


def gen_linear_gaussian(spec: SynthSpec) -> Dataset:
    """X ~ N(0, I_d), Y = w.X + N(0, noise_std^2).

    Draw order: weights (d standard normals, only when ``spec.weights`` is
    None), then the n x d feature matrix, then the n noise values.
    """
    if spec.kind != LINEAR_GAUSS:
        raise OutOfRange("spec is not a linear-gaussian spec")
    rng = np.random.default_rng(spec.seed)
    w = np.asarray(spec.weights, dtype=np.float64) if spec.weights is not None else rng.standard_normal(spec.d)
    x = rng.standard_normal((spec.n, spec.d))
    y = x @ w + spec.noise_std * rng.standard_normal(spec.n)
    return Dataset(x, _names(spec.d), y, TaskKind.regression())


def generate(spec: SynthSpec) -> Dataset:
    return {COND_GAUSS: gen_conditional_gaussian, EXAMPLE1: gen_example1,
            LINEAR_GAUSS: gen_linear_gaussian}[spec.kind](spec)


def linear_weights(spec: SynthSpec) -> np.ndarray:
    """The weight vector :func:`gen_linear_gaussian` uses for ``spec``."""
    if spec.weights is not None:
        return np.asarray(spec.weights, dtype=np.float64)
    return np.random.default_rng(spec.seed).standard_normal(spec.d)
