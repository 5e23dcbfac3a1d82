"""Exact information quantities and ideal errors on small discrete joints.

A :class:`TabularJoint` stores the full probability table p(x_1, ..., x_d, y)
as an array of shape ``arities + (n_targets,)``. Everything here is computed by
direct summation, so these functions serve as the reference against which the
bounds and the greedy selection are checked.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bounds import classification_bound, regression_bound
from .data import TaskKind, complement, index_set
from .errors import NormalizationError, OutOfRange, WrongTaskKind

SCHEMA_VERSION = 1
CLASSES = "classes"
REAL = "real"
MAX_FEATURES = 5
MAX_ARITY = 4
MAX_TARGETS = 4
# exact quantities below this magnitude are rounding noise
_ZERO_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class TabularJoint:
    arities: tuple[int, ...]
    targets: tuple[float, ...]
    pmf: np.ndarray
    target_kind: str = CLASSES

    def __post_init__(self):
        arities = tuple(int(a) for a in self.arities)
        object.__setattr__(self, "arities", arities)
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if not 1 <= len(arities) <= MAX_FEATURES:
            raise OutOfRange(f"need 1..{MAX_FEATURES} features, got {len(arities)}")
        if any(not 1 <= a <= MAX_ARITY for a in arities):
            raise OutOfRange(f"feature arities must lie in 1..{MAX_ARITY}")
        if not 1 <= len(self.targets) <= MAX_TARGETS:
            raise OutOfRange(f"need 1..{MAX_TARGETS} target values")
        if self.target_kind not in (CLASSES, REAL):
            raise OutOfRange(f"unknown target kind {self.target_kind!r}")
        if len(set(self.targets)) != len(self.targets):
            raise OutOfRange("target values must be distinct")
        p = np.asarray(self.pmf, dtype=np.float64)
        if p.shape != arities + (len(self.targets),):
            raise OutOfRange(f"pmf shape {p.shape} does not match arities {arities}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise NormalizationError("pmf has negative or non-finite entries")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-12:
            raise NormalizationError(f"pmf sums to {total!r}, not 1 (tolerance 1e-12)")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "pmf", p)

    @property
    def n_features(self) -> int:
        return len(self.arities)

    @property
    def n_cells(self) -> int:
        return self.pmf.size

    @property
    def bound(self) -> float:
        """Exact B = max |y| over the target support."""
        return max(abs(t) for t in self.targets)

    @property
    def task(self) -> TaskKind:
        if self.target_kind == CLASSES:
            return TaskKind.classification()
        return TaskKind.regression(self.bound if self.bound > 0 else 1.0)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        cells = []
        for idx in itertools.product(*(range(a) for a in self.arities)):
            for t, yv in enumerate(self.targets):
                y = int(yv) if self.target_kind == CLASSES else yv
                cells.append([list(idx), y, float(self.pmf[idx + (t,)])])
        return {
            "schema_version": SCHEMA_VERSION,
            "arities": list(self.arities),
            "target_kind": self.target_kind,
            "targets": [int(t) if self.target_kind == CLASSES else t for t in self.targets],
            "pmf": cells,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TabularJoint":
        try:
            arities = tuple(int(a) for a in doc["arities"])
            targets = tuple(float(t) for t in doc["targets"])
            kind = doc.get("target_kind", CLASSES)
            cells = doc["pmf"]
        except (KeyError, TypeError, ValueError) as exc:
            raise OutOfRange(f"malformed joint document: {exc}") from None
        if len(arities) > MAX_FEATURES or any(not 1 <= a <= MAX_ARITY for a in arities):
            raise OutOfRange("arities out of range")
        if len(targets) > MAX_TARGETS:
            raise OutOfRange("too many target values")
        pos = {t: i for i, t in enumerate(targets)}
        p = np.zeros(arities + (len(targets),))
        for x, y, prob in cells:
            x = tuple(int(v) for v in x)
            if len(x) != len(arities) or any(not 0 <= v < a for v, a in zip(x, arities)):
                raise OutOfRange(f"cell {x} outside the feature space")
            if float(y) not in pos:
                raise OutOfRange(f"target value {y} not declared")
            p[x + (pos[float(y)],)] += float(prob)
        return cls(arities, targets, p, kind)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TabularJoint":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "TabularJoint":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


# -- marginals ----------------------------------------------------------------


def _marginal(j: TabularJoint, keep: Iterable[int], with_y: bool) -> np.ndarray:
    """Sum out every feature not in ``keep``; axes stay in place (size 1)."""
    keep = set(keep)
    axes = [i for i in range(j.n_features) if i not in keep]
    if not with_y:
        axes.append(j.n_features)
    return j.pmf.sum(axis=tuple(axes), keepdims=True)


def conditional_mi(j: TabularJoint, a: Iterable[int], c: Iterable[int] = ()) -> float:
    """Exact I(Y; X_a | X_c) in nats for disjoint index sets ``a`` and ``c``."""
    a = index_set(a, j.n_features)
    c = index_set(c, j.n_features)
    if set(a) & set(c):
        raise OutOfRange("candidate and conditioning sets overlap")
    if not a:
        return 0.0
    p_acy = _marginal(j, a + c, True)
    p_ac = _marginal(j, a + c, False)
    p_cy = _marginal(j, c, True)
    p_c = _marginal(j, c, False)
    num = p_acy * p_c
    den = p_ac * p_cy
    pos = p_acy > 0
    ratio = np.divide(num, den, out=np.ones_like(num), where=pos)
    terms = np.where(pos, p_acy * np.log(np.where(pos, ratio, 1.0)), 0.0)
    value = float(terms.sum())
    return 0.0 if value < _ZERO_TOL else value


def exact_cmi(j: TabularJoint, a: Iterable[int]) -> float:
    """Feature-removal score: I(Y; X_A | X_rest)."""
    a = index_set(a, j.n_features)
    return conditional_mi(j, a, complement(a, j.n_features))


def mutual_info(j: TabularJoint, s: Iterable[int]) -> float:
    return conditional_mi(j, s, ())


def entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mutual_info_entropy_form(j: TabularJoint, s: Iterable[int]) -> float:
    """I(Y; X_s) computed as H(Y) - H(Y | X_s); an independent route to :func:`mutual_info`."""
    s = index_set(s, j.n_features)
    p_sy = _marginal(j, s, True)
    p_s = _marginal(j, s, False)
    h_y = entropy(_marginal(j, (), True))
    h_y_given_s = entropy(p_sy) - entropy(p_s)
    return h_y - h_y_given_s


# -- ideal errors -------------------------------------------------------------


def bayes_error(j: TabularJoint, s: Iterable[int]) -> float:
    """Error of the MAP classifier that observes only X_s."""
    if j.target_kind != CLASSES:
        raise WrongTaskKind("bayes_error needs a class-valued target")
    s = index_set(s, j.n_features)
    p_sy = _marginal(j, s, True)
    return max(0.0, 1.0 - float(p_sy.max(axis=-1).sum()))


def mmse_error(j: TabularJoint, s: Iterable[int]) -> float:
    """E[(Y - E[Y | X_s])^2], exactly."""
    if j.target_kind != REAL:
        raise WrongTaskKind("mmse_error needs a real-valued target")
    s = index_set(s, j.n_features)
    p_sy = _marginal(j, s, True)
    p_s = p_sy.sum(axis=-1, keepdims=True)
    y = np.asarray(j.targets).reshape((1,) * j.n_features + (-1,))
    cond_mean = np.divide((p_sy * y).sum(axis=-1, keepdims=True), p_s,
                          out=np.zeros_like(p_s), where=p_s > 0)
    return float((p_sy * (y - cond_mean) ** 2).sum())


def irreducible_error(j: TabularJoint) -> float:
    full = range(j.n_features)
    return bayes_error(j, full) if j.target_kind == CLASSES else mmse_error(j, full)


# -- generators ---------------------------------------------------------------


def random_joint(
    d: int,
    arity: int,
    m: int,
    seed: int,
    target_values: Sequence[float] | None = None,
) -> TabularJoint:
    """Joint whose cell probabilities are drawn from a flat Dirichlet.

    Without ``target_values`` the target is a class in ``0..m-1``; with them it
    is real-valued and ``m`` must equal their count.
    """
    if not 1 <= d <= MAX_FEATURES:
        raise OutOfRange(f"d must lie in 1..{MAX_FEATURES}")
    if not 1 <= arity <= 3:
        raise OutOfRange("arity must lie in 1..3")
    if not 1 <= m <= 3:
        raise OutOfRange("m must lie in 1..3")
    if target_values is not None and len(target_values) != m:
        raise OutOfRange("need exactly m target values")
    rng = np.random.default_rng(seed)
    shape = (arity,) * d + (m,)
    p = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    p = p / p.sum()
    if target_values is None:
        return TabularJoint(shape[:-1], tuple(range(m)), p, CLASSES)
    return TabularJoint(shape[:-1], tuple(target_values), p, REAL)


def xor_joint() -> TabularJoint:
    """Two fair independent bits and Y = X1 xor X2."""
    p = np.zeros((2, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            p[a, b, a ^ b] = 0.25
    return TabularJoint((2, 2), (0, 1), p)


def joint_from_function(arities, weights, fn, targets, kind=CLASSES) -> TabularJoint:
    """Deterministic-target joint: p(x) from ``weights`` (or uniform), Y = fn(x)."""
    arities = tuple(arities)
    p = np.zeros(arities + (len(targets),))
    cells = list(itertools.product(*(range(a) for a in arities)))
    for cell in cells:
        w = 1.0 / len(cells) if weights is None else weights(cell)
        p[cell + (list(targets).index(fn(cell)),)] += w
    return TabularJoint(arities, targets, p / p.sum(), kind)


# -- bound verification -------------------------------------------------------


@dataclass(frozen=True)
class SubsetCheck:
    removed: tuple[int, ...]
    score: float
    error: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.error


@dataclass
class BoundReport:
    target_kind: str
    ideal_error: float
    bound_b: float | None
    checks: list[SubsetCheck] = field(default_factory=list)
    tolerance: float = 1e-12

    @property
    def all_pass(self) -> bool:
        return all(c.margin >= -self.tolerance for c in self.checks)

    @property
    def failures(self) -> list[SubsetCheck]:
        return [c for c in self.checks if c.margin < -self.tolerance]

    def min_margin(self) -> float:
        return min(c.margin for c in self.checks)


def all_subsets(d: int):
    for r in range(d + 1):
        yield from itertools.combinations(range(d), r)


def verify_bounds(j: TabularJoint, tolerance: float = 1e-12) -> BoundReport:
    """Check the ideal-error bound for every feature subset removed from ``j``."""
    d = j.n_features
    if j.target_kind == CLASSES:
        eps = bayes_error(j, range(d))
        report = BoundReport(CLASSES, eps, None, tolerance=tolerance)
        for a in all_subsets(d):
            nu = exact_cmi(j, a)
            err = bayes_error(j, complement(a, d))
            report.checks.append(SubsetCheck(a, nu, err, classification_bound(eps, nu)))
    else:
        sigma2 = mmse_error(j, range(d))
        b = j.bound
        report = BoundReport(REAL, sigma2, b, tolerance=tolerance)
        for a in all_subsets(d):
            nu = exact_cmi(j, a)
            err = mmse_error(j, complement(a, d))
            bound = regression_bound(sigma2, b, nu) if b > 0 else sigma2
            report.checks.append(SubsetCheck(a, nu, err, bound))
    return report


def telescoping_gaps(j: TabularJoint, order: Sequence[int]) -> list[float]:
    """|sum of step CMIs - score of removed set| after each removal in ``order``."""
    d = j.n_features
    removed: list[int] = []
    total = 0.0
    gaps = []
    for i in order:
        rest = [r for r in range(d) if r not in removed and r != i]
        total += conditional_mi(j, [i], rest)
        removed.append(i)
        gaps.append(abs(total - exact_cmi(j, removed)))
    return gaps

