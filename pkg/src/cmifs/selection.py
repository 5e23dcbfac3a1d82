"""Greedy backward elimination and forward selection with pluggable stopping rules.

Scores come from a *scorer*: :class:`KnnScorer` estimates conditional mutual
information from samples, :class:`OracleScorer` computes it exactly from a
:class:`~cmifs.oracle.TabularJoint`. Both expose the same two methods, so the
greedy loops never know which one they are driving.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .data import Dataset, TaskKind, standardize, zscore
from .errors import EmptyFeatureSet, OutOfRange, TooFewSamples, WrongRuleVariant
from .estimator import KnnConfig, _raw_mi, auto_k
from .oracle import TabularJoint, conditional_mi, mutual_info

SCHEMA_VERSION = 1
BACKWARD = "backward"
FORWARD = "forward"


# -- stopping rules -------------------------------------------------------------


@dataclass(frozen=True)
class StoppingRule:
    """One of ``error``, ``fscore``, ``dfscore`` (parameter ``delta``) or ``nfeat`` (``k``)."""

    kind: str
    value: float

    KINDS = ("error", "fscore", "dfscore", "nfeat")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise OutOfRange(f"unknown stopping rule {self.kind!r}")
        if not math.isfinite(self.value) or self.value < 0:
            raise OutOfRange(f"rule parameter must be finite and >= 0, got {self.value}")
        if self.kind == "nfeat" and int(self.value) != self.value:
            raise OutOfRange("nfeat needs an integer feature count")

    @classmethod
    def error_budget(cls, delta: float) -> "StoppingRule":
        return cls("error", float(delta))

    @classmethod
    def feature_score(cls, delta: float) -> "StoppingRule":
        return cls("fscore", float(delta))

    @classmethod
    def delta_feature_score(cls, delta: float) -> "StoppingRule":
        return cls("dfscore", float(delta))

    @classmethod
    def num_features(cls, k: int) -> "StoppingRule":
        return cls("nfeat", int(k))

    @classmethod
    def parse(cls, text: str) -> "StoppingRule":
        """Parse ``kind:value``, e.g. ``error:0.05`` or ``nfeat:10``."""
        kind, sep, value = text.partition(":")
        if not sep:
            raise OutOfRange(f"stopping rule must look like kind:value, got {text!r}")
        try:
            v = float(value)
        except ValueError:
            raise OutOfRange(f"bad stopping-rule value {value!r}") from None
        return cls(kind.strip(), v)

    def __str__(self) -> str:
        v = int(self.value) if self.kind == "nfeat" else self.value
        return f"{self.kind}:{v}"


def stop_threshold(rule: StoppingRule, task: TaskKind) -> float:
    """Cumulative-CMI level that exhausts an error budget delta."""
    if rule.kind != "error":
        raise WrongRuleVariant(f"{rule} is not an error-budget rule")
    if task.is_classification:
        return rule.value**2 / 2.0
    return rule.value / (2.0 * task.bound**2)


# -- scorers --------------------------------------------------------------------


class Scorer(Protocol):
    n_features: int
    task: TaskKind

    def cmi(self, candidate: int, conditioning: tuple[int, ...]) -> tuple[float, bool]:
        """I(Y; X_candidate | X_conditioning), clamped at zero, plus the clamp flag."""

    def mi(self, features: tuple[int, ...]) -> float:
        """I(Y; X_features)."""

    def describe(self) -> dict: ...


class OracleScorer:
    def __init__(self, joint: TabularJoint):
        self.joint = joint
        self.n_features = joint.n_features
        self.task = joint.task

    def cmi(self, candidate, conditioning):
        return conditional_mi(self.joint, [candidate], conditioning), False

    def mi(self, features):
        return mutual_info(self.joint, features)

    def describe(self):
        return {"scorer": "oracle"}


class KnnScorer:
    """Mixed kNN estimates on one dataset.

    Joint-MI values are memoized per feature set. The max-norm does not depend
    on column order, so a cached value is bit-identical to a fresh one.
    """

    def __init__(self, ds: Dataset, cfg: KnnConfig | None = None, *, standardize_features: bool = True):
        if ds.n_features < 1:
            raise EmptyFeatureSet("dataset has no features")
        self.cfg = cfg if cfg is not None else KnnConfig(auto_k(ds.n_samples))
        if ds.n_samples <= self.cfg.k:
            raise TooFewSamples(f"need more than k={self.cfg.k} samples, got {ds.n_samples}")
        self.standardized = standardize_features
        self.ds = standardize(ds) if standardize_features else ds
        self.n_features = ds.n_features
        self.task = ds.task
        if ds.task.is_classification:
            self._y = np.asarray(ds.target, dtype=np.int64).reshape(-1, 1)
        else:
            y = np.asarray(ds.target, dtype=np.float64)
            self._y = (zscore(y) if standardize_features else y).reshape(-1, 1)
        self._discrete = ds.task.is_classification
        self._cache: dict[frozenset, float] = {}

    def raw_mi(self, features) -> float:
        key = frozenset(int(i) for i in features)
        if not key:
            return 0.0
        if key not in self._cache:
            cols = sorted(key)
            self._cache[key] = _raw_mi(
                self.ds.features[:, cols], self._y, int(self.cfg.k), self.cfg.tie_epsilon, self._discrete
            )
        return self._cache[key]

    def cmi(self, candidate, conditioning):
        if not conditioning:
            raw = self.raw_mi((candidate,))
        else:
            raw = self.raw_mi((candidate, *conditioning)) - self.raw_mi(conditioning)
        return max(raw, 0.0), raw < 0

    def mi(self, features):
        return max(self.raw_mi(features), 0.0)

    def describe(self):
        return {"scorer": "knn", **self.cfg.to_dict(), "standardized": self.standardized}


def make_scorer(source, cfg: KnnConfig | None = None, **kwargs) -> Scorer:
    if isinstance(source, TabularJoint):
        return OracleScorer(source)
    if isinstance(source, Dataset):
        return KnnScorer(source, cfg, **kwargs)
    return source


# -- traces ---------------------------------------------------------------------


@dataclass(frozen=True)
class Step:
    feature: int
    score: float
    cumulative: float
    clamped: bool = False

    def to_dict(self) -> dict:
        return {
            "feature_index": self.feature,
            "step_cmi": self.score,
            "cumulative": self.cumulative,
            "clamped": self.clamped,
        }


@dataclass
class SelectionTrace:
    direction: str
    rule: StoppingRule
    task: TaskKind
    n_features: int
    steps: list[Step] = field(default_factory=list)
    selected: tuple[int, ...] = ()
    threshold_used: float | None = None
    stop_reason: str = ""
    rejected: Step | None = None
    total_mi: float | None = None
    scorer: dict = field(default_factory=dict)
    seed: int | None = None
    feature_names: tuple[str, ...] = ()

    @property
    def cumulative(self) -> float:
        return self.steps[-1].cumulative if self.steps else 0.0

    @property
    def order(self) -> list[int]:
        return [s.feature for s in self.steps]

    @property
    def guarantee(self) -> float | None:
        if self.rule.kind != "error":
            return None
        return guarantee(self, self.task)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "direction": self.direction,
            "rule": str(self.rule),
            "task": self.task.to_dict(),
            "n_features": self.n_features,
            "steps": [s.to_dict() for s in self.steps],
            "selected": list(self.selected),
            "selected_names": [self.feature_names[i] for i in self.selected] if self.feature_names else [],
            "threshold_used": self.threshold_used,
            "stop_reason": self.stop_reason,
            "rejected_step": self.rejected.to_dict() if self.rejected else None,
            "total_mi": self.total_mi,
            "guarantee": self.guarantee,
            "config": {"scorer": self.scorer, "seed": self.seed},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def guarantee(trace: SelectionTrace, task: TaskKind | None = None) -> float:
    """Additive ideal-error inflation certified by an error-budget trace.

    Backward: the removed set has score equal to the accumulated CMI, so the
    inflation is 2 B^2 sum(I_t) (regression) or sqrt(2 sum(I_t)) (classification).
    Forward: the kept set misses I(Y; X) - sum(I_t) of information; the same
    maps apply to that gap, using the scorer's estimate of I(Y; X).
    """
    task = task or trace.task
    if trace.rule.kind != "error":
        raise WrongRuleVariant("a guarantee exists only for error-budget traces")
    if trace.direction == BACKWARD:
        nu = trace.cumulative
    else:
        if trace.total_mi is None:
            raise WrongRuleVariant("forward guarantee needs the total I(Y; X)")
        nu = max(0.0, trace.total_mi - trace.cumulative)
    if task.is_classification:
        return math.sqrt(2.0 * nu)
    return 2.0 * task.bound**2 * nu


# -- greedy loops -----------------------------------------------------------------


def _argbest(scores: list[tuple[float, bool]], candidates: list[int], pick_max: bool) -> int:
    best = 0
    for pos in range(1, len(candidates)):
        v, b = scores[pos][0], scores[best][0]
        if (v > b) if pick_max else (v < b):
            best = pos
    return best


def _new_trace(direction, scorer, rule, seed, names) -> SelectionTrace:
    d = scorer.n_features
    if d < 1:
        raise EmptyFeatureSet("no features to select from")
    if rule.kind == "nfeat" and rule.value > d:
        raise OutOfRange(f"cannot keep {int(rule.value)} of {d} features")
    trace = SelectionTrace(direction, rule, scorer.task, d, scorer=scorer.describe(), seed=seed,
                           feature_names=tuple(names))
    if rule.kind == "error":
        trace.threshold_used = stop_threshold(rule, scorer.task)
    return trace


def backward_eliminate(source, rule: StoppingRule, cfg: KnnConfig | None = None, *,
                       seed: int | None = None, **scorer_kwargs) -> SelectionTrace:
    """Repeatedly drop the feature with the least CMI given the others.

    An error-budget rule refuses the removal that would push the accumulated
    CMI above the threshold, so the certified bound holds for the kept set.
    """
    scorer = make_scorer(source, cfg, **scorer_kwargs)
    names = getattr(source, "feature_names", ())
    trace = _new_trace(BACKWARD, scorer, rule, seed, names)
    remaining = list(range(scorer.n_features))
    total = 0.0
    prev: float | None = None

    while remaining:
        if rule.kind == "nfeat" and len(remaining) <= rule.value:
            trace.stop_reason = "feature count reached"
            break
        scores = [scorer.cmi(i, tuple(r for r in remaining if r != i)) for i in remaining]
        pos = _argbest(scores, remaining, pick_max=False)
        feat = remaining[pos]
        score, clamped = scores[pos]
        step = Step(feat, score, total + score, clamped)
        if rule.kind == "error" and step.cumulative > trace.threshold_used:
            trace.stop_reason = "error budget exhausted"
            trace.rejected = step
            break
        if rule.kind == "fscore" and score > rule.value:
            trace.stop_reason = "feature score above threshold"
            trace.rejected = step
            break
        if rule.kind == "dfscore" and prev is not None and score - prev > rule.value:
            trace.stop_reason = "feature score jump above threshold"
            trace.rejected = step
            break
        trace.steps.append(step)
        total = step.cumulative
        prev = score
        remaining.remove(feat)
    else:
        trace.stop_reason = "all features removed"

    trace.selected = tuple(remaining)
    if rule.kind == "error":
        trace.total_mi = scorer.mi(tuple(range(scorer.n_features)))
    return trace


def forward_select(source, rule: StoppingRule, cfg: KnnConfig | None = None, *,
                   seed: int | None = None, **scorer_kwargs) -> SelectionTrace:
    """Repeatedly add the feature with the most CMI given those already chosen.

    An error-budget rule commits the step that reaches the threshold and then
    stops: more accumulated CMI can only tighten the forward guarantee.
    """
    scorer = make_scorer(source, cfg, **scorer_kwargs)
    names = getattr(source, "feature_names", ())
    trace = _new_trace(FORWARD, scorer, rule, seed, names)
    chosen: list[int] = []
    total = 0.0
    prev: float | None = None
    d = scorer.n_features

    while len(chosen) < d:
        if rule.kind == "nfeat" and len(chosen) >= rule.value:
            trace.stop_reason = "feature count reached"
            break
        if rule.kind == "error" and trace.steps and total >= trace.threshold_used:
            trace.stop_reason = "error budget reached"
            break
        candidates = [i for i in range(d) if i not in chosen]
        scores = [scorer.cmi(i, tuple(chosen)) for i in candidates]
        pos = _argbest(scores, candidates, pick_max=True)
        feat = candidates[pos]
        score, clamped = scores[pos]
        step = Step(feat, score, total + score, clamped)
        if rule.kind == "fscore" and score < rule.value:
            trace.stop_reason = "best feature score below threshold"
            trace.rejected = step
            break
        if rule.kind == "dfscore" and prev is not None and prev - score > rule.value:
            trace.stop_reason = "feature score drop above threshold"
            trace.rejected = step
            break
        trace.steps.append(step)
        total = step.cumulative
        prev = score
        chosen.append(feat)
    else:
        trace.stop_reason = "all features added"

    trace.selected = tuple(sorted(chosen))
    if rule.kind == "error":
        trace.total_mi = scorer.mi(tuple(range(d)))
    return trace


def select(source, rule: StoppingRule, direction: str = BACKWARD, cfg: KnnConfig | None = None,
           **kwargs) -> SelectionTrace:
    if direction == BACKWARD:
        return backward_eliminate(source, rule, cfg, **kwargs)
    if direction == FORWARD:
        return forward_select(source, rule, cfg, **kwargs)
    raise OutOfRange(f"unknown direction {direction!r}")
