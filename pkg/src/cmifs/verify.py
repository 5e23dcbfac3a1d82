"""Property checks of the bounds and the greedy guarantee on random exact joints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .oracle import (
    TabularJoint,
    bayes_error,
    irreducible_error,
    mmse_error,
    random_joint,
    telescoping_gaps,
    verify_bounds,
)
from .selection import StoppingRule, backward_eliminate
from .synth import derive_seed

REAL_TARGETS = (-1.0, 0.0, 1.0)


@dataclass
class PropertyResult:
    name: str
    cases: int = 0
    violations: list[str] = field(default_factory=list)
    worst_margin: float = float("inf")

    @property
    def passed(self) -> bool:
        return not self.violations

    def record(self, margin: float, tolerance: float, where: str) -> None:
        self.cases += 1
        self.worst_margin = min(self.worst_margin, margin)
        if margin < -tolerance:
            self.violations.append(f"{where}: margin {margin:.3e}")

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<34} {self.cases:>7} {len(self.violations):>10} {self.worst_margin:>13.3e}  {status}"


def joint_seed(seed: int, family: str, i: int) -> int:
    return derive_seed(seed, family, i)


def class_joint(seed: int, i: int, d: int = 3) -> TabularJoint:
    return random_joint(d, 2, 2, joint_seed(seed, "classes", i))


def real_joint(seed: int, i: int, d: int = 3) -> TabularJoint:
    return random_joint(d, 2, 3, joint_seed(seed, "real", i), target_values=REAL_TARGETS)


def check_bounds(joints, name: str, tolerance: float = 1e-12) -> PropertyResult:
    res = PropertyResult(name)
    for label, j in joints:
        report = verify_bounds(j, tolerance)
        for c in report.checks:
            res.record(c.margin, tolerance, f"{label} removed={list(c.removed)}")
    return res


def check_telescoping(joints, orders_per_joint: int, seed: int, tolerance: float = 1e-10) -> PropertyResult:
    res = PropertyResult("telescoping identity")
    for i, (label, j) in enumerate(joints):
        rng = np.random.default_rng(joint_seed(seed, "orders", i))
        for o in range(orders_per_joint):
            order = [int(v) for v in rng.permutation(j.n_features)]
            for t, gap in enumerate(telescoping_gaps(j, order)):
                res.record(-gap, tolerance, f"{label} order={order} prefix={t + 1}")
    return res


def check_backward_budget(joints, deltas, name: str = "backward error budget",
                          tolerance: float = 1e-12) -> PropertyResult:
    """Backward elimination with an error budget never exceeds ideal error + delta."""
    res = PropertyResult(name)
    for label, j in joints:
        base = irreducible_error(j)
        for delta in deltas:
            trace = backward_eliminate(j, StoppingRule.error_budget(delta))
            kept = trace.selected
            err = bayes_error(j, kept) if j.target_kind == "classes" else mmse_error(j, kept)
            res.record(base + delta - err, tolerance, f"{label} delta={delta} kept={list(kept)}")
            res.record(base + trace.guarantee - err, tolerance, f"{label} delta={delta} (guarantee)")
    return res


def run_suite(n_joints: int = 200, d: int = 3, seed: int = 0, n_telescoping: int = 50,
              orders: int = 10, deltas=(0.0, 0.1, 0.3)) -> list[PropertyResult]:
    cls = [(f"classes seed={seed} #{i}", class_joint(seed, i, d)) for i in range(n_joints)]
    real = [(f"real seed={seed} #{i}", real_joint(seed, i, d)) for i in range(n_joints)]
    tele = cls[: n_telescoping // 2 + n_telescoping % 2] + real[: n_telescoping // 2]
    return [
        check_bounds(cls, "classification bound"),
        check_bounds(real, "regression bound"),
        check_telescoping(tele, orders, seed),
        check_backward_budget(cls, deltas, "backward budget (classification)"),
        check_backward_budget(real, deltas, "backward budget (regression)"),
    ]


def run_file_suite(j: TabularJoint, label: str, seed: int = 0, orders: int = 10,
                   deltas=(0.0, 0.1, 0.3)) -> list[PropertyResult]:
    joints = [(label, j)]
    name = "classification bound" if j.target_kind == "classes" else "regression bound"
    return [
        check_bounds(joints, name),
        check_telescoping(joints, orders, seed),
        check_backward_budget(joints, deltas),
    ]


def format_table(results: list[PropertyResult]) -> str:
    head = f"{'property':<34} {'cases':>7} {'violations':>10} {'worst margin':>13}  status"
    lines = [head, "-" * len(head)]
    lines += [r.row() for r in results]
    return "\n".join(lines)
