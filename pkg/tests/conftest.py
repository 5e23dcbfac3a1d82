import itertools
import math

import numpy as np
import pytest

from cmifs.data import Dataset, TaskKind


#: "criterion N: PASS|FAIL ..." lines, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def brute_cmi(pmf, a, c):
    """I(Y; X_a | X_c) by explicit loops over a {(x..., y): p} dictionary."""
    def marg(keep, with_y):
        out = {}
        for key, p in pmf.items():
            *x, y = key
            k = tuple(x[i] for i in keep) + ((y,) if with_y else ())
            out[k] = out.get(k, 0.0) + p
        return out

    ac = sorted(a) + sorted(c)
    p_acy, p_ac = marg(ac, True), marg(ac, False)
    p_cy, p_c = marg(sorted(c), True), marg(sorted(c), False)
    total = 0.0
    for key, p in p_acy.items():
        if p <= 0:
            continue
        xs, y = key[:-1], key[-1]
        xc = xs[len(a):]
        total += p * math.log(p * p_c[xc] / (p_ac[xs] * p_cy[xc + (y,)]))
    return total


def pmf_dict(joint):
    out = {}
    for idx in itertools.product(*(range(a) for a in joint.arities)):
        for t, yv in enumerate(joint.targets):
            out[idx + (yv,)] = float(joint.pmf[idx + (t,)])
    return out


@pytest.fixture
def small_regression():
    x = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 35.0]])
    y = np.array([0.5, -1.5, 1.0])
    return Dataset(x, ("x1", "x2"), y, TaskKind.regression())
