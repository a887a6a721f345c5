import itertools
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog

from brittle_bayes.solver import SolverConfig

FIXTURES = Path(__file__).parent / "fixtures"

LIGHT = SolverConfig(restarts=8, max_iters=400)


@pytest.fixture
def light():
    return LIGHT


def three_atom_oracle(values, m1, m2, grid=201):
    """Brute force over three-atom measures on a uniform grid with two power moments fixed.

    For distinct positions the weights solve a 3x3 Vandermonde system, so the
    search is exhaustive over grid triples.  Returns ``(max, min)`` of the
    weighted ``values`` over feasible triples.
    """
    x = np.linspace(0.0, 1.0, grid)
    f = values(x)
    idx = np.array(list(itertools.combinations(range(grid), 3)))
    a, b, c = (x[idx[:, j]] for j in range(3))
    # Lagrange form of the Vandermonde inverse applied to (1, m1, m2)
    wa = (m2 - (b + c) * m1 + b * c) / ((a - b) * (a - c))
    wb = (m2 - (a + c) * m1 + a * c) / ((b - a) * (b - c))
    wc = (m2 - (a + b) * m1 + a * b) / ((c - a) * (c - b))
    ok = (wa >= -1e-12) & (wb >= -1e-12) & (wc >= -1e-12)
    val = wa * f[idx[:, 0]] + wb * f[idx[:, 1]] + wc * f[idx[:, 2]]
    return float(val[ok].max()), float(val[ok].min())


def grid_lp_oracle(values, features, lower, upper, grid=2001, sense="max", extra=()):
    """Optimize over measures supported on a uniform grid (HiGHS interior point).

    ``features(x)`` has shape ``(len(x), k)``; constraints are
    ``lower <= E[features] <= upper``.
    """
    x = np.union1d(np.linspace(0.0, 1.0, grid), extra)
    grid = x.size
    g = np.atleast_2d(features(x).T)
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    eq = lower == upper
    a_eq = np.vstack([np.ones(grid), g[eq]]) if g.size else np.ones((1, grid))
    b_eq = np.concatenate([[1.0], lower[eq]]) if g.size else np.ones(1)
    a_ub = np.vstack([g[~eq & np.isfinite(upper)], -g[~eq & np.isfinite(lower)]]) if g.size else None
    b_ub = np.concatenate([upper[~eq & np.isfinite(upper)], -lower[~eq & np.isfinite(lower)]]) if g.size else None
    if a_ub is not None and a_ub.shape[0] == 0:
        a_ub = b_ub = None
    sign = -1.0 if sense == "max" else 1.0
    f = values(x)
    res = linprog(sign * f, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs-ipm")
    if res.status != 0:
        return None
    return float(f @ res.x)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0].strip("[]"))):
            terminalreporter.write_line(line)
