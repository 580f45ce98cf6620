"""Shared fixtures: kernel warmup, store builders, and the acceptance summary.

The session-scoped warmup evaluates a composite and plans a tiny grid once so
jit compilation never counts against runtime-budgeted tests.
"""

from __future__ import annotations

import numpy as np
import pytest

from fieldspace import (
    CompositeField,
    Matrix2,
    PointUnit,
    RectUnit,
    Vec2,
    eval_composite_many,
)
from fieldspace.kernels import plan_grid
from fieldspace.routing import PlannerConfig, plan_route


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    fld = CompositeField(
        units=(
            PointUnit(center=Vec2(0, 0), repulsion=Matrix2.diagonal(25, 25)),
            RectUnit(c1=Vec2(-5, -5), c2=Vec2(5, 5), repulsion=Matrix2.diagonal(25, 25)),
        )
    )
    eval_composite_many(fld, np.array([0.0, 50.0]), np.array([0.0, 50.0]))
    w_e = np.ones((3, 3))
    w_e[:, -1] = np.inf
    w_n = np.ones((3, 3))
    w_n[-1, :] = np.inf
    w_ne = np.full((3, 3), np.sqrt(2.0))
    w_ne[-1, :] = np.inf
    w_ne[:, -1] = np.inf
    w_nw = np.full((3, 3), np.sqrt(2.0))
    w_nw[-1, :] = np.inf
    w_nw[:, 0] = np.inf
    plan_grid(w_e, w_n, w_ne, w_nw, np.zeros((3, 3)), 0, 8)
    plan_route(CompositeField(units=()), Vec2(0, 0), Vec2(200, 0), PlannerConfig())


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance test at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid:
                name = nodeid.split("::")[-1]
                word = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, word))
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, word in sorted(lines):
            terminalreporter.write_line(f"{word}  {name}")
