"""Shared fixtures: reference models, random model corpora, kernel warmup.

The environment tweaks below must land before anything imports numba, so keep
them at the very top. NUMBA_NUM_THREADS=2 lets the determinism tests exercise
set_threads(1) vs set_threads(2) even on a single-core box; workqueue avoids
the TBB version probe entirely.
"""
import os

os.environ.setdefault("NUMBA_NUM_THREADS", "2")
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numpy as np
import pytest

import riskstop as rs

# master seeds for the acceptance corpora; frozen, do not reroll
DTMC_CORPUS_SEED = 20260819
CTMC_CORPUS_SEED = 20260819
MC_CORPUS_SEED = 314159

ACCEPTANCE_LINES = []


def random_dtmc(rng, n, g_range=(0.05, 0.5), G_range=(0.0, 2.0)):
    """Dense random stochastic matrix with uniform row draws."""
    P = rng.uniform(size=(n, n))
    P /= P.sum(axis=1, keepdims=True)
    g = rng.uniform(*g_range, n)
    G = rng.uniform(*G_range, n)
    return rs.MarkovModel(
        name=f"dtmc-{n}",
        time=rs.DISCRETE,
        labels=tuple(f"s{i}" for i in range(n)),
        kernel=P,
        costs=rs.CostSpec(g=g, G=G, c=float(g.min())),
    )


def random_ctmc(rng, n, rate_hi=2.0, g_range=(0.05, 0.5), G_range=(0.0, 1.0)):
    """Random generator matrix; about half the off-diagonal edges present."""
    Q = rng.uniform(0.0, rate_hi, (n, n))
    np.fill_diagonal(Q, 0.0)
    mask = rng.uniform(size=(n, n)) < 0.5
    np.fill_diagonal(mask, False)
    Q *= mask
    np.fill_diagonal(Q, -Q.sum(axis=1))
    g = rng.uniform(*g_range, n)
    G = rng.uniform(*G_range, n)
    return rs.MarkovModel(
        name=f"ctmc-{n}",
        time=rs.CONTINUOUS,
        labels=tuple(f"s{i}" for i in range(n)),
        kernel=Q,
        costs=rs.CostSpec(g=g, G=G, c=float(g.min())),
    )


@pytest.fixture(scope="session")
def flow_model():
    # deterministic hop A -> B, B absorbing; w = (e^0.1, 1), region {B}
    return rs.MarkovModel(
        name="two-state-flow",
        time=rs.DISCRETE,
        labels=("A", "B"),
        kernel=np.array([[0.0, 1.0], [0.0, 1.0]]),
        costs=rs.CostSpec(g=np.array([0.1, 0.1]), G=np.array([2.0, 0.0]), c=0.1),
    )


@pytest.fixture(scope="session")
def ct_model():
    # A jumps to absorbing B at rate 1; w(A) = 1/(1 - 0.1), region {B}
    return rs.MarkovModel(
        name="two-state-ct",
        time=rs.CONTINUOUS,
        labels=("A", "B"),
        kernel=np.array([[-1.0, 1.0], [0.0, 0.0]]),
        costs=rs.CostSpec(g=np.array([0.1, 0.1]), G=np.array([2.0, 0.0]), c=0.1),
    )


@pytest.fixture(scope="session", autouse=True)
def _warmup():
    """Compile every jit kernel once so timed tests measure the math only."""
    rng = np.random.default_rng(0)
    m = random_dtmc(rng, 3)
    rs.solve_fixed_point(m)
    c = random_ctmc(rng, 3)
    rs.solve_infinite(c.kernel, c.costs, tol=1e-2, m_max=8)
    rs.evaluate_region_policy(m, rs.full_region(3), 0, 64)
    rs.evaluate_region_policy(c, rs.full_region(3), 0, 64)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
