"""Continuous-time risk-sensitive stopping via dyadic time grids.

A continuous-time chain with generator Q is handled through the weighted
semigroup P^g_t = exp(t(Q + diag g)). Restricting stopping to the grid
{0, d, 2d, ...} turns the problem into a discrete one whose step operator is
v -> min(P^g_d v, e^G); refining d and the horizon T simultaneously squeezes
the grid values onto the continuous-time value from both sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .discrete import SolveReport, EmptyRegionError, enumerate_minimum, extract_region
from .model import CostSpec, StoppingRegion, full_region
from .semigroup import weighted_transition_matrix

# abscissa at or above this is classified non-integrable
ABSCISSA_INFINITE = -1e-9
# exp(T * max g) past this point is declared unrepresentable
_EXP_ARG_LIMIT = 600.0
# hard cap on backward steps in one solve_infinite round
_STEP_CAP = 1 << 26
_REGION_TOL = 1e-9


@dataclass(frozen=True)
class DyadicGrid:
    """Time grid 2^-level steps wide, or horizon/2^level when a horizon is
    attached."""

    level: int
    horizon: float | None = None

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.horizon is not None and not self.horizon >= 0:
            raise ValueError("horizon must be >= 0")

    @property
    def step(self) -> float:
        if self.horizon is None:
            return 2.0 ** (-self.level)
        return self.horizon / (1 << self.level)

    def refine(self) -> "DyadicGrid":
        return DyadicGrid(self.level + 1, self.horizon)


@dataclass(frozen=True)
class HorizonValue:
    """Lower and upper grid values at one snapped horizon."""

    T: float
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class LadderRow:
    level: int
    step: float
    sup_gap: float


@dataclass(frozen=True)
class LadderTable:
    rows: tuple
    reference: SolveReport
    tol: float
    converged: bool

    @property
    def final_ok(self) -> bool:
        return bool(self.rows) and self.rows[-1].sup_gap <= self.tol


def _check_costs(costs: CostSpec, n: int) -> None:
    if costs.n != n:
        raise ValueError(f"cost vectors have length {costs.n}, expected {n}")
    if not np.all(costs.g > 0.0):
        raise ValueError("running cost g must be strictly positive")
    if np.any(costs.G < 0.0):
        raise ValueError("stop cost G must be nonnegative")


def _as_generator(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"generator must be square, got {Q.shape}")
    return Q


def _require_representable(T: float, costs: CostSpec) -> None:
    worst = T * float(np.max(costs.g))
    if worst > _EXP_ARG_LIMIT:
        raise OverflowError(
            f"unrepresentable horizon: T * max(g) = {worst:.6g} exceeds "
            f"{_EXP_ARG_LIMIT:g}"
        )


def dyadic_backward(Q, costs: CostSpec, T: float, m: int, variant: str = "lower") -> np.ndarray:
    """Value of optimal stopping restricted to the grid {0, d, .., T}, d = T/2^m.

    variant "lower" seeds the terminal condition at 1 (no charge at the
    horizon, a lower bound on the infinite-horizon value), "upper" seeds at
    e^G (forced stop at the horizon, an upper bound).
    """
    Q = _as_generator(Q)
    _check_costs(costs, Q.shape[0])
    if not np.isfinite(T) or T < 0:
        raise ValueError(f"horizon must be finite and >= 0, got {T}")
    if m < 0:
        raise ValueError("m must be >= 0")
    if variant not in ("lower", "upper"):
        raise ValueError(f"variant must be 'lower' or 'upper', got {variant!r}")
    _require_representable(T, costs)

    eG = costs.stop_payoff()
    seed = np.ones(Q.shape[0]) if variant == "lower" else eG.copy()
    if T == 0:
        return seed
    steps = 1 << int(m)
    W = weighted_transition_matrix(Q, costs.g, T / steps)
    snaps = np.array([steps], dtype=np.int64)
    out = _kernels.backward_minclip(W, eG, seed[:, None], snaps)
    return out[0][:, 0]


def horizon_sweep(Q, costs: CostSpec, horizons, m: int) -> list:
    """Lower and upper grid values at several horizons on one shared grid.

    The grid step is max(horizons)/2^m and each requested horizon is snapped
    to the nearest grid point, so the whole sweep is a single backward pass
    and the returned families are monotone in T: lower values non-decreasing,
    upper values non-increasing.
    """
    Q = _as_generator(Q)
    _check_costs(costs, Q.shape[0])
    horizons = [float(T) for T in horizons]
    if not horizons:
        raise ValueError("horizons must be non-empty")
    if any(not np.isfinite(T) or T < 0 for T in horizons):
        raise ValueError("horizons must be finite and >= 0")
    if sorted(horizons) != horizons:
        raise ValueError("horizons must be sorted ascending")
    if m < 0:
        raise ValueError("m must be >= 0")

    n = Q.shape[0]
    eG = costs.stop_payoff()
    ones = np.ones(n)
    Tmax = horizons[-1]
    if Tmax == 0.0:
        return [HorizonValue(0.0, ones.copy(), eG.copy()) for _ in horizons]
    _require_representable(Tmax, costs)

    delta = Tmax / (1 << int(m))
    steps = [int(round(T / delta)) for T in horizons]
    uniq = sorted(set(steps))
    W = weighted_transition_matrix(Q, costs.g, delta)
    V0 = np.column_stack([ones, eG])
    out = _kernels.backward_minclip(W, eG, V0, np.array(uniq, dtype=np.int64))
    by_step = {s: out[i] for i, s in enumerate(uniq)}
    return [
        HorizonValue(s * delta, by_step[s][:, 0].copy(), by_step[s][:, 1].copy())
        for s in steps
    ]


def solve_infinite(
    Q,
    costs: CostSpec,
    tol: float = 1e-4,
    m_max: int = 24,
    T_growth: float = 2.0,
) -> SolveReport:
    """Infinite-horizon value by joint horizon and grid refinement.

    Each round runs the lower/upper pair to horizon T on the step 2^-p and
    once more on the doubled step. Two certificates gate termination: the
    sandwich gap at (T, p), which bounds the distance to the fixed point of
    the level-p grid problem (both iterates close on it monotonically from
    opposite sides), and the change under grid coarsening, a first-order
    estimate of the remaining grid bias. The gap alone is never enough: the
    two seeds share the grid bias, which only the second probe can see. A
    round that fails the gap doubles the horizon; one that fails only the
    bias probe deepens the grid, jumping several levels at once when the
    measured bias says so (the next round re-measures, so an over-jump costs
    time, not correctness).

    Returns a SolveReport whose level/horizon fields record the final grid;
    budget exhaustion (m_max, step cap) returns converged=False with the best
    iterate and its certificates.
    """
    Q = _as_generator(Q)
    n = Q.shape[0]
    _check_costs(costs, n)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if m_max < 1:
        raise ValueError("m_max must be >= 1 (the bias probe needs one coarser level)")
    if T_growth < 1.5:
        raise ValueError("T_growth must be >= 1.5")

    eG = costs.stop_payoff()
    if np.all(costs.G == 0.0):
        return SolveReport(
            value=np.ones(n), region=full_region(n), iterations=0,
            residual=0.0, sandwich_gap=0.0, converged=True, level=0, horizon=0.0,
        )

    V0 = np.column_stack([np.ones(n), eG])
    # states where (Q + diag g) e^G is negative gain strictly from waiting an
    # instant, so the true value sits below e^G there no matter the grid; a
    # grid still claiming "stop" at one of them is certifiably too coarse.
    # This anchor is what rules out false convergence when a coarse step sees
    # no gain in waiting at all and both probe levels freeze at e^G.
    drift = (Q + np.diag(costs.g)) @ eG
    must_wait = drift < -1e-9 * np.maximum(np.abs(drift), 1.0)
    # start below the fastest local timescale so the asymptotic-in-step
    # regime that the bias probe relies on has begun
    scale = float(np.max(-np.diagonal(Q)) + np.max(costs.g))
    p = min(max(5, math.ceil(math.log2(max(4.0 * scale, 1.0)))), m_max)
    T = 1.0
    total_steps = 0
    converged = False
    have_result = False
    low = up = None
    gap = d_m = np.inf

    while True:
        delta = 2.0 ** (-p)
        # T stays an integer multiple of the coarser step 2^(1-p), so the
        # probe pass lands on T exactly
        steps = int(round(T / delta))
        if have_result and steps + steps // 2 > _STEP_CAP:
            break
        W = weighted_transition_matrix(Q, costs.g, delta)
        out = _kernels.backward_minclip(
            W, eG, V0, np.array([steps], dtype=np.int64)
        )
        low, up = out[0][:, 0], out[0][:, 1]
        Wc = weighted_transition_matrix(Q, costs.g, 2.0 * delta)
        out_c = _kernels.backward_minclip(
            Wc, eG, V0, np.array([steps // 2], dtype=np.int64)
        )
        low_c, up_c = out_c[0][:, 0], out_c[0][:, 1]
        total_steps += steps + steps // 2
        have_result = True

        gap = float(np.max(up - low))
        d_m = float(
            max(np.max(np.abs(up - up_c)), np.max(np.abs(low - low_c)))
        )
        coarse_lock = bool(np.any(must_wait & (up >= eG - _REGION_TOL)))
        if gap <= tol and d_m <= tol and not coarse_lock:
            converged = True
            break
        if gap > tol:
            coarse = 2.0 * delta
            T = max(coarse, round(T * T_growth / coarse) * coarse)
        elif p >= m_max:
            break
        else:
            if d_m <= tol:
                jump = 2  # deepening forced by the wait anchor alone
            else:
                jump = max(1, min(6, math.ceil(math.log2(d_m / tol))))
            p = min(m_max, p + jump)

    # d_m is the level-(p-1) minus level-p difference, so first-order decay
    # puts the level-p value within ~d_m of the continuous one; the gap adds
    # the unconverged-iteration part
    cert = gap + 2.0 * d_m
    W = weighted_transition_matrix(Q, costs.g, 2.0 ** (-p))
    residual = float(np.max(np.abs(np.minimum(W @ up, eG) - up)))
    try:
        region = extract_region(up, costs, _REGION_TOL)
    except EmptyRegionError:
        region = StoppingRegion(frozenset({int(np.argmin(eG - up))}))
    return SolveReport(
        value=up.copy(), region=region, iterations=total_steps,
        residual=residual, sandwich_gap=float(cert), converged=converged,
        level=p, horizon=T,
    )


def continuation_abscissa(Q, costs: CostSpec, region: StoppingRegion) -> float:
    """Spectral abscissa of the continuation block of Q + diag(g); the policy
    cost is integrable iff this is < 0. Returns -inf for the full region."""
    Q = _as_generator(Q)
    n = Q.shape[0]
    cont = [i for i in range(n) if i not in region]
    if not cont:
        return -np.inf
    A = Q + np.diag(costs.g)
    block = A[np.ix_(cont, cont)]
    return float(np.max(np.linalg.eigvals(block).real))


def ctmc_region_value(Q, costs: CostSpec, region: StoppingRegion) -> np.ndarray:
    """Expected cost of stopping at the first entry into `region`.

    Solves (Q + diag g) v = 0 on the continuation set with boundary v = e^G
    on the region. Non-integrable policies (continuation abscissa >= -1e-9)
    come back as an all-inf vector.
    """
    Q = _as_generator(Q)
    n = Q.shape[0]
    _check_costs(costs, n)
    eG = costs.stop_payoff()
    stop = sorted(region.members)
    cont = [i for i in range(n) if i not in region.members]
    v = np.empty(n)
    v[stop] = eG[stop]
    if not cont:
        return v
    A = Q + np.diag(costs.g)
    Acc = A[np.ix_(cont, cont)]
    if float(np.max(np.linalg.eigvals(Acc).real)) >= ABSCISSA_INFINITE:
        return np.full(n, np.inf)
    rhs = -(A[np.ix_(cont, stop)] @ eG[stop])
    v[cont] = np.linalg.solve(Acc, rhs)
    return v


def ctmc_oracle(Q, costs: CostSpec, cap: int = 12):
    """Brute-force continuous-time ground truth over all hitting regions."""
    Q = _as_generator(Q)
    n = Q.shape[0]
    _check_costs(costs, n)
    if n > cap:
        raise ValueError(f"state count {n} exceeds enumeration cap {cap}")
    value, region = enumerate_minimum(
        n, lambda members: ctmc_region_value(Q, costs, StoppingRegion(members))
    )
    return value, region


def default_ladder(costs: CostSpec, c_0: float | None = None, m_max: int = 12) -> "LadderSpec":
    """Cost ladder g_m = g - (g - c_0) 2^-m, G_m = (1 - 2^-m) G.

    Level 0 flattens the running cost to the constant c_0 and wipes the stop
    cost; level m -> infinity recovers the original costs geometrically.
    """
    if c_0 is None:
        c_0 = float(costs.c)
    if not 0.0 < c_0 <= float(np.min(costs.g)):
        raise ValueError(f"need 0 < c_0 <= min(g), got c_0={c_0:g}")
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    return LadderSpec(g=costs.g.copy(), G=costs.G.copy(), c0=float(c_0), levels=int(m_max))


@dataclass(frozen=True)
class LadderSpec:
    g: np.ndarray
    G: np.ndarray
    c0: float
    levels: int

    def costs_at(self, m: int) -> CostSpec:
        if not 0 <= m <= self.levels:
            raise ValueError(f"level {m} outside 0..{self.levels}")
        shrink = 2.0 ** (-m)
        g_m = self.g - (self.g - self.c0) * shrink
        G_m = self.G * (1.0 - shrink)
        return CostSpec(g=g_m, G=G_m, c=float(np.min(g_m)))


def approximation_ladder(
    Q,
    costs: CostSpec,
    ladder: LadderSpec | None = None,
    m_max: int | None = None,
    tol: float = 1e-3,
    reference: SolveReport | None = None,
    inner_tol: float = 1e-8,
    inner_max_iter: int = 20_000_000,
) -> LadderTable:
    """Stationary dyadic approximations w_m against a refined reference.

    Level m solves the fixed point of v -> min(exp(2^-m (Q + diag g_m)) v,
    e^{G_m}) by sandwich iteration and reports sup|w_m - w_ref|. The
    reference defaults to solve_infinite at tol/100 so the table's floor sits
    well below tol. Inner budget exhaustion stops the table early and marks
    it converged=False.
    """
    Q = _as_generator(Q)
    n = Q.shape[0]
    _check_costs(costs, n)
    if ladder is None:
        ladder = default_ladder(costs, m_max=12 if m_max is None else m_max)
    if m_max is None:
        m_max = ladder.levels
    if m_max > ladder.levels:
        raise ValueError(f"m_max {m_max} exceeds ladder levels {ladder.levels}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    if reference is None:
        reference = solve_infinite(Q, costs, tol=min(tol * 1e-2, 1e-4))
    ref_value = reference.value

    rows = []
    all_converged = reference.converged
    for m in range(m_max + 1):
        level_costs = ladder.costs_at(m)
        delta = 2.0 ** (-m)
        eGm = level_costs.stop_payoff()
        if np.all(level_costs.G == 0.0):
            wm = np.ones(n)
        else:
            W = weighted_transition_matrix(Q, level_costs.g, delta)
            V0 = np.column_stack([np.ones(n), eGm])
            V, _, gap = _kernels.lockstep_bellman(
                W, eGm, V0, float(inner_tol), int(inner_max_iter)
            )
            wm = V[:, 1]
            if gap > inner_tol:
                all_converged = False
                rows.append(LadderRow(m, delta, float(np.max(np.abs(wm - ref_value)))))
                break
        rows.append(LadderRow(m, delta, float(np.max(np.abs(wm - ref_value)))))
    return LadderTable(
        rows=tuple(rows), reference=reference, tol=float(tol), converged=all_converged
    )
