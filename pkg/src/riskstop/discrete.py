"""Discrete-time risk-sensitive optimal stopping.

The value w(x) = inf over stopping times of E_x[exp(sum of g along the path
plus G at the stop state)] is the fixed point of the monotone operator
S h = min(e^g * P h, e^G). Iterating S from the seed 1 climbs to w from
below while iterating from e^G descends from above, so the gap between the
two lockstep iterates is a two-sided convergence certificate.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import (
    CostSpec,
    MarkovModel,
    StoppingRegion,
    full_region,
    require_valid,
)

ORACLE_CAP = 12
# spectral radius at or above this is classified non-integrable
RADIUS_INFINITE = 1.0 - 1e-9
# tie tolerance when matching enumerated regions against the pointwise minimum
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class SolveReport:
    """Auditable solver output: value vector, extracted region, and the
    convergence certificates (residual and sandwich gap)."""

    value: np.ndarray
    region: StoppingRegion
    iterations: int
    residual: float
    sandwich_gap: float
    converged: bool
    labels: tuple | None = None
    level: int | None = None
    horizon: float | None = None

    def with_labels(self, labels) -> "SolveReport":
        return dataclasses.replace(self, labels=tuple(labels))


class EmptyRegionError(ValueError):
    """No state is within tolerance of its stop payoff: w is unconverged or
    the tolerance is too tight."""


def _weighted_step(model: MarkovModel) -> np.ndarray:
    return np.exp(model.costs.g)[:, None] * model.kernel


def bellman_apply(P: np.ndarray, costs: CostSpec, h: np.ndarray) -> np.ndarray:
    """One step of the operator: min(e^g * (P h), e^G)."""
    P = np.asarray(P, dtype=float)
    h = np.asarray(h, dtype=float)
    if P.shape[1] != h.shape[0]:
        raise ValueError(f"shape mismatch: {P.shape} with {h.shape}")
    if np.any(h <= 0.0):
        raise ValueError("h must be strictly positive")
    return np.minimum(np.exp(costs.g) * (P @ h), np.exp(costs.G))


def iterate_lower(model: MarkovModel, n: int) -> list:
    """The non-decreasing iteration seeded at the all-ones vector.

    Returns [w_0, ..., w_n] where w_0 = 1 and each successor is one
    bellman_apply step. w_n is the value of stopping optimally within n steps
    with no terminal charge when the horizon is hit.
    """
    require_valid(model)
    out = [np.ones(model.n)]
    for _ in range(int(n)):
        out.append(bellman_apply(model.kernel, model.costs, out[-1]))
    return out


def iterate_upper(model: MarkovModel, n: int) -> list:
    """The non-increasing iteration seeded at e^G (stop-immediately payoff)."""
    require_valid(model)
    out = [model.costs.stop_payoff()]
    for _ in range(int(n)):
        out.append(bellman_apply(model.kernel, model.costs, out[-1]))
    return out


def extract_region(w: np.ndarray, costs: CostSpec, tol: float = 1e-9) -> StoppingRegion:
    """States where w is within tol of the stop payoff e^G.

    Ties go to stopping, so the region is the closed set {w >= e^G - tol}.
    Raises EmptyRegionError when no state qualifies: since w <= e^G always
    and never stopping has unbounded cost (g >= c > 0), an empty region can
    only mean an unconverged w or an over-tight tolerance.
    """
    w = np.asarray(w, dtype=float)
    members = np.flatnonzero(w >= np.exp(costs.G) - tol)
    if members.size == 0:
        raise EmptyRegionError(f"no state is within {tol:g} of its stop payoff")
    return StoppingRegion(frozenset(int(i) for i in members))


def solve_fixed_point(
    model: MarkovModel,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    seed_value: np.ndarray | None = None,
) -> SolveReport:
    """Solve the Bellman equation by lockstep sandwich iteration.

    Runs the lower (seed 1) and upper (seed e^G) iterations together and
    terminates when their sup-gap is <= tol; any iterate is then within tol
    of the unique fixed point in [1, e^G]. If seed_value is given, a third
    sequence from that seed rides along and its final iterate is returned
    instead of the upper one (the certificates cover it: the seeded iterate
    stays inside the bracket).

    Args:
        model: validated discrete-time model.
        tol: sup-norm tolerance for the sandwich gap and residual.
        max_iter: iteration budget; exhaustion returns converged=False with
            the best iterate and achieved gap.
        seed_value: optional start vector with 1 <= seed <= e^G.

    Returns:
        SolveReport with the value, extracted region, iteration count,
        Bellman residual, and final sandwich gap.
    """
    require_valid(model)
    if not model.is_discrete:
        raise ValueError("model is not discrete-time")
    if tol <= 0:
        raise ValueError("tol must be positive")
    costs = model.costs
    eG = costs.stop_payoff()

    if np.all(costs.G == 0.0):
        # e^G = 1 pins the bracket shut: w = 1 and stopping anywhere is optimal
        return SolveReport(
            value=np.ones(model.n), region=full_region(model.n),
            iterations=0, residual=0.0, sandwich_gap=0.0, converged=True,
            labels=model.labels,
        )

    cols = [np.ones(model.n), eG]
    if seed_value is not None:
        seed_value = np.asarray(seed_value, dtype=float)
        if seed_value.shape != (model.n,):
            raise ValueError("seed_value has the wrong length")
        if np.any(seed_value < 1.0) or np.any(seed_value > eG):
            raise ValueError("seed_value must satisfy 1 <= seed <= e^G")
        cols.append(seed_value)
    V0 = np.column_stack(cols)

    W = _weighted_step(model)
    V, iters, gap = _kernels.lockstep_bellman(W, eG, V0, float(tol), int(max_iter))
    value = V[:, 2] if seed_value is not None else V[:, 1]
    residual = float(np.max(np.abs(np.minimum(W @ value, eG) - value)))
    converged = gap <= tol
    region_tol = min(max(10.0 * tol, 1e-12), 1e-6)
    region = extract_region(value, costs, region_tol)
    return SolveReport(
        value=value, region=region, iterations=iters, residual=residual,
        sandwich_gap=float(gap), converged=converged, labels=model.labels,
    )


def continuation_radius(model: MarkovModel, region: StoppingRegion) -> float:
    """Spectral radius of the continuation block of e^g P; the policy cost is
    integrable iff this is < 1. Returns 0 for the full-space region."""
    cont = [i for i in range(model.n) if i not in region]
    if not cont:
        return 0.0
    M = _weighted_step(model)[np.ix_(cont, cont)]
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def region_value(model: MarkovModel, region: StoppingRegion) -> np.ndarray:
    """Expected cost of the hitting policy of `region`, per start state.

    Solves v = e^G on the region and v = e^g * P v elsewhere. When the
    continuation block's spectral radius is >= 1 - 1e-9 the cost is not
    integrable and an all-inf vector is returned (use continuation_radius for
    the computed radius).
    """
    require_valid(model)
    n = model.n
    eG = model.costs.stop_payoff()
    stop = sorted(region.members)
    cont = [i for i in range(n) if i not in region.members]
    v = np.empty(n)
    v[stop] = eG[stop]
    if not cont:
        return v
    M = _weighted_step(model)
    Mcc = M[np.ix_(cont, cont)]
    radius = float(np.max(np.abs(np.linalg.eigvals(Mcc))))
    if radius >= RADIUS_INFINITE:
        return np.full(n, np.inf)
    rhs = M[np.ix_(cont, stop)] @ eG[stop]
    v[cont] = np.linalg.solve(np.eye(len(cont)) - Mcc, rhs)
    return v


def enumerate_minimum(n: int, value_of_region):
    """Pointwise minimum of value_of_region over all 2^n index subsets, plus
    the lexicographically smallest region attaining it.

    value_of_region maps a frozenset of indices to a per-state vector (inf
    entries mark non-integrable policies). Shared by the discrete and
    continuous enumeration oracles; the scan order is fixed so the result is
    independent of any parallel evaluation.
    """
    regions = []
    values = []
    for mask in range(1 << n):
        members = frozenset(i for i in range(n) if mask >> i & 1)
        v = value_of_region(members)
        if np.all(np.isfinite(v)):
            regions.append(members)
            values.append(v)
    if not values:
        raise ValueError("no region has integrable cost")
    best = np.min(np.vstack(values), axis=0)
    attaining = [
        r for r, v in zip(regions, values) if np.all(v <= best + _TIE_TOL)
    ]
    winner = min(attaining, key=lambda r: tuple(sorted(r)))
    return best, StoppingRegion(winner)


def oracle_enumerate(model: MarkovModel, cap: int = ORACLE_CAP):
    """Brute-force ground truth: minimize region_value over every subset.

    Valid because the optimum is attained by a hitting-time policy, so some
    subset realizes the value exactly. Exponential in n; refuses n > cap.
    """
    require_valid(model)
    if model.n > cap:
        raise ValueError(f"state count {model.n} exceeds enumeration cap {cap}")
    value, region = enumerate_minimum(
        model.n, lambda members: region_value(model, StoppingRegion(members))
    )
    return value, region
