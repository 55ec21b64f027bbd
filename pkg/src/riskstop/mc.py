"""Monte Carlo validation of hitting policies.

Paths are driven by a stateless counter RNG keyed on (seed, path, step), so
estimates are bit-reproducible for a fixed seed regardless of backend,
execution order, or thread count. The single-path samplers here walk the
same draw sequence as the batched kernels, which makes any path auditable
one draw at a time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import draw_u01
from .model import CostSpec, MarkovModel, StoppingRegion, require_valid

# roughly the payoff mass allowed past the default truncation horizon
STAT_TOL = 1e-6
_TRUNC_WARN = 0.01


@dataclass(frozen=True)
class PathSample:
    """One simulated trajectory under a hitting policy.

    times holds step indices for discrete chains and jump epochs for
    continuous ones; stopped_at is the index into states where the region
    was first entered, or None when the path was truncated first.
    """

    states: tuple
    times: tuple
    stopped_at: int | None
    truncated: bool


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    truncated_fraction: float


@dataclass(frozen=True)
class IntegrabilityResult:
    """Sample estimate of E[e^{c tau}] against its certified cap e^{G(x0)}."""

    estimate: McEstimate
    bound: float
    violated: bool


def _region_mask(region, n: int) -> np.ndarray:
    if isinstance(region, StoppingRegion):
        return region.mask(n)
    arr = np.asarray(region)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError(f"region mask has shape {arr.shape}, expected ({n},)")
        return arr.copy()
    mask = np.zeros(n, dtype=bool)
    for i in arr.ravel():
        i = int(i)
        if not 0 <= i < n:
            raise ValueError(f"region index {i} out of range")
        mask[i] = True
    return mask


def _check_start(x0, n: int) -> int:
    x0 = int(x0)
    if not 0 <= x0 < n:
        raise ValueError(f"start state {x0} out of range 0..{n - 1}")
    return x0


def default_truncation(costs: CostSpec, discrete: bool):
    """Horizon past which the surviving payoff mass is roughly below STAT_TOL.

    P(tau > T) decays at least like e^{-cT}, so T = (max G + ln(1/STAT_TOL))/c
    caps the neglected contribution near e^{max G} e^{-cT} = STAT_TOL.
    """
    T = (float(np.max(costs.G)) + math.log(1.0 / STAT_TOL)) / costs.c
    if discrete:
        return max(1, int(math.ceil(T)))
    return T


def _jump_chain(Q: np.ndarray):
    rates = -np.diagonal(Q).copy()
    J = np.array(Q, dtype=float)
    np.fill_diagonal(J, 0.0)
    pos = rates > 0.0
    J[pos] /= rates[pos, None]
    J[~pos] = 0.0
    return rates, np.cumsum(J, axis=1)


def sample_dtmc_path(P, x0: int, region, horizon: int, seed: int = 0) -> PathSample:
    """Walk one discrete path until the region is hit or `horizon` steps pass.

    Uses draw (seed, 0, step), the same sequence as path 0 of the batched
    evaluator with the same seed.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    x = _check_start(x0, n)
    mask = _region_mask(region, n)
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    cdf = np.cumsum(P, axis=1)

    states = [x]
    step = 0
    while step < horizon and not mask[x]:
        u = draw_u01(seed, 0, step)
        nx = n - 1
        for j in range(n):
            if u < cdf[x, j]:
                nx = j
                break
        x = nx
        states.append(x)
        step += 1
    stopped = bool(mask[x])
    return PathSample(
        states=tuple(states),
        times=tuple(range(len(states))),
        stopped_at=len(states) - 1 if stopped else None,
        truncated=not stopped,
    )


def sample_ctmc_path(Q, x0: int, region, t_trunc: float, seed: int = 0) -> PathSample:
    """Walk one continuous path until the region is hit or time runs out.

    Holding times use draw (seed, 0, 2k) and jump targets (seed, 0, 2k+1)
    for the k-th jump, matching path 0 of the batched evaluator.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    x = _check_start(x0, n)
    mask = _region_mask(region, n)
    if not t_trunc > 0:
        raise ValueError("t_trunc must be positive")
    rates, jump_cdf = _jump_chain(Q)

    states = [x]
    times = [0.0]
    t = 0.0
    k = 0
    stopped = False
    while True:
        if mask[x]:
            stopped = True
            break
        r = rates[x]
        if r <= 0.0:
            break  # absorbing outside the region: sits until truncation
        u = draw_u01(seed, 0, 2 * k)
        h = -math.log1p(-u) / r
        if t + h >= t_trunc:
            break
        t += h
        u2 = draw_u01(seed, 0, 2 * k + 1)
        nx = n - 1
        for j in range(n):
            if u2 < jump_cdf[x, j]:
                nx = j
                break
        x = nx
        states.append(x)
        times.append(t)
        k += 1
    return PathSample(
        states=tuple(states),
        times=tuple(times),
        stopped_at=len(states) - 1 if stopped else None,
        truncated=not stopped,
    )


def _estimate(values: np.ndarray, truncated: np.ndarray) -> McEstimate:
    # np.sum is a fixed pairwise reduction, so results do not depend on
    # thread count or chunking
    n = values.shape[0]
    if np.all(values == values[0]):
        # constant sample: exact mean, zero variance (dividing the sum by n
        # would leave ulp-level noise)
        mean = float(values[0])
        var = 0.0
    else:
        mean = float(np.sum(values) / n)
        var = float(np.sum((values - mean) ** 2) / (n - 1))
    return McEstimate(
        mean=mean,
        stderr=math.sqrt(var / n),
        n_paths=n,
        truncated_fraction=float(np.sum(truncated) / n),
    )


def _run_paths(model: MarkovModel, region, x0, n_paths: int, t_trunc, seed: int):
    require_valid(model)
    n = model.n
    if isinstance(x0, str):
        x0 = model.index_of(x0)
    x0 = _check_start(x0, n)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    mask = _region_mask(region, n)
    g, G = model.costs.g, model.costs.G
    if model.is_discrete:
        horizon = default_truncation(model.costs, True) if t_trunc is None else int(t_trunc)
        if horizon < 0:
            raise ValueError("truncation horizon must be >= 0")
        cdf = np.cumsum(model.kernel, axis=1)
        out = _kernels.dtmc_paths(cdf, g, G, mask, x0, int(n_paths), horizon, int(seed))
        return out + (float(horizon),)
    t_cap = default_truncation(model.costs, False) if t_trunc is None else float(t_trunc)
    if not t_cap > 0:
        raise ValueError("truncation time must be positive")
    rates, jump_cdf = _jump_chain(model.kernel)
    out = _kernels.ctmc_paths(rates, jump_cdf, g, G, mask, x0, int(n_paths), t_cap, int(seed))
    return out + (t_cap,)


def evaluate_region_policy(
    model: MarkovModel,
    region,
    x0,
    n_paths: int,
    t_trunc=None,
    seed: int = 0,
) -> McEstimate:
    """Estimate E_x0[exp(accrued g + G at the stop)] under the hitting policy.

    Paths still running at the truncation horizon are charged their accrued
    cost plus the stop cost where they stand, which biases the estimate only
    by the surviving tail mass; a truncated fraction above 1% triggers a
    warning because that bias may then be visible.
    """
    payoff, _, truncated, _ = _run_paths(model, region, x0, n_paths, t_trunc, seed)
    est = _estimate(payoff, truncated)
    if est.truncated_fraction > _TRUNC_WARN:
        warnings.warn(
            f"{est.truncated_fraction:.2%} of paths hit the truncation horizon; "
            "the estimate is biased low on the tail",
            RuntimeWarning,
            stacklevel=2,
        )
    return est


def integrability_check(
    model: MarkovModel,
    region,
    x0,
    n_paths: int,
    seed: int = 0,
    t_trunc=None,
) -> IntegrabilityResult:
    """Sample test of the optimality certificate E[e^{c tau}] <= e^{G(x0)}.

    Every optimal region satisfies the bound, so a mean exceeding it by more
    than four standard errors flags the region as non-optimal. Truncated
    paths enter with tau at the horizon, an underestimate, so the check only
    errs on the quiet side.
    """
    _, tau, truncated, _ = _run_paths(model, region, x0, n_paths, t_trunc, seed)
    values = np.exp(model.costs.c * tau)
    est = _estimate(values, truncated)
    if isinstance(x0, str):
        x0 = model.index_of(x0)
    bound = float(np.exp(model.costs.G[int(x0)]))
    return IntegrabilityResult(
        estimate=est,
        bound=bound,
        violated=est.mean - 4.0 * est.stderr > bound,
    )
