"""Hot numerical kernels: lockstep Bellman iteration, dyadic backward
recursion, and Monte Carlo path evaluation.

Every kernel has a pure-numpy implementation and, when the numba backend is
active, an @njit twin compiled from the same arithmetic. The public names at
the bottom of this module point at the active backend; both are kept in
`IMPLEMENTATIONS` so tests and benchmarks can compare them.

Random numbers come from a stateless counter hash: draw (seed, stream, ctr)
-> uniform in [0,1). Stream = path index, ctr = per-step counter, so any
path's draws are reproducible independently of execution order or thread
count.
"""
from __future__ import annotations

import numpy as np

from ._backend import USE_NUMBA

_MASK = (1 << 64) - 1
_K_SEED = 0x9E3779B97F4A7C15
_K_STREAM = 0xC2B2AE3D27D4EB4F
_K_CTR = 0x165667B19E3779F9
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_U53 = 2.0 ** -53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a python int (mod 2^64)."""
    z &= _MASK
    z ^= z >> 30
    z = (z * _M1) & _MASK
    z ^= z >> 27
    z = (z * _M2) & _MASK
    z ^= z >> 31
    return z


def draw_u01(seed: int, stream: int, ctr: int) -> float:
    """Scalar counter-based uniform in [0,1). Backend independent."""
    z = (seed * _K_SEED + stream * _K_STREAM + ctr * _K_CTR) & _MASK
    return (mix64(mix64(z)) >> 11) * _U53


def _u01_np(seed: np.uint64, streams: np.ndarray, ctr: np.uint64) -> np.ndarray:
    # vectorized copy of draw_u01; uint64 array arithmetic wraps mod 2^64.
    # scalar terms wrap in python int space first: numpy warns on scalar overflow
    base = np.uint64((int(seed) * _K_SEED + int(ctr) * _K_CTR) & _MASK)
    z = base + streams * np.uint64(_K_STREAM)
    for _ in range(2):
        z ^= z >> np.uint64(30)
        z *= np.uint64(_M1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_M2)
        z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)) * _U53


# ---------------------------------------------------------------------------
# pure numpy implementations
# ---------------------------------------------------------------------------

def lockstep_bellman_np(W, stop, V, tol, max_iter):
    """Iterate V <- min(W V, stop) columnwise until the gap between columns
    0 (lower) and 1 (upper) is <= tol. Returns (V, iterations, gap)."""
    cur = V.copy()
    gap = float(np.max(cur[:, 1] - cur[:, 0]))
    it = 0
    while gap > tol and it < max_iter:
        cur = np.minimum(W @ cur, stop[:, None])
        it += 1
        gap = float(np.max(cur[:, 1] - cur[:, 0]))
    return cur, it, gap


def backward_minclip_np(W, stop, V0, snaps):
    """Run `snaps[-1]` steps of V <- min(W V, stop), recording V at each step
    index listed in `snaps` (ascending). Returns (len(snaps), n, k)."""
    cur = V0.copy()
    out = np.empty((len(snaps), V0.shape[0], V0.shape[1]))
    si = 0
    if snaps[0] == 0:
        out[0] = cur
        si = 1
    for step in range(1, int(snaps[-1]) + 1):
        cur = np.minimum(W @ cur, stop[:, None])
        if si < len(snaps) and snaps[si] == step:
            out[si] = cur
            si += 1
    return out


def dtmc_paths_np(cdf, g, G, region, x0, n_paths, horizon, seed):
    """Per-path (payoff, tau, truncated) for the hitting policy of `region`
    on a discrete chain, truncating at `horizon` steps."""
    n = cdf.shape[0]
    seed_u = np.uint64(seed & _MASK)
    idx = np.arange(n_paths, dtype=np.uint64)
    x = np.full(n_paths, x0, dtype=np.int64)
    acc = np.zeros(n_paths)
    stopped = np.full(n_paths, bool(region[x0]))
    tau = np.where(stopped, 0.0, float(horizon))
    active = ~stopped
    step = 0
    while step < horizon and active.any():
        ia = np.flatnonzero(active)
        acc[ia] += g[x[ia]]
        u = _u01_np(seed_u, idx[ia], np.uint64(step))
        nx = np.sum(cdf[x[ia]] <= u[:, None], axis=1)
        np.minimum(nx, n - 1, out=nx)
        x[ia] = nx
        step += 1
        hit = region[x[ia]]
        just = ia[hit]
        stopped[just] = True
        tau[just] = float(step)
        active[just] = False
    payoff = np.exp(acc + G[x])
    return payoff, tau, ~stopped


def ctmc_paths_np(rates, jump_cdf, g, G, region, x0, n_paths, t_trunc, seed):
    """Per-path (payoff, tau, truncated) for the hitting policy of `region`
    on a continuous chain, truncating at time `t_trunc`."""
    n = jump_cdf.shape[0]
    seed_u = np.uint64(seed & _MASK)
    idx = np.arange(n_paths, dtype=np.uint64)
    x = np.full(n_paths, x0, dtype=np.int64)
    t = np.zeros(n_paths)
    acc = np.zeros(n_paths)
    stopped = np.full(n_paths, bool(region[x0]))
    tau = np.zeros(n_paths)
    active = ~stopped
    k = 0
    while active.any():
        ia = np.flatnonzero(active)
        r = rates[x[ia]]
        absorbing = r <= 0.0
        active[ia[absorbing]] = False  # sits until the horizon: truncated
        ia = ia[~absorbing]
        if ia.size == 0:
            break
        u = _u01_np(seed_u, idx[ia], np.uint64(2 * k))
        h = -np.log1p(-u) / rates[x[ia]]
        over = t[ia] + h >= t_trunc
        active[ia[over]] = False
        go = ia[~over]
        k += 1
        if go.size == 0:
            continue
        hg = h[~over]
        acc[go] += g[x[go]] * hg
        t[go] += hg
        u2 = _u01_np(seed_u, idx[go], np.uint64(2 * k - 1))
        nx = np.sum(jump_cdf[x[go]] <= u2[:, None], axis=1)
        np.minimum(nx, n - 1, out=nx)
        x[go] = nx
        hit = region[x[go]]
        just = go[hit]
        stopped[just] = True
        tau[just] = t[just]
        active[just] = False
    trunc = ~stopped
    acc[trunc] += g[x[trunc]] * (t_trunc - t[trunc])
    tau[trunc] = t_trunc
    payoff = np.exp(acc + G[x])
    return payoff, tau, trunc


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if USE_NUMBA:
    from numba import njit, prange

    @njit(cache=True, inline="always")
    def _u01_nb(seed, stream, ctr):
        z = (
            seed * np.uint64(_K_SEED)
            + stream * np.uint64(_K_STREAM)
            + ctr * np.uint64(_K_CTR)
        )
        for _ in range(2):
            z ^= z >> np.uint64(30)
            z *= np.uint64(_M1)
            z ^= z >> np.uint64(27)
            z *= np.uint64(_M2)
            z ^= z >> np.uint64(31)
        return (z >> np.uint64(11)) * _U53

    @njit(cache=True)
    def _lockstep_nb(W, stop, V, tol, max_iter):
        n, m = V.shape
        cur = V.copy()
        nxt = np.empty((n, m))
        gap = 0.0
        for i in range(n):
            d = cur[i, 1] - cur[i, 0]
            if d > gap:
                gap = d
        it = 0
        while gap > tol and it < max_iter:
            for i in range(n):
                s = stop[i]
                for c in range(m):
                    acc = 0.0
                    for j in range(n):
                        acc += W[i, j] * cur[j, c]
                    nxt[i, c] = acc if acc < s else s
            tmp = cur
            cur = nxt
            nxt = tmp
            it += 1
            gap = 0.0
            for i in range(n):
                d = cur[i, 1] - cur[i, 0]
                if d > gap:
                    gap = d
        return cur, it, gap

    @njit(cache=True)
    def _backward_nb(W, stop, V0, snaps):
        n, m = V0.shape
        cur = V0.copy()
        nxt = np.empty((n, m))
        out = np.empty((len(snaps), n, m))
        si = 0
        if snaps[0] == 0:
            out[0] = cur
            si = 1
        for step in range(1, snaps[-1] + 1):
            for i in range(n):
                s = stop[i]
                for c in range(m):
                    acc = 0.0
                    for j in range(n):
                        acc += W[i, j] * cur[j, c]
                    nxt[i, c] = acc if acc < s else s
            tmp = cur
            cur = nxt
            nxt = tmp
            if si < len(snaps) and snaps[si] == step:
                out[si] = cur
                si += 1
        return out

    @njit(cache=True, parallel=True)
    def _dtmc_nb(cdf, g, G, region, x0, n_paths, horizon, seed):
        n = cdf.shape[0]
        payoff = np.empty(n_paths)
        tau = np.empty(n_paths)
        trunc = np.empty(n_paths, dtype=np.bool_)
        for p in prange(n_paths):
            x = x0
            acc = 0.0
            step = 0
            while step < horizon and not region[x]:
                acc += g[x]
                u = _u01_nb(seed, np.uint64(p), np.uint64(step))
                nx = n - 1
                for j in range(n):
                    if u < cdf[x, j]:
                        nx = j
                        break
                x = nx
                step += 1
            payoff[p] = np.exp(acc + G[x])
            tau[p] = float(step)
            trunc[p] = not region[x]
        return payoff, tau, trunc

    @njit(cache=True, parallel=True)
    def _ctmc_nb(rates, jump_cdf, g, G, region, x0, n_paths, t_trunc, seed):
        n = jump_cdf.shape[0]
        payoff = np.empty(n_paths)
        tau = np.empty(n_paths)
        trunc = np.empty(n_paths, dtype=np.bool_)
        for p in prange(n_paths):
            x = x0
            t = 0.0
            acc = 0.0
            k = 0
            stopped = False
            while True:
                if region[x]:
                    stopped = True
                    break
                r = rates[x]
                if r <= 0.0:
                    break
                u = _u01_nb(seed, np.uint64(p), np.uint64(2 * k))
                h = -np.log1p(-u) / r
                if t + h >= t_trunc:
                    break
                acc += g[x] * h
                t += h
                u2 = _u01_nb(seed, np.uint64(p), np.uint64(2 * k + 1))
                nx = n - 1
                for j in range(n):
                    if u2 < jump_cdf[x, j]:
                        nx = j
                        break
                x = nx
                k += 1
            if stopped:
                tau[p] = t
            else:
                acc += g[x] * (t_trunc - t)
                tau[p] = t_trunc
            payoff[p] = np.exp(acc + G[x])
            trunc[p] = not stopped
        return payoff, tau, trunc

    def lockstep_bellman_nb(W, stop, V, tol, max_iter):
        return _lockstep_nb(
            np.ascontiguousarray(W), np.ascontiguousarray(stop),
            np.ascontiguousarray(V), float(tol), int(max_iter),
        )

    def backward_minclip_nb(W, stop, V0, snaps):
        return _backward_nb(
            np.ascontiguousarray(W), np.ascontiguousarray(stop),
            np.ascontiguousarray(V0), np.asarray(snaps, dtype=np.int64),
        )

    def dtmc_paths_nb(cdf, g, G, region, x0, n_paths, horizon, seed):
        return _dtmc_nb(
            np.ascontiguousarray(cdf), np.ascontiguousarray(g),
            np.ascontiguousarray(G), np.ascontiguousarray(region),
            int(x0), int(n_paths), int(horizon), np.uint64(seed & _MASK),
        )

    def ctmc_paths_nb(rates, jump_cdf, g, G, region, x0, n_paths, t_trunc, seed):
        return _ctmc_nb(
            np.ascontiguousarray(rates), np.ascontiguousarray(jump_cdf),
            np.ascontiguousarray(g), np.ascontiguousarray(G),
            np.ascontiguousarray(region), int(x0), int(n_paths),
            float(t_trunc), np.uint64(seed & _MASK),
        )


IMPLEMENTATIONS = {
    "numpy": {
        "lockstep_bellman": lockstep_bellman_np,
        "backward_minclip": backward_minclip_np,
        "dtmc_paths": dtmc_paths_np,
        "ctmc_paths": ctmc_paths_np,
    },
}
if USE_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "lockstep_bellman": lockstep_bellman_nb,
        "backward_minclip": backward_minclip_nb,
        "dtmc_paths": dtmc_paths_nb,
        "ctmc_paths": ctmc_paths_nb,
    }

_active = IMPLEMENTATIONS["numba" if USE_NUMBA else "numpy"]
lockstep_bellman = _active["lockstep_bellman"]
backward_minclip = _active["backward_minclip"]
dtmc_paths = _active["dtmc_paths"]
ctmc_paths = _active["ctmc_paths"]
