"""Transition matrices and the exponentially weighted Feynman-Kac semigroup.

Both exponentials are computed by uniformization: a Poisson-weighted power
series of a nonnegative matrix. Unlike scaling-and-squaring this cannot
produce negative entries, which the downstream monotone iterations rely on.
"""
from __future__ import annotations

import math

import numpy as np

# Poisson tail mass at which the series is truncated
_TAIL = 1e-14


def _expm_offdiag_nonneg(A: np.ndarray, t: float) -> np.ndarray:
    """exp(t*A) for A with nonnegative off-diagonal entries.

    Shift by the largest row sum: with mu = max_i sum_j A_ij and
    lam = mu - min_i A_ii, the matrix N = (A - mu*I)/lam + I is entrywise
    nonnegative with row sums <= 1, and exp(tA) = e^{mu t} sum_k
    pois(lam*t; k) N^k. Substochastic N keeps every power bounded by 1 in
    sup norm, so cutting the series once the accumulated Poisson mass reaches
    1 - _TAIL bounds the dropped part by _TAIL * e^{mu t}. (Shifting by the
    max diagonal instead would let row sums of N exceed 1 and the matrix
    tail would outgrow the Poisson weights.)
    """
    n = A.shape[0]
    diag = np.diagonal(A)
    mu = float(A.sum(axis=1).max())
    lam = mu - float(diag.min())
    a = lam * t
    if a == 0.0:
        return math.exp(mu * t) * np.eye(n)

    N = (A - mu * np.eye(n)) / lam + np.eye(n)
    log_a = math.log(a)

    S = np.zeros((n, n))
    Pk = np.eye(n)
    w0 = math.exp(-a)  # may underflow to 0 for huge a; head terms negligible then
    S += w0 * Pk
    cum = w0
    k = 0
    k_cap = int(a + 60.0 * math.sqrt(a + 1.0) + 60.0)
    while k < k_cap:
        k += 1
        Pk = Pk @ N
        w = math.exp(k * log_a - a - math.lgamma(k + 1.0))
        if w > 0.0:
            S += w * Pk
            cum += w
        if cum >= 1.0 - _TAIL and k >= a:
            break
    return math.exp(mu * t) * S


def transition_matrix(Q: np.ndarray, t: float) -> np.ndarray:
    """Row-stochastic e^{tQ} for a generator matrix Q."""
    Q = np.asarray(Q, dtype=float)
    if not np.all(np.isfinite(Q)):
        raise ValueError("generator has non-finite entries")
    if not (t >= 0.0):
        raise ValueError(f"time must be >= 0, got {t}")
    return _expm_offdiag_nonneg(Q, float(t))


def weighted_transition_matrix(Q: np.ndarray, g: np.ndarray, t: float) -> np.ndarray:
    """e^{t(Q + diag g)}: the cost-weighted kernel.

    Applied to h this is E_x[exp(int_0^t g(X_s) ds) h(X_t)]; rows sum to a
    value in [e^{ct}, e^{t max g}].
    """
    Q = np.asarray(Q, dtype=float)
    g = np.asarray(g, dtype=float)
    if not (t >= 0.0):
        raise ValueError(f"time must be >= 0, got {t}")
    if g.shape[0] != Q.shape[0]:
        raise ValueError("cost vector length does not match generator")
    return _expm_offdiag_nonneg(Q + np.diag(g), float(t))


def apply_kernel(M: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Matrix-vector product M h."""
    M = np.asarray(M, dtype=float)
    h = np.asarray(h, dtype=float)
    if M.ndim != 2 or M.shape[1] != h.shape[0]:
        raise ValueError(f"shape mismatch: {M.shape} with {h.shape}")
    return M @ h
