"""Kernel backend selection.

RISKSTOP_NUMBA=0 (or "false"/"off"/"no") forces the pure-numpy fallback even
when numba is installed. RISKSTOP_THREADS caps numba parallelism.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("RISKSTOP_NUMBA", "").strip().lower() in (
    "0", "false", "off", "no",
)

try:
    import numba  # noqa: F401
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _DISABLED


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


def max_threads() -> int:
    if not USE_NUMBA:
        return 1
    import numba

    return numba.config.NUMBA_NUM_THREADS


def set_threads(k: int) -> int:
    """Cap worker threads at k; returns the thread count actually in effect."""
    if not USE_NUMBA:
        return 1
    import numba

    k = max(1, min(int(k), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(k)
    return numba.get_num_threads()


def apply_thread_env() -> int:
    """Honor RISKSTOP_THREADS if set; default is machine parallelism."""
    raw = os.environ.get("RISKSTOP_THREADS", "").strip()
    if raw:
        try:
            return set_threads(int(raw))
        except ValueError:
            pass
    return max_threads()
