"""Finite-state Markov model types and structural validation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# structural tolerance for row sums and sign checks
ROW_TOL = 1e-12

DISCRETE = "discrete"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class CostSpec:
    """Per-state running cost g (>= c > 0) and terminal cost G (>= 0)."""

    g: np.ndarray
    G: np.ndarray
    c: float

    def __post_init__(self):
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))
        object.__setattr__(self, "G", np.asarray(self.G, dtype=float))
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self) -> int:
        return self.g.shape[0]

    def stop_payoff(self) -> np.ndarray:
        """e^G, the immediate-stop payoff vector."""
        return np.exp(self.G)


@dataclass(frozen=True)
class MarkovModel:
    """State labels plus a one-step stochastic matrix (discrete time) or a
    generator matrix (continuous time), and the cost data."""

    name: str
    time: str  # "discrete" | "continuous"
    labels: tuple
    kernel: np.ndarray
    costs: CostSpec

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        object.__setattr__(self, "kernel", np.asarray(self.kernel, dtype=float))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def is_discrete(self) -> bool:
        return self.time == DISCRETE

    def index_of(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class StoppingRegion:
    """Set of state indices where stopping is optimal; the induced policy is
    "stop at the first visit to a member state"."""

    members: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(int(i) for i in self.members))

    @classmethod
    def from_labels(cls, labels, model: MarkovModel) -> "StoppingRegion":
        return cls(frozenset(model.index_of(s) for s in labels))

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        for i in self.members:
            m[i] = True
        return m

    def sorted_indices(self) -> tuple:
        return tuple(sorted(self.members))

    def labels(self, model: MarkovModel) -> tuple:
        return tuple(model.labels[i] for i in self.sorted_indices())

    def __contains__(self, idx: int) -> bool:
        return int(idx) in self.members

    def __len__(self) -> int:
        return len(self.members)


def full_region(n: int) -> StoppingRegion:
    return StoppingRegion(frozenset(range(n)))


def validate_model(model: MarkovModel) -> list:
    """Check every structural invariant; return [] iff the model is valid.

    Each violation is a human-readable string naming the state or row and the
    violated bound. Nothing is raised: violations are the return value.
    """
    out = []
    n = model.n
    if n < 1:
        out.append("state space is empty")
        return out
    if len(set(model.labels)) != n:
        out.append("state labels are not pairwise distinct")
    if model.time not in (DISCRETE, CONTINUOUS):
        out.append(f"time mode {model.time!r} is not 'discrete' or 'continuous'")

    K = model.kernel
    if K.shape != (n, n):
        out.append(f"kernel shape {K.shape} does not match state count {n}")
        return out
    if not np.all(np.isfinite(K)):
        out.append("kernel has non-finite entries")
        return out

    if model.time == DISCRETE:
        for i in range(n):
            row = K[i]
            if np.any(row < -ROW_TOL):
                j = int(np.argmin(row))
                out.append(f"P[{i},{j}]={row[j]:g} is negative")
            s = row.sum()
            if abs(s - 1.0) > ROW_TOL:
                out.append(f"row {i} sums to {s:.12g}")
    else:
        for i in range(n):
            row = K[i]
            off = np.delete(row, i)
            if np.any(off < -ROW_TOL):
                out.append(f"row {i} has a negative off-diagonal rate")
            if row[i] > ROW_TOL:
                out.append(f"Q[{i},{i}]={row[i]:g} is positive")
            s = row.sum()
            if abs(s) > ROW_TOL:
                out.append(f"row {i} sums to {s:.12g}")

    costs = model.costs
    for vec, nm in ((costs.g, "g"), (costs.G, "G")):
        if vec.shape != (n,):
            out.append(f"{nm} has length {vec.shape[0]}, expected {n}")
            return out
        if not np.all(np.isfinite(vec)):
            out.append(f"{nm} has non-finite entries")
    if not np.isfinite(costs.c) or costs.c <= 0:
        out.append(f"c={costs.c:g} is not strictly positive")
    else:
        for i in range(n):
            if costs.g[i] < costs.c:
                out.append(f"g(state {i})={costs.g[i]:g} < c={costs.c:g}")
    for i in range(n):
        if costs.G[i] < 0:
            out.append(f"G(state {i})={costs.G[i]:g} is negative")
    return out


def require_valid(model: MarkovModel) -> None:
    violations = validate_model(model)
    if violations:
        raise ValueError("invalid model: " + "; ".join(violations))


def check_bracket(values: np.ndarray, costs: CostSpec) -> bool:
    """True iff 1 <= values <= e^G pointwise (the bracket every solver output
    must satisfy exactly)."""
    return bool(np.all(values >= 1.0) and np.all(values <= np.exp(costs.G)))
