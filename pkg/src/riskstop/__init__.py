"""Risk-sensitive optimal stopping of finite-state Markov chains.

Values of the form inf over stopping times of E[exp(accrued running cost +
stop cost)] for discrete-time chains and continuous-time jump chains, with
two-sided convergence certificates, brute-force enumeration oracles, dyadic
grid refinement, and reproducible Monte Carlo policy checks.
"""

__version__ = "0.1.0"

from ._backend import backend_name, max_threads, set_threads
from .continuous import (
    DyadicGrid,
    HorizonValue,
    LadderRow,
    LadderSpec,
    LadderTable,
    approximation_ladder,
    continuation_abscissa,
    ctmc_oracle,
    ctmc_region_value,
    default_ladder,
    dyadic_backward,
    horizon_sweep,
    solve_infinite,
)
from .discrete import (
    EmptyRegionError,
    SolveReport,
    bellman_apply,
    continuation_radius,
    extract_region,
    iterate_lower,
    iterate_upper,
    oracle_enumerate,
    region_value,
    solve_fixed_point,
)
from .mc import (
    IntegrabilityResult,
    McEstimate,
    PathSample,
    default_truncation,
    evaluate_region_policy,
    integrability_check,
    sample_ctmc_path,
    sample_dtmc_path,
)
from .model import (
    CONTINUOUS,
    DISCRETE,
    CostSpec,
    MarkovModel,
    StoppingRegion,
    check_bracket,
    full_region,
    require_valid,
    validate_model,
)
from .model_io import (
    ModelFormatError,
    Table,
    parse_model,
    serialize_model,
    write_report,
)
from .semigroup import apply_kernel, transition_matrix, weighted_transition_matrix

__all__ = [
    "CONTINUOUS",
    "CostSpec",
    "DISCRETE",
    "DyadicGrid",
    "EmptyRegionError",
    "HorizonValue",
    "IntegrabilityResult",
    "LadderRow",
    "LadderSpec",
    "LadderTable",
    "MarkovModel",
    "McEstimate",
    "ModelFormatError",
    "PathSample",
    "SolveReport",
    "StoppingRegion",
    "Table",
    "apply_kernel",
    "approximation_ladder",
    "backend_name",
    "bellman_apply",
    "check_bracket",
    "continuation_abscissa",
    "continuation_radius",
    "ctmc_oracle",
    "ctmc_region_value",
    "default_ladder",
    "default_truncation",
    "dyadic_backward",
    "evaluate_region_policy",
    "extract_region",
    "full_region",
    "horizon_sweep",
    "integrability_check",
    "iterate_lower",
    "iterate_upper",
    "max_threads",
    "oracle_enumerate",
    "parse_model",
    "region_value",
    "require_valid",
    "sample_ctmc_path",
    "sample_dtmc_path",
    "serialize_model",
    "set_threads",
    "solve_fixed_point",
    "solve_infinite",
    "transition_matrix",
    "validate_model",
    "weighted_transition_matrix",
    "write_report",
]
