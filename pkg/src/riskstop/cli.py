"""Command line front end.

Results go to stdout in the report formats (csv default, json optional);
progress and certificates go to stderr. Exit codes: 0 success, 1 invalid
input, 2 iteration budget exhausted before the tolerance, 3 a consistency
check failed (oracle mismatch, integrability violation), 64 usage errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ._backend import apply_thread_env, backend_name
from .continuous import (
    approximation_ladder,
    ctmc_oracle,
    default_ladder,
    horizon_sweep,
    solve_infinite,
)
from .discrete import oracle_enumerate, solve_fixed_point
from .mc import evaluate_region_policy, integrability_check
from .model import StoppingRegion
from .model_io import FORMATS, ModelFormatError, Table, parse_model, write_report

OK = 0
INVALID = 1
BUDGET = 2
CHECK_FAILED = 3
USAGE = 64

# sup |solver - oracle| allowed by oracle-check, per time mode
ORACLE_GAP_DISCRETE = 1e-8
ORACLE_GAP_CONTINUOUS = 5e-4


class _UsageError(Exception):
    def __init__(self, usage: str, message: str):
        super().__init__(message)
        self.usage = usage
        self.message = message


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; route through an exception so run()
    # can return 64 instead
    def error(self, message):
        raise _UsageError(self.format_usage(), message)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _float_list(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _build_parser() -> _Parser:
    p = _Parser(prog="riskstop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", metavar="COMMAND")

    def cmd(name, handler, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("model", help="path to a model JSON file")
        sp.add_argument("--format", choices=FORMATS, default="csv")
        sp.set_defaults(func=handler)
        return sp

    cmd("validate", _cmd_validate, "check a model file, list violations")

    sp = cmd("solve-discrete", _cmd_solve_discrete, "fixed point of the discrete Bellman operator")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-iter", type=int, default=200_000)
    sp.add_argument("--seed-value", type=_float_list, default=None,
                    help="optional start vector, comma separated")

    sp = cmd("solve-continuous", _cmd_solve_continuous, "infinite-horizon value by dyadic refinement")
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--m-max", type=int, default=24)

    sp = cmd("sweep-horizon", _cmd_sweep, "grid values at several horizons")
    sp.add_argument("--horizons", type=_float_list, required=True)
    sp.add_argument("--level", type=int, required=True, help="dyadic level m")

    sp = cmd("refine-dyadic", _cmd_refine, "cost-ladder convergence table")
    sp.add_argument("--m-max", type=int, default=12)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--c0", type=float, default=None, help="base running cost, default min g")

    sp = cmd("oracle-check", _cmd_oracle_check, "compare the solver against subset enumeration")
    sp.add_argument("--tol", type=float, default=None, help="solver tolerance")
    sp.add_argument("--threshold", type=float, default=None,
                    help="allowed sup gap, default 1e-8 discrete / 5e-4 continuous")

    sp = cmd("simulate", _cmd_simulate, "Monte Carlo cost of a stopping region")
    sp.add_argument("--paths", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--region", default="auto",
                    help="'auto' for the solver region, or comma-separated state labels")
    sp.add_argument("--trunc", type=float, default=None)
    sp.add_argument("--state", default=None, help="restrict to one start state label")

    sp = cmd("integrability", _cmd_integrability, "sample check of E[e^(c tau)] <= e^G(x0)")
    sp.add_argument("--paths", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trunc", type=float, default=None)

    return p


def _solve_model(model, tol=None):
    if model.is_discrete:
        return solve_fixed_point(model, tol=1e-10 if tol is None else tol)
    report = solve_infinite(model.kernel, model.costs, tol=1e-4 if tol is None else tol)
    return report.with_labels(model.labels)


def _report_log(report) -> None:
    extra = ""
    if report.level is not None:
        extra = f" level={report.level} horizon={report.horizon:g}"
    _log(
        f"converged={report.converged} iterations={report.iterations}"
        f" residual={report.residual:.3e} sandwich_gap={report.sandwich_gap:.3e}"
        f"{extra} region={{{','.join(str(s) for s in report.region.sorted_indices())}}}"
    )


def _cmd_validate(model, args) -> int:
    # reached only when the file already parsed cleanly
    print(write_report(Table(("violation",), ()), args.format), end="")
    _log(f"model '{model.name}': valid ({model.time}, {model.n} states)")
    return OK


def _cmd_solve_discrete(model, args) -> int:
    if not model.is_discrete:
        _log(f"model '{model.name}' is continuous-time; use solve-continuous")
        return INVALID
    seed = args.seed_value
    if seed is not None and len(seed) != model.n:
        _log(f"--seed-value needs {model.n} entries, got {len(seed)}")
        return INVALID
    report = solve_fixed_point(
        model, tol=args.tol, max_iter=args.max_iter,
        seed_value=None if seed is None else np.asarray(seed),
    )
    _report_log(report)
    print(write_report(report, args.format), end="")
    return OK if report.converged else BUDGET


def _cmd_solve_continuous(model, args) -> int:
    if model.is_discrete:
        _log(f"model '{model.name}' is discrete-time; use solve-discrete")
        return INVALID
    report = solve_infinite(
        model.kernel, model.costs, tol=args.tol, m_max=args.m_max
    ).with_labels(model.labels)
    _report_log(report)
    print(write_report(report, args.format), end="")
    return OK if report.converged else BUDGET


def _cmd_sweep(model, args) -> int:
    if model.is_discrete:
        _log(f"model '{model.name}' is discrete-time; sweep-horizon needs a generator")
        return INVALID
    sweep = horizon_sweep(model.kernel, model.costs, args.horizons, args.level)
    print(write_report(sweep, args.format, labels=model.labels), end="")
    return OK


def _cmd_refine(model, args) -> int:
    if model.is_discrete:
        _log(f"model '{model.name}' is discrete-time; refine-dyadic needs a generator")
        return INVALID
    ladder = default_ladder(model.costs, c_0=args.c0, m_max=args.m_max)
    table = approximation_ladder(
        model.kernel, model.costs, ladder=ladder, tol=args.tol
    )
    last = table.rows[-1]
    _log(
        f"levels={len(table.rows)} final_gap={last.sup_gap:.3e}"
        f" tol={table.tol:g} converged={table.converged} final_ok={table.final_ok}"
    )
    print(write_report(table, args.format), end="")
    return OK if table.converged and table.final_ok else BUDGET


def _cmd_oracle_check(model, args) -> int:
    report = _solve_model(model, args.tol)
    if model.is_discrete:
        oracle_value, oracle_region = oracle_enumerate(model)
        threshold = ORACLE_GAP_DISCRETE if args.threshold is None else args.threshold
    else:
        oracle_value, oracle_region = ctmc_oracle(model.kernel, model.costs)
        threshold = ORACLE_GAP_CONTINUOUS if args.threshold is None else args.threshold
    gaps = np.abs(report.value - oracle_value)
    rows = [
        (model.labels[i], float(report.value[i]), float(oracle_value[i]), float(gaps[i]))
        for i in range(model.n)
    ]
    print(write_report(Table(("state", "solver", "oracle", "abs_gap"), rows), args.format), end="")
    sup = float(np.max(gaps))
    _log(
        f"sup_gap={sup:.3e} threshold={threshold:g}"
        f" solver_region={report.region.labels(model)}"
        f" oracle_region={oracle_region.labels(model)}"
    )
    if sup > threshold:
        _log("oracle-check FAILED")
        return CHECK_FAILED
    return OK


def _resolve_region(model, spec: str):
    if spec == "auto":
        region = _solve_model(model).region
        _log(f"using solver region {region.labels(model)}")
        return region
    labels = [s.strip() for s in spec.split(",") if s.strip()]
    unknown = [s for s in labels if s not in model.labels]
    if unknown:
        raise ValueError(f"unknown state labels {unknown}")
    if not labels:
        raise ValueError("region must name at least one state")
    return StoppingRegion.from_labels(labels, model)


def _cmd_simulate(model, args) -> int:
    region = _resolve_region(model, args.region)
    starts = list(model.labels) if args.state is None else [args.state]
    if args.state is not None and args.state not in model.labels:
        raise ValueError(f"unknown state label {args.state!r}")
    rows = []
    for label in starts:
        idx = model.index_of(label)
        est = evaluate_region_policy(
            model, region, idx, args.paths, t_trunc=args.trunc, seed=args.seed + idx
        )
        rows.append((label, est.mean, est.stderr, est.n_paths, est.truncated_fraction))
    cols = ("state", "mean", "stderr", "n_paths", "truncated_fraction")
    print(write_report(Table(cols, rows), args.format), end="")
    return OK


def _cmd_integrability(model, args) -> int:
    region = _solve_model(model).region
    _log(f"solver region {region.labels(model)}")
    rows = []
    any_violated = False
    for idx, label in enumerate(model.labels):
        res = integrability_check(
            model, region, idx, args.paths, seed=args.seed + idx, t_trunc=args.trunc
        )
        any_violated = any_violated or res.violated
        e = res.estimate
        rows.append((label, e.mean, e.stderr, res.bound, not res.violated))
    cols = ("state", "estimate", "stderr", "bound", "ok")
    print(write_report(Table(cols, rows), args.format), end="")
    if any_violated:
        _log("integrability check FAILED")
        return CHECK_FAILED
    return OK


def run(argv=None) -> int:
    apply_thread_env()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        sys.stderr.write(e.usage)
        _log(f"error: {e.message}")
        return USAGE
    except SystemExit as e:  # --help
        code = e.code
        return int(code) if code else OK
    if getattr(args, "cmd", None) is None:
        sys.stderr.write(parser.format_usage())
        _log("error: a subcommand is required")
        return USAGE

    try:
        text = Path(args.model).read_text()
    except OSError as e:
        sys.stderr.write(parser.format_usage())
        _log(f"error: cannot read model file: {e}")
        return USAGE

    try:
        model = parse_model(text)
    except ModelFormatError as e:
        if args.cmd == "validate":
            rows = [(v,) for v in e.violations]
            print(write_report(Table(("violation",), rows), args.format), end="")
        for v in e.violations:
            _log(f"invalid model: {v}")
        return INVALID

    _log(f"backend={backend_name()}")
    try:
        return args.func(model, args)
    except (ValueError, OverflowError) as e:
        _log(f"error: {e}")
        return INVALID


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
