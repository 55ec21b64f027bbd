"""Model file parsing and report serialization.

Models are JSON objects with fields name, time, states, kernel, g, G and an
optional c (defaults to min g). Parse errors collect every violation, each
annotated with the field path that caused it, so a bad file is fixable in
one round trip.

Reports serialize to CSV (LF line endings, %.17g floats, so a rerun is
byte-comparable) or to a JSON mirror that also carries the scalar
certificates.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .continuous import HorizonValue, LadderTable
from .discrete import SolveReport
from .mc import IntegrabilityResult, McEstimate
from .model import CONTINUOUS, DISCRETE, CostSpec, MarkovModel, ROW_TOL, validate_model

FORMATS = ("csv", "json")


class ModelFormatError(ValueError):
    """Invalid model file; .violations lists every problem found."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _check_vector(data, key: str, n: int, out: list):
    vec = data.get(key)
    if not isinstance(vec, list) or len(vec) != n:
        got = len(vec) if isinstance(vec, list) else type(vec).__name__
        out.append(f"{key}: expected a list of {n} numbers, got {got}")
        return None
    bad = False
    for i, v in enumerate(vec):
        if not _is_number(v) or not np.isfinite(v):
            out.append(f"{key}[{i}]: expected a finite number, got {v!r}")
            bad = True
    return None if bad else np.array(vec, dtype=float)


def parse_model(text: str) -> MarkovModel:
    """Parse a JSON model document.

    Raises ModelFormatError carrying all violations at once; JSON syntax
    errors are reported with line and column, schema and invariant errors
    with the offending field path.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError([f"line {e.lineno} column {e.colno}: {e.msg}"]) from None
    if not isinstance(data, dict):
        raise ModelFormatError(["top level: expected a JSON object"])

    viol = []
    name = data.get("name")
    if not isinstance(name, str) or not name:
        viol.append("name: expected a non-empty string")
    time = data.get("time")
    if time not in (DISCRETE, CONTINUOUS):
        viol.append(f"time: expected '{DISCRETE}' or '{CONTINUOUS}', got {time!r}")
    states = data.get("states")
    if not isinstance(states, list) or not states or not all(
        isinstance(s, str) and s for s in states
    ):
        viol.append("states: expected a non-empty list of state labels")
        states = None
    elif len(set(states)) != len(states):
        dupes = sorted({s for s in states if states.count(s) > 1})
        viol.append(f"states: duplicate labels {dupes}")
        states = None

    known = {"name", "time", "states", "kernel", "g", "G", "c"}
    for key in sorted(set(data) - known):
        viol.append(f"{key}: unknown field")

    if states is None:
        raise ModelFormatError(viol)
    n = len(states)

    kernel = data.get("kernel")
    K = None
    if not isinstance(kernel, list) or len(kernel) != n:
        got = len(kernel) if isinstance(kernel, list) else type(kernel).__name__
        viol.append(f"kernel: expected {n} rows, got {got}")
    else:
        ok = True
        for i, row in enumerate(kernel):
            if not isinstance(row, list) or len(row) != n:
                got = len(row) if isinstance(row, list) else type(row).__name__
                viol.append(f"kernel.row[{i}]: expected {n} entries, got {got}")
                ok = False
                continue
            for j, v in enumerate(row):
                if not _is_number(v) or not np.isfinite(v):
                    viol.append(f"kernel[{i}][{j}]: expected a finite number, got {v!r}")
                    ok = False
        if ok:
            K = np.array(kernel, dtype=float)

    g = _check_vector(data, "g", n, viol)
    G = _check_vector(data, "G", n, viol)
    c = data.get("c")
    if c is not None and (not _is_number(c) or not np.isfinite(c)):
        viol.append(f"c: expected a finite number, got {c!r}")
        c = None

    if K is not None and time in (DISCRETE, CONTINUOUS):
        target = 1.0 if time == DISCRETE else 0.0
        for i in range(n):
            s = float(K[i].sum())
            if abs(s - target) > ROW_TOL * max(1.0, float(np.abs(K[i]).sum())):
                viol.append(f"kernel.row[{i}]: sums to {s:.12g}, expected {target:.1f}")
        for i in range(n):
            for j in range(n):
                v = K[i, j]
                if time == DISCRETE and v < 0.0:
                    viol.append(f"kernel[{i}][{j}]: negative probability {v:.6g}")
                elif time == CONTINUOUS and i != j and v < 0.0:
                    viol.append(f"kernel[{i}][{j}]: negative rate {v:.6g}")
                elif time == CONTINUOUS and i == j and v > 0.0:
                    viol.append(f"kernel[{i}][{j}]: positive diagonal {v:.6g}")

    if g is not None:
        if c is None:
            c = float(np.min(g))
        if c <= 0.0:
            viol.append(f"c: must be positive, got {c:g}")
        else:
            for i in range(n):
                if g[i] < c:
                    viol.append(f"g[{i}]: {g[i]:g} is below c={c:g}")
    if G is not None:
        for i in range(n):
            if G[i] < 0.0:
                viol.append(f"G[{i}]: negative stop cost {G[i]:.6g}")

    if viol:
        raise ModelFormatError(viol)

    model = MarkovModel(
        name=name, time=time, labels=tuple(states), kernel=K,
        costs=CostSpec(g=g, G=G, c=float(c)),
    )
    leftover = validate_model(model)
    if leftover:
        raise ModelFormatError(leftover)
    return model


def serialize_model(model: MarkovModel) -> str:
    """JSON text that parse_model maps back to an equal model. Floats use
    shortest round-trip repr, so the trip is exact."""
    doc = {
        "name": model.name,
        "time": model.time,
        "states": list(model.labels),
        "kernel": [[float(v) for v in row] for row in model.kernel],
        "g": [float(v) for v in model.costs.g],
        "G": [float(v) for v in model.costs.G],
        "c": float(model.costs.c),
    }
    return json.dumps(doc, indent=2) + "\n"


@dataclass(frozen=True)
class Table:
    """Generic column-named report payload."""

    columns: tuple
    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError("row width does not match columns")


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _json_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return str(v)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _state_labels(k: int, labels) -> list:
    if labels is None:
        return [str(i) for i in range(k)]
    return [str(s) for s in labels]


def _solve_rows(report: SolveReport):
    labels = _state_labels(len(report.value), report.labels)
    return [
        (labels[i], float(report.value[i]), i in report.region)
        for i in range(len(report.value))
    ]


def write_report(obj, format: str = "csv", labels=None) -> str:
    """Serialize a solver, sweep, ladder, or sampling result.

    CSV output is rows only (scalars like residuals live in the JSON form);
    row order is fixed by state order and table order, so equal results are
    byte-equal.
    """
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")

    if isinstance(obj, SolveReport):
        rows = _solve_rows(obj)
        if format == "csv":
            return _csv(("state", "value", "in_region"), rows)
        return json.dumps(
            {
                "states": [r[0] for r in rows],
                "value": [r[1] for r in rows],
                "in_region": [r[2] for r in rows],
                "iterations": int(obj.iterations),
                "residual": float(obj.residual),
                "sandwich_gap": float(obj.sandwich_gap),
                "converged": bool(obj.converged),
                "level": None if obj.level is None else int(obj.level),
                "horizon": None if obj.horizon is None else float(obj.horizon),
            },
            indent=2,
        ) + "\n"

    if isinstance(obj, list) and all(isinstance(h, HorizonValue) for h in obj):
        names = _state_labels(len(obj[0].lower) if obj else 0, labels)
        rows = []
        for h in obj:
            for i, s in enumerate(names):
                rows.append((float(h.T), s, float(h.lower[i]), float(h.upper[i])))
        if format == "csv":
            return _csv(("T", "state", "lower", "upper"), rows)
        return json.dumps(
            [
                {"T": r[0], "state": r[1], "lower": r[2], "upper": r[3]}
                for r in rows
            ],
            indent=2,
        ) + "\n"

    if isinstance(obj, LadderTable):
        rows = [(r.level, float(r.step), float(r.sup_gap)) for r in obj.rows]
        if format == "csv":
            return _csv(("m", "delta", "sup_gap"), rows)
        return json.dumps(
            {
                "rows": [
                    {"m": r[0], "delta": r[1], "sup_gap": r[2]} for r in rows
                ],
                "tol": float(obj.tol),
                "final_ok": bool(obj.final_ok),
                "converged": bool(obj.converged),
            },
            indent=2,
        ) + "\n"

    if isinstance(obj, McEstimate):
        obj = Table(
            ("mean", "stderr", "n_paths", "truncated_fraction"),
            [(obj.mean, obj.stderr, obj.n_paths, obj.truncated_fraction)],
        )
    if isinstance(obj, IntegrabilityResult):
        e = obj.estimate
        obj = Table(
            ("estimate", "stderr", "n_paths", "truncated_fraction", "bound", "ok"),
            [(e.mean, e.stderr, e.n_paths, e.truncated_fraction, obj.bound, not obj.violated)],
        )
    if isinstance(obj, Table):
        if format == "csv":
            return _csv(obj.columns, obj.rows)
        return json.dumps(
            [
                {c: _json_cell(v) for c, v in zip(obj.columns, r)}
                for r in obj.rows
            ],
            indent=2,
        ) + "\n"

    raise TypeError(f"no report writer for {type(obj).__name__}")
