"""Model parsing/serialization round trips and report writers."""
import csv
import io
import json

import numpy as np
import pytest

import riskstop as rs
from riskstop import ModelFormatError, Table

from conftest import random_ctmc, random_dtmc

FLOW_TEXT = """\
{
  "name": "two-state-flow",
  "time": "discrete",
  "states": ["A", "B"],
  "kernel": [[0.0, 1.0], [0.0, 1.0]],
  "g": [0.1, 0.1],
  "G": [2.0, 0.0],
  "c": 0.1
}
"""


def _violations(text):
    with pytest.raises(ModelFormatError) as exc:
        rs.parse_model(text)
    return exc.value.violations


def _doc(**overrides):
    doc = json.loads(FLOW_TEXT)
    doc.update(overrides)
    return json.dumps(doc)


class TestParse:
    def test_flow_document(self):
        m = rs.parse_model(FLOW_TEXT)
        assert m.name == "two-state-flow"
        assert m.labels == ("A", "B")
        assert m.is_discrete
        np.testing.assert_array_equal(m.kernel, [[0.0, 1.0], [0.0, 1.0]])
        assert m.costs.c == 0.1

    def test_c_defaults_to_min_g(self):
        doc = json.loads(FLOW_TEXT)
        del doc["c"]
        m = rs.parse_model(json.dumps(doc))
        assert m.costs.c == 0.1

    def test_syntax_error_carries_position(self):
        (msg,) = _violations("{\n  broken\n}")
        assert msg.startswith("line 2 column 3:")

    def test_row_sum_message(self):
        bad = _doc(kernel=[[0.0, 0.9], [0.0, 1.0]])
        assert "kernel.row[0]: sums to 0.9, expected 1.0" in _violations(bad)

    def test_generator_row_sum_message(self):
        bad = _doc(time="continuous", kernel=[[-1.0, 0.5], [0.0, 0.0]])
        assert "kernel.row[0]: sums to -0.5, expected 0.0" in _violations(bad)

    def test_ragged_kernel(self):
        bad = _doc(kernel=[[0.0, 1.0], [1.0]])
        assert any(v.startswith("kernel.row[1]: expected 2 entries")
                   for v in _violations(bad))

    def test_non_numeric_entry(self):
        bad = _doc(kernel=[[0.0, "x"], [0.0, 1.0]])
        assert any(v.startswith("kernel[0][1]: expected a finite number")
                   for v in _violations(bad))

    def test_multiple_violations_collected(self):
        bad = _doc(kernel=[[0.0, 0.9], [0.0, 1.0]], G=[2.0, -1.0])
        got = _violations(bad)
        assert len(got) >= 2
        assert any("G[1]" in v for v in got)

    def test_unknown_field(self):
        assert any("unknown field" in v
                   for v in _violations(_doc(extra=1)))

    def test_duplicate_states(self):
        assert any("duplicate" in v
                   for v in _violations(_doc(states=["A", "A"])))

    def test_g_below_c(self):
        assert any(v.startswith("g[0]:")
                   for v in _violations(_doc(g=[0.05, 0.1])))

    def test_nonpositive_c(self):
        assert any(v.startswith("c: must be positive")
                   for v in _violations(_doc(c=-1.0)))

    def test_error_message_joins_violations(self):
        err = ModelFormatError(["a: bad", "b: worse"])
        assert str(err) == "a: bad; b: worse"


class TestRoundTrip:
    def test_flow_exact(self):
        m = rs.parse_model(FLOW_TEXT)
        again = rs.parse_model(rs.serialize_model(m))
        assert again.name == m.name
        assert again.time == m.time
        assert again.labels == m.labels
        np.testing.assert_array_equal(again.kernel, m.kernel)
        np.testing.assert_array_equal(again.costs.g, m.costs.g)
        np.testing.assert_array_equal(again.costs.G, m.costs.G)
        assert again.costs.c == m.costs.c

    def test_serialize_is_stable(self):
        m = rs.parse_model(FLOW_TEXT)
        text = rs.serialize_model(m)
        assert rs.serialize_model(rs.parse_model(text)) == text
        assert text.endswith("\n")

    def test_random_models_survive(self):
        rng = np.random.default_rng(99)
        for make in (random_dtmc, random_ctmc):
            m = make(rng, 5)
            back = rs.parse_model(rs.serialize_model(m))
            np.testing.assert_array_equal(back.kernel, m.kernel)
            np.testing.assert_array_equal(back.costs.g, m.costs.g)
            np.testing.assert_array_equal(back.costs.G, m.costs.G)
            assert back.costs.c == m.costs.c


class TestWriteReport:
    def test_solve_report_csv(self, flow_model):
        rep = rs.solve_fixed_point(flow_model)
        text = rs.write_report(rep)
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["state", "value", "in_region"]
        assert rows[1][0] == "A" and rows[2][0] == "B"
        assert float(rows[1][1]) == rep.value[0]
        assert rows[1][2] == "false" and rows[2][2] == "true"
        assert "\r" not in text

    def test_solve_report_json(self, flow_model):
        rep = rs.solve_fixed_point(flow_model)
        doc = json.loads(rs.write_report(rep, format="json"))
        assert doc["converged"] is True
        assert doc["states"][1] == "B"
        assert doc["value"][1] == 1.0
        assert doc["in_region"] == [False, True]

    def test_full_precision_values(self, flow_model):
        rep = rs.solve_fixed_point(flow_model)
        text = rs.write_report(rep)
        cell = text.splitlines()[1].split(",")[1]
        assert float(cell) == rep.value[0]  # %.17g survives reparsing

    def test_sweep_report(self, ct_model):
        sweep = rs.horizon_sweep(ct_model.kernel, ct_model.costs,
                                 [1.0, 2.0], 6)
        text = rs.write_report(sweep, labels=ct_model.labels)
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["T", "state", "lower", "upper"]
        assert len(rows) == 1 + 2 * 2
        assert rows[1][:2] == ["1", "A"]

    def test_ladder_report(self, ct_model):
        table = rs.approximation_ladder(ct_model.kernel, ct_model.costs,
                                        m_max=4)
        text = rs.write_report(table)
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["m", "delta", "sup_gap"]
        assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4"]
        doc = json.loads(rs.write_report(table, format="json"))
        assert doc["final_ok"] == table.final_ok

    def test_mc_reports(self, flow_model):
        est = rs.evaluate_region_policy(flow_model, [1], 0, 100)
        text = rs.write_report(est)
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["mean", "stderr", "n_paths", "truncated_fraction"]
        chk = rs.integrability_check(flow_model, [1], 0, 100)
        header = rs.write_report(chk).splitlines()[0].split(",")
        assert header == ["estimate", "stderr", "n_paths",
                          "truncated_fraction", "bound", "ok"]

    def test_generic_table_both_formats(self):
        t = Table(columns=("a", "b"), rows=((1, 2.5), (3, np.inf)))
        assert rs.write_report(t) == "a,b\n1,2.5\n3,inf\n"
        doc = json.loads(rs.write_report(t, format="json"))
        assert doc[0] == {"a": 1, "b": 2.5}

    def test_table_width_checked(self):
        with pytest.raises(ValueError):
            Table(columns=("a",), rows=((1, 2),))

    def test_unknown_payload_and_format(self, flow_model):
        with pytest.raises(TypeError):
            rs.write_report(object())
        rep = rs.solve_fixed_point(flow_model)
        with pytest.raises(ValueError):
            rs.write_report(rep, format="xml")
