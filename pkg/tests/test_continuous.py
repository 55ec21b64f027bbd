"""Continuous-time solver: closed forms, grid laws, the level ladder."""
import numpy as np
import pytest

import riskstop as rs
from riskstop import CostSpec, StoppingRegion

from conftest import random_ctmc

W_A = 1.0 / 0.9  # two-state closed form: (q + g) w = q at q=1, g=0.1

# Random 4-state generator that once made the coarse grids lie: state 0 has
# (Q + diag g) e^G < 0, so waiting strictly helps there, yet one backward step
# at delta = 2^-4 or 2^-5 leaves e^G fixed everywhere. Kept frozen so the
# solver's must-wait deepening stays exercised.
Q_LOCK = np.array([
    [-3.8758936104615627, 0.2546172747442853, 2.6351388735396943, 0.9861374621775834],
    [0.2426289833257237, -3.6296471336190383, 0.7682544445945118, 2.618763705698803],
    [0.0, 0.3783762629199974, -1.3991572870301712, 1.0207810241101738],
    [0.0, 0.0, 1.5789366681791819, -1.5789366681791819],
])
COSTS_LOCK = CostSpec(
    g=np.array([1.5519981740391247, 1.752968578174796,
                1.189201922013523, 0.3908377285589189]),
    G=np.array([1.3502223490095533, 0.4220621199706913,
                0.9474452415623991, 0.5541361890412275]),
    c=0.3908377285589189,
)


class TestClosedForm:
    def test_solve_infinite(self, ct_model):
        rep = rs.solve_infinite(ct_model.kernel, ct_model.costs, tol=1e-4)
        assert rep.converged
        assert abs(rep.value[0] - W_A) <= 1e-4
        assert rep.region.sorted_indices() == (1,)
        assert rep.level is not None and rep.horizon is not None
        assert rep.sandwich_gap <= 3e-4

    def test_region_value_exact(self, ct_model):
        v = rs.ctmc_region_value(ct_model.kernel, ct_model.costs,
                                 StoppingRegion(frozenset({1})))
        np.testing.assert_allclose(v, [W_A, 1.0], rtol=0, atol=1e-14)

    def test_oracle(self, ct_model):
        value, region = rs.ctmc_oracle(ct_model.kernel, ct_model.costs)
        assert abs(value[0] - W_A) < 1e-14
        assert region.sorted_indices() == (1,)

    def test_never_stoppable_start_is_infinite(self, ct_model):
        v = rs.ctmc_region_value(ct_model.kernel, ct_model.costs,
                                 StoppingRegion(frozenset({0})))
        assert np.isinf(v[1])

    def test_abscissa(self, ct_model):
        a = rs.continuation_abscissa(ct_model.kernel, ct_model.costs,
                                     StoppingRegion(frozenset({1})))
        assert abs(a - (-0.9)) < 1e-12
        assert rs.continuation_abscissa(
            ct_model.kernel, ct_model.costs, rs.full_region(2)) == -np.inf


class TestDyadicBackward:
    def test_long_horizon_close_to_limit(self, ct_model):
        for variant in ("lower", "upper"):
            v = rs.dyadic_backward(ct_model.kernel, ct_model.costs, 40.0, 12,
                                   variant=variant)
            assert abs(v[0] - W_A) <= 2e-3
            assert abs(v[1] - 1.0) <= 1e-12

    def test_zero_horizon_returns_seed(self, ct_model):
        lo = rs.dyadic_backward(ct_model.kernel, ct_model.costs, 0.0, 4)
        np.testing.assert_array_equal(lo, [1.0, 1.0])
        up = rs.dyadic_backward(ct_model.kernel, ct_model.costs, 0.0, 4,
                                variant="upper")
        np.testing.assert_array_equal(up, ct_model.costs.stop_payoff())

    def test_unknown_variant(self, ct_model):
        with pytest.raises(ValueError):
            rs.dyadic_backward(ct_model.kernel, ct_model.costs, 1.0, 4,
                               variant="middle")

    def test_unrepresentable_horizon(self, ct_model):
        costs = CostSpec(g=np.array([70.0, 70.0]), G=np.array([2.0, 0.0]),
                         c=70.0)
        with pytest.raises(OverflowError):
            rs.dyadic_backward(ct_model.kernel, costs, 10.0, 4)

    def test_grid_refinement_monotone(self):
        # finer dyadic grids only add stopping times, so values can only drop
        rng = np.random.default_rng(2024)
        for _ in range(5):
            m = random_ctmc(rng, int(rng.integers(2, 7)), rate_hi=3.0,
                            g_range=(0.05, 2.0), G_range=(0.0, 2.0))
            prev = None
            for level in range(4, 11):
                v = rs.dyadic_backward(m.kernel, m.costs, 4.0, level)
                if prev is not None:
                    assert np.all(v <= prev + 1e-12)
                prev = v


class TestHorizonSweep:
    def test_monotone_and_bracketed(self, ct_model):
        sweep = rs.horizon_sweep(ct_model.kernel, ct_model.costs,
                                 [1.0, 2.0, 4.0, 8.0], 10)
        assert [hv.T for hv in sweep] == [1.0, 2.0, 4.0, 8.0]
        for a, b in zip(sweep, sweep[1:]):
            assert np.all(b.lower >= a.lower - 1e-12)
            assert np.all(b.upper <= a.upper + 1e-12)
        for hv in sweep:
            assert np.all(hv.lower <= hv.upper + 1e-12)
            assert np.all(hv.lower >= 1.0 - 1e-12)
            assert np.all(hv.upper <= ct_model.costs.stop_payoff() + 1e-12)
        assert np.max(sweep[-1].upper - sweep[-1].lower) < 1e-2

    def test_requires_ascending_horizons(self, ct_model):
        with pytest.raises(ValueError):
            rs.horizon_sweep(ct_model.kernel, ct_model.costs, [2.0, 1.0], 8)
        with pytest.raises(ValueError):
            rs.horizon_sweep(ct_model.kernel, ct_model.costs, [], 8)


class TestSolveInfinite:
    def test_matches_oracle_on_hot_models(self):
        # hotter draws than the nightly corpus: rates to 3, g and G to 2
        rng = np.random.default_rng(20260819)
        for _ in range(10):
            m = random_ctmc(rng, int(rng.integers(2, 7)), rate_hi=3.0,
                            g_range=(0.05, 2.0), G_range=(0.0, 2.0))
            rep = rs.solve_infinite(m.kernel, m.costs, tol=1e-4)
            value, _ = rs.ctmc_oracle(m.kernel, m.costs)
            assert rep.converged
            assert np.max(np.abs(rep.value - value)) <= 5e-4

    def test_must_wait_deepening_regression(self):
        rep = rs.solve_infinite(Q_LOCK, COSTS_LOCK, tol=1e-4)
        value, region = rs.ctmc_oracle(Q_LOCK, COSTS_LOCK)
        assert rep.converged
        assert np.max(np.abs(rep.value - value)) <= 5e-4
        assert rep.region.sorted_indices() == region.sorted_indices()
        # state 0 must be recognized as a continuation state
        assert 0 not in rep.region

    def test_zero_stop_cost(self, ct_model):
        costs = CostSpec(g=ct_model.costs.g, G=np.zeros(2), c=0.1)
        rep = rs.solve_infinite(ct_model.kernel, costs)
        np.testing.assert_array_equal(rep.value, [1.0, 1.0])
        assert rep.region.sorted_indices() == (0, 1)
        assert rep.converged

    def test_parameter_validation(self, ct_model):
        with pytest.raises(ValueError):
            rs.solve_infinite(ct_model.kernel, ct_model.costs, m_max=0)
        with pytest.raises(ValueError):
            rs.solve_infinite(ct_model.kernel, ct_model.costs, T_growth=1.1)
        with pytest.raises(ValueError):
            rs.solve_infinite(ct_model.kernel, ct_model.costs, tol=0.0)


class TestLadder:
    def test_default_schedule_arithmetic(self):
        costs = CostSpec(g=np.array([0.1, 0.1]), G=np.array([2.0, 0.0]), c=0.1)
        spec = rs.default_ladder(costs, c_0=0.05)
        # one ulp of slack: the level weights are computed as 1 - 2**-m
        np.testing.assert_allclose(spec.costs_at(1).g, [0.075, 0.075],
                                   rtol=0, atol=1e-16)
        np.testing.assert_allclose(spec.costs_at(2).G, [1.5, 0.0],
                                   rtol=0, atol=1e-16)
        lvl0 = spec.costs_at(0)
        np.testing.assert_array_equal(lvl0.g, [0.05, 0.05])
        np.testing.assert_array_equal(lvl0.G, [0.0, 0.0])

    def test_c0_validation(self):
        costs = CostSpec(g=np.array([0.1, 0.2]), G=np.zeros(2), c=0.1)
        with pytest.raises(ValueError):
            rs.default_ladder(costs, c_0=0.15)
        with pytest.raises(ValueError):
            rs.default_ladder(costs, c_0=0.0)

    def test_converges_on_two_state(self, ct_model):
        table = rs.approximation_ladder(ct_model.kernel, ct_model.costs,
                                        m_max=12, tol=1e-3)
        assert [r.level for r in table.rows] == list(range(13))
        for r in table.rows:
            assert r.step == 2.0 ** (-r.level)
        gaps = [r.sup_gap for r in table.rows]
        assert all(b <= a for a, b in zip(gaps[-4:], gaps[-3:]))
        assert gaps[-1] <= 1e-3
        assert table.converged and table.final_ok
        assert abs(table.reference.value[0] - W_A) <= 1e-3

    def test_zero_stop_cost_gaps_vanish(self, ct_model):
        costs = CostSpec(g=ct_model.costs.g, G=np.zeros(2), c=0.1)
        table = rs.approximation_ladder(ct_model.kernel, costs, m_max=6)
        assert all(r.sup_gap == 0.0 for r in table.rows)

    def test_budget_exhaustion_gives_partial_table(self, ct_model):
        table = rs.approximation_ladder(ct_model.kernel, ct_model.costs,
                                        m_max=12, inner_max_iter=8)
        assert not table.converged
        assert len(table.rows) < 13
