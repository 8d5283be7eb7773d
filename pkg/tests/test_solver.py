from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from parameterized import parameterized

from mtsa.compiler import Catalog, compile_event, ground
from mtsa.config import SolverConfig
from mtsa.exceptions import (
    DimensionMismatch,
    GridTooLarge,
    InfeasibleSeed,
    NonzeroBudget,
    UnsupportedObjective,
)
from mtsa.parser import parse_script
from mtsa.solver import (
    Solution,
    brute_force_oracle,
    check_solution,
    evaluate,
    local_search,
    solve,
    solve_breakpoints,
    solve_zero_budget,
)
from tests.conftest import EVENT, MTSATestCase, campus_definitions, statement_text

RATE = 8.124
ZERO_BUDGET_OBJECTIVE = 216.0984
ONE_KWH_OBJECTIVE = 200.6628
LARGE_BUDGET_OBJECTIVE = 175.4784


class ZeroBudgetTests(MTSATestCase):
    @parameterized.expand([("zero_budget",), ("breakpoints",), ("local_search",)])
    def test_tiny_optimum(self, solver):
        # GIVEN: TINY with no shedding allowed
        g = self.ground()
        # WHEN: it is solved
        s = solve(g, SolverConfig(solver=solver, horizon_years=1))
        # THEN: every bound admits its period's peak and supply covers 90% of the history
        assert s.bounds.tolist() == pytest.approx([14.0, 12.6])
        assert s.ppsd.tolist() == pytest.approx([14.0, 12.6])
        assert s.objective == pytest.approx(ZERO_BUDGET_OBJECTIVE)
        assert s.shed_total == 0.0
        assert check_solution(g, s).ok

    def test_closed_form_is_optimal(self):
        s = solve_zero_budget(self.ground())
        assert s.status == "Optimal"
        assert s.solver == "zero_budget"
        assert s.kw.tolist() == [10.0, 8.0, 12.0, 10.0, 14.0, 9.0, 11.0]

    def test_oracle_agrees(self):
        s = brute_force_oracle(self.ground(), 0.1)
        assert s.solver == "oracle"
        assert s.objective == pytest.approx(ZERO_BUDGET_OBJECTIVE, abs=RATE * 0.1 * 2)

    def test_closed_form_needs_zero_budget(self):
        with pytest.raises(NonzeroBudget) as info:
            solve_zero_budget(self.ground(annual_bound=1.0))
        assert info.value.budget == 1.0


class BudgetTests(MTSATestCase):
    def test_one_kwh(self):
        # GIVEN: one kWh of shedding over the horizon
        g = self.ground(annual_bound=1.0)
        # WHEN: the breakpoint search runs
        s = solve_breakpoints(g)
        # THEN: the peak of pay period 1 is shaved to 13 which lowers the 90% term of period 2
        assert s.status == "Feasible"
        assert s.objective <= ONE_KWH_OBJECTIVE + 1e-3
        assert s.bounds.tolist() == pytest.approx([13.0, 11.7])
        assert s.shed_total == pytest.approx(1.0)
        assert check_solution(g, s).ok

    @pytest.mark.timeout(300)
    def test_oracle_one_kwh(self):
        # GIVEN: a 1 kWh budget and a grid of 14001 levels per period
        g = self.ground(annual_bound=1.0)
        # WHEN: the oracle enumerates it on four threads
        s = brute_force_oracle(g, 0.001, SolverConfig(workers=4))
        # THEN: it lands within two cents of the breakpoint answer
        assert s.objective == pytest.approx(ONE_KWH_OBJECTIVE, abs=0.02)

    def test_large_budget(self):
        g = self.ground(annual_bound=100.0)
        s = solve_breakpoints(g)
        assert s.objective == pytest.approx(LARGE_BUDGET_OBJECTIVE)
        assert s.ppsd.tolist() == pytest.approx([10.8, 10.8])
        assert check_solution(g, s).ok

    def test_local_search_from_zero_shed(self):
        g = self.ground(annual_bound=1.0)
        s = solve(g, SolverConfig(solver="local_search", annual_bound=1.0, horizon_years=1))
        assert s.solver == "local_search"
        assert s.objective <= ONE_KWH_OBJECTIVE + 1e-3
        assert check_solution(g, s).ok

    def test_local_search_keeps_an_optimal_seed(self):
        g = self.ground()
        seed = solve_zero_budget(g)
        assert local_search(g, seed) is seed

    def test_breakpoints_fall_back_to_local_search(self):
        g = self.ground(annual_bound=1.0)
        config = SolverConfig(annual_bound=1.0, horizon_years=1, max_exhaustive_combos=1)
        s = solve(g, config)
        assert s.solver == "local_search"
        assert check_solution(g, s).ok


class EvaluateTests(MTSATestCase):
    def test_propagation(self):
        e = evaluate(self.ground(annual_bound=1.0), [13.0, 11.0])
        assert e.kw.tolist() == [10.0, 8.0, 12.0, 10.0, 13.0, 9.0, 11.0]
        assert e.ppsd.tolist() == pytest.approx([13.0, 11.7])
        assert e.shed == pytest.approx(1.0)
        assert e.feasible

    def test_budget_violation(self):
        e = evaluate(self.ground(), [13.0, 11.0])
        assert not e.feasible
        assert e.violations[0].constraint_id == "budget"

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch) as info:
            evaluate(self.ground(), [14.0])
        assert info.value.expected == 2

    def test_infeasible_seed(self):
        g = self.ground()
        seed = Solution(g.future_periods, np.zeros(2), np.zeros(2), g.demand, 0.0, 0.0, "Feasible")
        with pytest.raises(InfeasibleSeed):
            local_search(g, seed)

    def test_oracle_grid_cap(self):
        with pytest.raises(GridTooLarge):
            brute_force_oracle(self.ground(), 1e-6)

    def test_maximize_is_not_solved(self):
        text = statement_text(EVENT).replace("FOR MINIMIZE", "FOR MAXIMIZE")
        catalog = Catalog(campus_definitions())
        instance = compile_event(parse_script(text)[0], catalog)
        g = ground(instance, self.store, SolverConfig(horizon_years=1))
        with pytest.raises(UnsupportedObjective):
            solve(g)


class CheckSolutionTests(MTSATestCase):
    def test_tampered_supply(self):
        # GIVEN: the optimum with the supply of period 1 lowered below its peak
        g = self.ground()
        s = solve_zero_budget(g)
        bad = dataclasses.replace(s, ppsd=np.array([13.0, 12.6]))
        # WHEN: it is checked
        report = check_solution(g, bad)
        # THEN: the link, the current month row at t = 2 and the objective are reported
        assert not report.ok
        assert [v.p for v in report.of("C3")] == [1]
        assert [v.t for v in report.of("C1")] == [2]
        assert report.of("objective")

    def test_kw_must_follow_the_bound(self):
        g = self.ground()
        s = solve_zero_budget(g)
        kw = s.kw.copy()
        kw[4] = 13.0
        report = check_solution(g, dataclasses.replace(s, kw=kw))
        assert [v.t for v in report.of("C6")] == [2]

    def test_wrong_shape_is_reported(self):
        g = self.ground()
        s = solve_zero_budget(g)
        report = check_solution(g, dataclasses.replace(s, bounds=np.array([14.0])))
        assert [v.constraint_id for v in report] == ["shape"]

    def test_to_dict(self):
        s = solve_zero_budget(self.ground())
        assert s.to_dict() == {
            "solver": "zero_budget",
            "status": "Optimal",
            "objective": pytest.approx(ZERO_BUDGET_OBJECTIVE),
            "shedTotal": 0.0,
            "periods": [1, 2],
            "bounds": pytest.approx([14.0, 12.6]),
            "ppsd": pytest.approx([14.0, 12.6]),
        }
