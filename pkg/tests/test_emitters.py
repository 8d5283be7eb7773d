from __future__ import annotations

import pyomo.environ as pyo
import pytest
from pyomo.repn import generate_standard_repn

from mtsa.compiler import ground
from mtsa.config import SolverConfig
from mtsa.emitters import build_milp, emit_milp, emit_opl, emit_opl_data, implied_interval, opl_name
from mtsa.exceptions import BadBigM
from tests.conftest import EVENT, MTSATestCase, linear_row


class OplTests(MTSATestCase):
    def setUp(self) -> None:
        super().setUp()
        self.g = ground(self.instance, self.store, SolverConfig(horizon_years=2))

    def test_names(self):
        assert opl_name("PeakDemandBound") == "peakDemandBound"
        assert opl_name("KW") == "kW"

    def test_model_anchors(self):
        # GIVEN: the shipped event grounded over a two year horizon
        # WHEN: the OPL model is rendered
        text = emit_opl(self.g)
        # THEN: the objective, piecewise kw and shed budget are declared
        assert "minimize totalCharge;" in text
        assert "8.124 * payPeriodSupplyDemand[p]" in text
        assert "pwlFunction kWfunction" in text
        assert "<= annualBound * 2;" in text
        assert "dvar float+ peakDemandBound[PayPeriods];" in text
        assert "dvar float+ kW[PowerIntervals];" in text

    def test_every_constraint_is_rendered(self):
        text = emit_opl(self.g)
        for cid in ("C1", "C2", "C3", "C4", "C5", "C6"):
            assert f"// {cid}" in text
        assert "forall(p in PayPeriods) peakDemandBound[p] <= payPeriodSupplyDemand[p];" in text
        assert "forall(p in PayPeriods) peakDemandBound[p] >= 0;" in text

    def test_data_file(self):
        text = emit_opl_data(self.g)
        lines = text.splitlines()
        assert "nbPayPeriods = 2;" in lines
        assert "timeIntervalSize = 1;" in lines
        assert "annualBound = 0;" in lines
        assert "  <-2, 0, 2012, 7, 2, 11, 2>," in lines
        assert "electricPowerDemand = [10, 8, 12, 10, 14, 9, 11];" in lines


class MilpTests(MTSATestCase):
    def test_one_binary_per_future_interval(self):
        model = build_milp(self.ground())
        assert list(model.z) == [1, 2, 3, 4]
        assert all(var.is_binary() for var in model.z.values())
        assert model.totalCharge.sense == pyo.minimize
        repn = generate_standard_repn(model.totalCharge.expr)
        assert {v.name: c for v, c in zip(repn.linear_vars, repn.linear_coefs)} == {
            "payPeriodSupplyDemand[1]": 8.124,
            "payPeriodSupplyDemand[2]": 8.124,
        }

    def test_history_is_fixed(self):
        model = build_milp(self.ground())
        history = {t: model.kW[t].value for t in model.kW if model.kW[t].fixed}
        assert history == {-2: 10.0, -1: 8.0, 0: 12.0}

    def test_min_rows(self):
        # GIVEN: the grounded TINY problem and M = 20
        model = build_milp(self.ground(), big_m=20)
        # WHEN: the rows of t = 2 are read back
        cap = linear_row(model.cap_bound[2], lead="kW[2]")
        floor = linear_row(model.floor_bound[2], lead="kW[2]")
        # THEN: they tie kw to the bound of pay period 1
        assert cap == ({"kW[2]": 1.0, "peakDemandBound[1]": -1.0}, None, 0.0)
        assert floor == ({"kW[2]": 1.0, "peakDemandBound[1]": -1.0, "z[2]": -20.0}, -20.0, None)
        assert linear_row(model.floor_demand[2], lead="kW[2]") == ({"kW[2]": 1.0, "z[2]": 20.0}, 14.0, None)

    def test_row_count(self):
        model = build_milp(self.ground())
        rows = list(model.component_data_objects(pyo.Constraint, active=True))
        # 4 min rows per future interval, 12 supply rows, link and limit per period, budget
        assert len(rows) == 16 + 12 + 4 + 1

    def test_budget_row(self):
        model = build_milp(self.ground(annual_bound=1.0))
        coeffs, lo, hi = linear_row(model.budget, lead="kW[1]")
        assert coeffs == {"kW[1]": 1.0, "kW[2]": 1.0, "kW[3]": 1.0, "kW[4]": 1.0}
        assert lo == pytest.approx(10 + 14 + 9 + 11 - 1)
        assert hi is None

    def test_implied_interval(self):
        model = build_milp(self.ground())
        for var in model.component_data_objects(pyo.Var):
            if not var.fixed:
                var.set_value(0.0)
        model.peakDemandBound[1].set_value(13.0)
        model.z[2].set_value(1.0)
        for p in (1, 2):
            model.payPeriodSupplyDemand[p].set_value(100.0)
        lo, hi = implied_interval(model, model.kW[2])
        assert hi == 13.0

    def test_lp_text(self):
        # GIVEN: the grounded TINY problem
        # WHEN: the MILP is written through pyomo
        text = emit_milp(self.ground())
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        # THEN: the file is a minimization with four binaries and ends the LP format way
        assert f"MILP for learning event {EVENT}" in lines[0]
        assert lines[-1].lower() == "end"
        sections = [line.lower() for line in lines]
        assert "min" in sections or "minimize" in sections
        assert "s.t." in sections
        start = sections.index("binary")
        assert len(lines[start + 1 : -1]) == 4
        # every constraint reads on one line with a single sense
        first = sections.index("s.t.") + 1
        last = next(i for i in range(first, len(sections)) if sections[i] in ("bounds", "binary"))
        rows = lines[first:last]
        assert all(len({"<=", ">=", "="} & set(row.split())) == 1 for row in rows)
        cap = next(row for row in rows if "cap_bound" in row)
        assert "kW" in cap and "peakDemandBound" in cap

    def test_big_m_below_max_demand(self):
        with pytest.raises(BadBigM) as info:
            build_milp(self.ground(), big_m=13.5)
        assert info.value.max_demand == 14.0
