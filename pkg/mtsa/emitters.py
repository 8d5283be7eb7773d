"""Solver model text for grounded problems.

:py:func:`emit_opl` writes an OPL model in the layout CPLEX Studio projects use
(declarations, decision variables, the piecewise ``kW`` function, objective and
one constraint block per clause) and :py:func:`emit_opl_data` the matching
``.dat`` file. :py:func:`build_milp` models the exact big-M linearization of
``kw = min(demand, bound)`` with pyomo and :py:func:`emit_milp` writes it in the
CPLEX LP file format.
"""

from __future__ import annotations

import logging
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np
import pyomo.environ as pyo
from pyomo.repn import generate_standard_repn

from mtsa.compiler import (
    AtomicConstraint,
    CalendarTerm,
    Compare,
    Cond,
    GroundInstance,
    ImplicationConstraint,
    Junction,
    Linear,
    ParamTerm,
    SeriesTerm,
)
from mtsa.exceptions import BadBigM
from mtsa.utils import format_number

LOG = logging.getLogger(__name__)

__all__ = ("build_milp", "emit_milp", "emit_opl", "emit_opl_data", "implied_interval")

_OPL_OPS = {"=": "==", "<": "<", "<=": "<=", ">=": ">=", ">": ">"}
_TUPLE_FIELDS = ("pInterval", "payPeriod", "year", "month", "day", "hour", "weekDay")


def opl_name(name: str) -> str:
    """``PeakDemandBound`` -> ``peakDemandBound``, ``KW`` -> ``kW``."""
    return name[:1].lower() + name[1:]


class _OplWriter:
    def __init__(self, g: GroundInstance):
        self.g = g
        self.keyed = {p.name: p.keyed for p in g.instance.params}

    def var_name(self, var: str, levels: Mapping[str, str]) -> str:
        if levels[var] == "period":
            return var
        return "i" if var == "t" else var.replace("t", "i", 1)

    def term(self, term, levels: Mapping[str, str]) -> str:
        name = self.var_name(term.var, levels)
        if isinstance(term, CalendarTerm):
            if levels[term.var] == "period":
                return name
            return f"{name}.{'pInterval' if term.field == 'time' else term.field}"
        if isinstance(term, SeriesTerm):
            return f"{opl_name(term.series)}[{name}]"
        if self.keyed[term.param] == "period" and levels[term.var] == "interval":
            return f"{opl_name(term.param)}[{name}.payPeriod]"
        return f"{opl_name(term.param)}[{name}]"

    def linear(self, lin: Linear, levels: Mapping[str, str]) -> str:
        parts: list[str] = []
        for term, coef in lin.terms:
            text = self.term(term, levels)
            magnitude = abs(coef)
            if magnitude != 1.0:
                text = f"{format_number(magnitude)} * {text}"
            if not parts:
                parts.append(text if coef > 0 else f"-{text}")
            else:
                parts.append(f"{'+' if coef > 0 else '-'} {text}")
        if lin.constant or not parts:
            if not parts:
                parts.append(format_number(lin.constant))
            else:
                sign = "+" if lin.constant > 0 else "-"
                parts.append(f"{sign} {format_number(abs(lin.constant))}")
        return " ".join(parts)

    def cond(self, cond: Cond, levels: Mapping[str, str], nested: bool = False) -> str:
        if isinstance(cond, Compare):
            return f"{self.linear(cond.left, levels)} {_OPL_OPS[cond.op]} {self.linear(cond.right, levels)}"
        if not cond.operands:
            return "1 == 1"
        joiner = " && " if cond.op == "AND" else " || "
        text = joiner.join(self.cond(op, levels, nested=True) for op in cond.operands)
        return f"({text})" if nested and len(cond.operands) > 1 else text


def _disjunctions(cond: Cond) -> list[Junction]:
    if isinstance(cond, Compare):
        return []
    found = [cond] if cond.op == "OR" else []
    for operand in cond.operands:
        found.extend(_disjunctions(operand))
    return found


def emit_opl(g: GroundInstance) -> str:
    """Render the OPL model (``.mod``) of a grounded problem.

    Data are declared with ``= ...;`` and supplied by :py:func:`emit_opl_data`.
    """
    roles = g.roles
    w = _OplWriter(g)
    bound, supply, kw, demand = (
        opl_name(roles.bound),
        opl_name(roles.supply),
        opl_name(roles.kw),
        opl_name(roles.demand),
    )
    sense = "minimize" if g.direction == "MINIMIZE" else "maximize"
    offset = f" + {format_number(g.offset)}" if g.offset else ""
    lines = [
        "/*********************************************",
        f" * OPL model for learning event {g.instance.event}",
        " * generated by mtsa",
        " *********************************************/",
        "float timeIntervalSize = ...;",
        "int nbPayPeriods = ...;",
        "float annualBound = ...;",
        "range PayPeriods = 1..nbPayPeriods;",
        "",
        "tuple powerInterval{",
        *(f"  int {name};" for name in _TUPLE_FIELDS),
        "}",
        "",
        "{powerInterval} PowerIntervals = ...;",
        f"float {demand}[PowerIntervals] = ...;",
        "",
        f"dvar float+ {bound}[PayPeriods];",
        f"dvar float+ {kw}[PowerIntervals];",
        f"dvar float+ {supply}[PayPeriods];",
        "",
        f"pwlFunction kWfunction[i in PowerIntervals] = piecewise(1 -> {demand}[i]; 0);",
        "dexpr float generationDemandCharge[p in PayPeriods] = "
        f"{format_number(g.rate)} * {supply}[p]{offset};",
        "dexpr float totalCharge = sum(p in PayPeriods) (generationDemandCharge[p]);",
        "",
        f"{sense} totalCharge;",
        "",
        "subject to {",
        f"  // {roles.within_cid}",
        f"  forall(i in PowerIntervals : i.pInterval <= 0) {kw}[i] == {demand}[i];",
        "",
        f"  // {roles.exceed_cid}",
        f"  forall(i in PowerIntervals : i.pInterval >= 1) {kw}[i] == kWfunction[i]({bound}[i.payPeriod]);",
    ]
    for constraint in g.instance.global_constraints:
        lines.append("")
        levels = {v.name: v.level for v in constraint.variables}
        if isinstance(constraint, AtomicConstraint):
            body = w.cond(constraint.condition, levels)
            lines.append(f"  // {constraint.cid}")
            if not any(level == "period" for level in levels.values()):
                lines.append(f"  {body};")
            else:
                lines.append(f"  forall(p in PayPeriods) {body};")
            continue
        lines.append(f"  // {constraint.cid} ({constraint.source})")
        for junction in _disjunctions(constraint.guard):
            lines.append(f"  // {constraint.cid}: disjunction {w.cond(junction, levels)}")
        consequent = w.cond(constraint.consequent, levels)
        guard = w.cond(constraint.guard, levels)
        period_vars = [name for name, level in levels.items() if level == "period"]
        if not period_vars:
            guard = f"i.payPeriod == p && {guard}"
            # supply indexed by the row's own period is rendered over p
            consequent = consequent.replace(f"{supply}[i.payPeriod]", f"{supply}[p]")
        lines.append("  forall(p in PayPeriods)")
        lines.append(f"    forall(i in PowerIntervals : {guard})")
        lines.append(f"      {consequent};")
    lines.extend(
        [
            "",
            "  // shed budget",
            f"  sum(i in PowerIntervals : i.pInterval >= 1) ({demand}[i] - {kw}[i]) * timeIntervalSize"
            f" <= annualBound * {format_number(g.horizon_years)};",
            "}",
            "",
        ]
    )
    return "\n".join(lines)


def emit_opl_data(g: GroundInstance) -> str:
    """Render the OPL data file (``.dat``) for :py:func:`emit_opl`."""
    cal = g.calendar
    columns = [cal.column(name) for name in ("time", "payPeriod", "year", "month", "day", "hour", "weekDay")]
    rows = zip(*(col.tolist() for col in columns))
    lines = [
        f"timeIntervalSize = {format_number(g.time_interval_size)};",
        f"nbPayPeriods = {g.n_periods};",
        f"annualBound = {format_number(g.annual_bound)};",
        "",
        "PowerIntervals = {",
    ]
    lines.extend(f"  <{', '.join(str(v) for v in row)}>," for row in rows)
    lines.append("};")
    lines.append("")
    values = ", ".join(format_number(d) for d in g.demand.tolist())
    lines.append(f"{opl_name(g.roles.demand)} = [{values}];")
    lines.append("")
    return "\n".join(lines)


def _limit_rule(var: pyo.Var, sense: str, value: float):
    def rule(model: pyo.ConcreteModel, p: int):
        if sense == "<=":
            return var[p] <= value
        if sense == ">=":
            return var[p] >= value
        return var[p] == value

    return rule


def build_milp(g: GroundInstance, big_m: float | None = None) -> pyo.ConcreteModel:
    """Linearize a grounded problem with one binary per future interval.

    For every future ``t`` with ``p = period(t)`` the constraints
    ``kw <= d``, ``kw <= bound[p]``, ``kw >= d - M z`` and
    ``kw >= bound[p] - M (1 - z)`` force ``kw = min(d, bound[p])``.
    Variables are named after the OPL roles (``kW``, ``peakDemandBound``,
    ``payPeriodSupplyDemand``) and indexed by time or pay period; ``kW`` is
    fixed to the demand on ``t <= 0``.

    Args:
        g (GroundInstance): The grounded problem.
        big_m (Optional[float]): The constant M; defaults to the largest demand.

    Raises:
        BadBigM: when M is smaller than the largest demand.

    Returns:
        pyomo.environ.ConcreteModel
    """
    max_demand = g.max_demand
    m = max_demand if big_m is None else float(big_m)
    if m < max_demand:
        raise BadBigM("M must be at least the largest demand", big_m=m, max_demand=max_demand)
    roles = g.roles
    times = g.times.tolist()
    demand = dict(zip(times, g.demand.tolist()))
    periods = g.future_periods.tolist()
    future = g.min_records.tolist()
    period_of = {times[row]: periods[g.period_slot[row]] for row in future}

    model = pyo.ConcreteModel(name=f"MILP for learning event {g.instance.event}")
    model.T = pyo.Set(initialize=times)
    model.F = pyo.Set(initialize=[times[row] for row in future])
    model.P = pyo.Set(initialize=periods)
    kw = pyo.Var(model.T, within=pyo.Reals)
    bound = pyo.Var(model.P, within=pyo.NonNegativeReals)
    supply = pyo.Var(model.P, within=pyo.NonNegativeReals)
    model.add_component(opl_name(roles.kw), kw)
    model.add_component(opl_name(roles.bound), bound)
    model.add_component(opl_name(roles.supply), supply)
    model.z = pyo.Var(model.F, within=pyo.Binary)
    for row in g.fixed_kw.tolist():
        kw[times[row]].fix(demand[times[row]])
    for t in model.F:
        kw[t].setlb(0.0)

    model.cap_demand = pyo.Constraint(model.F, rule=lambda _, t: kw[t] <= demand[t])
    model.cap_bound = pyo.Constraint(model.F, rule=lambda _, t: kw[t] <= bound[period_of[t]])
    model.floor_demand = pyo.Constraint(
        model.F, rule=lambda mdl, t: kw[t] >= demand[t] - m * mdl.z[t]
    )
    model.floor_bound = pyo.Constraint(
        model.F, rule=lambda mdl, t: kw[t] >= bound[period_of[t]] - m * (1 - mdl.z[t])
    )

    # supply rows: one constraint per clause, indexed by (period, t)
    coefs: dict[str, dict[tuple[int, int], float]] = {}
    for group in g.supply:
        for row in group.rows.tolist():
            coefs.setdefault(group.cid, {})[group.period, times[row]] = group.coef
    for cid, by_index in coefs.items():
        model.add_component(f"{cid}_rows", pyo.Set(initialize=list(by_index), dimen=2))
        model.add_component(
            cid,
            pyo.Constraint(
                model.component(f"{cid}_rows"),
                rule=lambda _, p, t, by_index=by_index: supply[p] >= by_index[p, t] * kw[t],
            ),
        )
    if roles.link_cid is not None:
        model.add_component(roles.link_cid, pyo.Constraint(model.P, rule=lambda _, p: supply[p] >= bound[p]))
    for limit in g.limits:
        target = bound if limit.param == roles.bound else supply
        model.add_component(limit.cid, pyo.Constraint(model.P, rule=_limit_rule(target, limit.sense, limit.value)))

    dt = g.time_interval_size
    shed_floor = dt * sum(demand[t] for t in model.F) - g.budget

    def budget_rule(mdl: pyo.ConcreteModel):
        if not len(mdl.F):
            return pyo.Constraint.Skip
        return dt * sum(kw[t] for t in mdl.F) >= shed_floor

    model.budget = pyo.Constraint(rule=budget_rule)
    model.totalCharge = pyo.Objective(
        expr=sum(g.rate * supply[p] for p in model.P) + g.offset * g.n_periods,
        sense=pyo.minimize if g.direction == "MINIMIZE" else pyo.maximize,
    )
    n_rows = sum(1 for _ in model.component_data_objects(pyo.Constraint, active=True))
    LOG.debug(f"MILP for {g.instance.event}: {n_rows} rows, {len(model.z)} binaries")
    return model


def implied_interval(model: pyo.ConcreteModel, var: pyo.Var) -> tuple[float, float]:
    """Feasible range of ``var`` once every other variable holds its current value."""
    lo = -np.inf if var.lb is None else float(var.lb)
    hi = np.inf if var.ub is None else float(var.ub)
    for con in model.component_data_objects(pyo.Constraint, active=True):
        repn = generate_standard_repn(con.body, compute_values=True)
        a, rest = 0.0, float(pyo.value(repn.constant))
        for v, c in zip(repn.linear_vars, repn.linear_coefs):
            if v is var:
                a += c
            else:
                rest += c * pyo.value(v)
        if not a:
            continue
        lower = -np.inf if con.lb is None else (pyo.value(con.lb) - rest) / a
        upper = np.inf if con.ub is None else (pyo.value(con.ub) - rest) / a
        if a < 0:
            lower, upper = upper, lower
        lo, hi = max(lo, lower), min(hi, upper)
    return lo, hi


_LP_SECTIONS = frozenset(
    ("bounds", "binary", "binaries", "general", "generals", "integer", "semi-continuous", "sos", "end")
)
_LP_SENSES = frozenset(("<=", ">=", "=<", "=>", "=", "<", ">"))


def _one_row_per_line(text: str) -> str:
    """Join the term lines of every constraint so each row reads on a single line."""
    out: list[str] = []
    pending: list[str] = []
    in_rows = False
    for line in text.splitlines():
        key = line.strip().lower()
        if key in ("s.t.", "st", "subject to", "such that"):
            in_rows = True
        elif key in _LP_SECTIONS:
            in_rows = False
            out.extend(pending)
            pending = []
        elif in_rows and key and not key.startswith("\\"):
            pending.append(line.strip())
            if _LP_SENSES.intersection(key.split()):
                out.append(" ".join(pending))
                pending = []
            continue
        out.append(line)
    out.extend(pending)
    return "\n".join(out) + "\n"


def emit_milp(g: GroundInstance, big_m: float | None = None) -> str:
    """Write :py:func:`build_milp` with pyomo's CPLEX LP writer and return the file text.

    Symbolic labels keep the model names; each constraint is joined onto one
    line.
    """
    model = build_milp(g, big_m)
    with tempfile.TemporaryDirectory(prefix="mtsa-") as tmp:
        path = Path(tmp) / "model.lp"
        model.write(str(path), io_options={"symbolic_solver_labels": True})
        return _one_row_per_line(path.read_text())
