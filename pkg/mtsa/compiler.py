"""Lowering of learning events into parametric estimation problems.

:py:func:`compile_event` turns a ``CREATE EVENT`` and the views it reads into a
symbolic :py:class:`PEInstance`: input series, learned parameter sets, global
constraints, monitoring constraints and the objective. Views are inlined,
``.time`` equalities in view and event ``WHERE``/``CASE`` conjunctions join
table rows into one quantified variable, and a variable whose every reference
is period level (the ``period`` key or a per-period parameter) ranges over pay
periods instead of intervals.

:py:func:`ground` expands that problem against a calendar and the loaded
demand series into a :py:class:`GroundInstance` the solvers and emitters use.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Mapping, Tuple, Union

import numpy as np

from mtsa.config import SolverConfig
from mtsa.exceptions import (
    CalendarGap,
    CompileError,
    GroundingError,
    MissingSeries,
    NonLinearObjective,
    UnresolvedReference,
    UnsupportedConstraintShape,
    UnsupportedGuardShape,
)
from mtsa.statements import (
    Arith,
    BoolOp,
    CaseExpr,
    ColumnDef,
    ColumnRef,
    ColumnType,
    Comparison,
    Condition,
    CreateEvent,
    CreateTable,
    CreateView,
    Expr,
    Ident,
    NumberLit,
    Statement,
    StringLit,
    TableRef,
)
from mtsa.timeseries import CalendarTable, DataStore, validate_calendar

LOG = logging.getLogger(__name__)

__all__ = (
    "AtomicConstraint",
    "CalendarTerm",
    "Catalog",
    "Compare",
    "GroundInstance",
    "ImplicationConstraint",
    "Junction",
    "Linear",
    "ObjectiveSpec",
    "PEInstance",
    "ParamSet",
    "ParamTerm",
    "QuantVar",
    "SeriesTerm",
    "SupplyGroup",
    "compile_event",
    "ground",
    "interpret",
)

# calendar table name -> calendar column; the non-key column of each table reads it
CALENDAR_TABLES = {
    "payperiod": "payPeriod",
    "year": "year",
    "month": "month",
    "day": "day",
    "hour": "hour",
    "weekday": "weekDay",
}

_BUILTIN_CALENDAR = {
    "payperiod": ("PayPeriod", "period", ColumnType.MONTHLY_INTERVAL),
    "year": ("Year", "y", ColumnType.INTEGER),
    "month": ("Month", "m", ColumnType.INTEGER),
    "day": ("Day", "d", ColumnType.INTEGER),
    "hour": ("Hour", "h", ColumnType.INTEGER),
    "weekday": ("WeekDay", "d", ColumnType.INTEGER),
}

_FLIP = {"<": ">", "<=": ">=", "=": "=", ">=": "<=", ">": "<"}


class Catalog:
    """Tables, views and events known to a script or workspace.

    Names are looked up case-insensitively; a later definition replaces an
    earlier one. The six calendar tables are predefined and may be redeclared.
    """

    def __init__(self, statements: Iterable[Statement] = ()):
        self.tables: dict[str, CreateTable] = {}
        self.views: dict[str, CreateView] = {}
        self.events: dict[str, CreateEvent] = {}
        for key, (name, column, column_type) in _BUILTIN_CALENDAR.items():
            self.tables[key] = CreateTable(
                Ident(name),
                (
                    ColumnDef(Ident("time"), ColumnType.HOURLY_INTERVAL),
                    ColumnDef(Ident(column), column_type),
                ),
            )
        for stmt in statements:
            self.add(stmt)

    def add(self, stmt: Statement) -> None:
        key = stmt.name.key if hasattr(stmt, "name") else None  # type: ignore[union-attr]
        if isinstance(stmt, CreateTable):
            self.views.pop(key, None)
            self.tables[key] = stmt
        elif isinstance(stmt, CreateView):
            self.tables.pop(key, None)
            self.views[key] = stmt
        elif isinstance(stmt, CreateEvent):
            self.events[key] = stmt
        else:
            raise CompileError(f"{type(stmt).__name__} is not a definition")

    def table(self, name: str) -> CreateTable | None:
        return self.tables.get(name.casefold())

    def view(self, name: str) -> CreateView | None:
        return self.views.get(name.casefold())

    def event(self, name: str) -> CreateEvent | None:
        return self.events.get(name.casefold())


# IR


@dataclass(frozen=True)
class CalendarTerm:
    """A calendar attribute of a quantified variable; ``time`` is the index itself."""

    field: str
    var: str


@dataclass(frozen=True)
class SeriesTerm:
    series: str
    var: str


@dataclass(frozen=True)
class ParamTerm:
    param: str
    var: str


Term = Union[CalendarTerm, SeriesTerm, ParamTerm]


@dataclass(frozen=True)
class Linear:
    """``sum(coef * term) + constant``."""

    terms: Tuple[Tuple[Term, float], ...] = ()
    constant: float = 0.0

    @classmethod
    def const(cls, value: float) -> Linear:
        return cls((), float(value))

    @classmethod
    def of(cls, term: Term, coef: float = 1.0) -> Linear:
        return cls(((term, float(coef)),), 0.0)

    def __add__(self, other: Linear) -> Linear:
        merged: Dict[Term, float] = dict(self.terms)
        for term, coef in other.terms:
            merged[term] = merged.get(term, 0.0) + coef
        return Linear(
            tuple((t, c) for t, c in merged.items() if c != 0.0),
            self.constant + other.constant,
        )

    def scale(self, factor: float) -> Linear:
        if factor == 0.0:
            return Linear.const(0.0)
        return Linear(
            tuple((t, c * factor) for t, c in self.terms), self.constant * factor
        )

    def __sub__(self, other: Linear) -> Linear:
        return self + other.scale(-1.0)

    @property
    def is_constant(self) -> bool:
        return not self.terms

    def coef(self, term: Term) -> float:
        return dict(self.terms).get(term, 0.0)


@dataclass(frozen=True)
class Compare:
    left: Linear
    op: str
    right: Linear


@dataclass(frozen=True)
class Junction:
    """``AND``/``OR`` of conditions; an empty ``AND`` is true."""

    op: str
    operands: Tuple[Cond, ...]


Cond = Union[Compare, Junction]
TRUE = Junction("AND", ())


@dataclass(frozen=True)
class QuantVar:
    name: str
    level: str  # "interval" | "period"


@dataclass(frozen=True)
class AtomicConstraint:
    cid: str
    variables: Tuple[QuantVar, ...]
    condition: Cond
    source: str = ""


@dataclass(frozen=True)
class ImplicationConstraint:
    cid: str
    variables: Tuple[QuantVar, ...]
    guard: Cond
    consequent: Compare
    source: str = ""


Constraint = Union[AtomicConstraint, ImplicationConstraint]


@dataclass(frozen=True)
class ParamSet:
    name: str
    keyed: str  # "period" | "interval"
    arity: int = 1


@dataclass(frozen=True)
class ObjectiveSpec:
    """``direction sum over future periods of (rate * param[p] + offset)``."""

    direction: str
    rate: float
    param: str
    offset: float = 0.0
    alias: str | None = None


@dataclass(frozen=True)
class PEInstance:
    event: str
    series: Tuple[str, ...]
    params: Tuple[ParamSet, ...]
    global_constraints: Tuple[Constraint, ...]
    monitoring_constraints: Tuple[Constraint, ...]
    objective: ObjectiveSpec

    @property
    def constraints(self) -> Tuple[Constraint, ...]:
        """All constraints in clause order."""
        return tuple(
            sorted(
                self.global_constraints + self.monitoring_constraints,
                key=lambda c: int(c.cid[1:]),
            )
        )

    def param(self, name: str) -> ParamSet:
        for param in self.params:
            if param.name.casefold() == name.casefold():
                return param
        raise UnresolvedReference(f"{name} is not a learned parameter", event=self.event)


# resolution of view chains


@dataclass(eq=False)
class _TableInstance:
    uid: int
    table: CreateTable


@dataclass(eq=False)
class _ViewInstance:
    view: CreateView
    scope: _Scope


@dataclass(eq=False)
class _Scope:
    owner: str
    bindings: Dict[str, Union[_TableInstance, _ViewInstance]] = field(default_factory=dict)


@dataclass(frozen=True)
class _RCol:
    uid: int
    table: CreateTable
    column: Ident


@dataclass(frozen=True)
class _RArith:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class _RCase:
    condition: object
    then: object
    else_: object
    owner: str


@dataclass(frozen=True)
class _RCompare:
    left: object
    op: str
    right: object


@dataclass(frozen=True)
class _RBool:
    op: str
    operands: tuple


class _UnionFind:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, x: int) -> int:
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _conjuncts(condition: Condition | None) -> list[Condition]:
    if condition is None:
        return []
    if isinstance(condition, BoolOp) and condition.op == "AND":
        return list(condition.operands)
    return [condition]


class _Resolver:
    """Resolves column references through view chains into table columns."""

    def __init__(self, catalog: Catalog, learn: Iterable[str] = ()):
        self.catalog = catalog
        self.learn = {name.casefold() for name in learn}
        self.uf = _UnionFind()
        self._uids = itertools.count()
        self._stack: list[str] = []

    def scope(self, owner: str, refs: Iterable[TableRef]) -> _Scope:
        scope = _Scope(owner)
        for ref in refs:
            key = ref.binding.key
            if key in scope.bindings:
                raise CompileError(f"alias {ref.binding} used twice", scope=owner)
            scope.bindings[key] = self._instance(ref.name, owner)
        return scope

    def _instance(self, name: Ident, owner: str) -> _TableInstance | _ViewInstance:
        table = self.catalog.table(name)
        if table is not None:
            uid = next(self._uids)
            self.uf.find(uid)
            return _TableInstance(uid, table)
        view = self.catalog.view(name)
        if view is None:
            raise UnresolvedReference(f"unknown table or view {name}", scope=owner)
        if view.name.key in self._stack:
            raise CompileError(f"view {view.name} refers to itself", scope=owner)
        self._stack.append(view.name.key)
        try:
            inner = self.scope(str(view.name), view.select.from_refs)
            instance = _ViewInstance(view, inner)
            for conjunct in _conjuncts(view.select.where):
                if not self.join(conjunct, inner):
                    raise UnsupportedGuardShape(
                        "a view WHERE may only join rows on time", view=str(view.name)
                    )
            for item in view.select.items:
                if isinstance(item.expr, CaseExpr):
                    for conjunct in _conjuncts(item.expr.condition):
                        self.join(conjunct, inner)
        finally:
            self._stack.pop()
        return instance

    def join(self, condition: Condition, scope: _Scope) -> bool:
        """Union the rows of a ``X.time = Y.time`` conjunct; False if it is not one."""
        if not (isinstance(condition, Comparison) and condition.op == "="):
            return False
        if not (isinstance(condition.left, ColumnRef) and isinstance(condition.right, ColumnRef)):
            return False
        left = self.expr(condition.left, scope)
        right = self.expr(condition.right, scope)
        if _is_time(left) and _is_time(right):
            self.uf.union(left.uid, right.uid)
            return True
        return False

    def expr(self, expr: Expr, scope: _Scope) -> object:
        if isinstance(expr, ColumnRef):
            return self.column(expr, scope)
        if isinstance(expr, (NumberLit, StringLit)):
            return expr
        if isinstance(expr, Arith):
            return _RArith(expr.op, self.expr(expr.left, scope), self.expr(expr.right, scope))
        if isinstance(expr, CaseExpr):
            return _RCase(
                self.condition(expr.condition, scope, strip_joins=True),
                expr.then,
                expr.else_,
                scope.owner,
            )
        raise CompileError(f"unsupported expression {expr!r}", scope=scope.owner)

    def condition(self, condition: Condition, scope: _Scope, strip_joins: bool = False) -> object:
        if isinstance(condition, Comparison):
            return _RCompare(
                self.expr(condition.left, scope), condition.op, self.expr(condition.right, scope)
            )
        operands = []
        for operand in condition.operands:
            if strip_joins and condition.op == "AND" and self._is_join(operand, scope):
                continue
            operands.append(self.condition(operand, scope))
        return _RBool(condition.op, tuple(operands))

    def _is_join(self, condition: Condition, scope: _Scope) -> bool:
        if not (isinstance(condition, Comparison) and condition.op == "="):
            return False
        if not (isinstance(condition.left, ColumnRef) and isinstance(condition.right, ColumnRef)):
            return False
        return _is_time(self.expr(condition.left, scope)) and _is_time(
            self.expr(condition.right, scope)
        )

    def column(self, ref: ColumnRef, scope: _Scope) -> object:
        if ref.qualifier is None:
            matches = [
                source for source in scope.bindings.values() if _has_column(source, ref.name)
            ]
            if len(matches) != 1:
                raise UnresolvedReference(
                    f"column {ref.name} is {'ambiguous' if matches else 'unknown'}",
                    scope=scope.owner,
                )
            source = matches[0]
        else:
            source = scope.bindings.get(ref.qualifier.key)
            if source is None:
                raise UnresolvedReference(f"unknown alias {ref.qualifier}", scope=scope.owner)
        if isinstance(source, _TableInstance):
            column = source.table.column(ref.name)
            if column is None:
                raise UnresolvedReference(
                    f"{source.table.name} has no column {ref.name}", scope=scope.owner
                )
            return _RCol(source.uid, source.table, column.name)
        for item in source.view.select.items:
            if item.output_name == ref.name:
                return self.expr(item.expr, source.scope)
        raise UnresolvedReference(
            f"view {source.view.name} has no column {ref.name}", scope=scope.owner
        )


def _has_column(source: _TableInstance | _ViewInstance, name: Ident) -> bool:
    if isinstance(source, _TableInstance):
        return source.table.column(name) is not None
    return any(item.output_name == name for item in source.view.select.items)


def _is_time(node: object) -> bool:
    return isinstance(node, _RCol) and node.column == "time"


def _is_true_literal(literal: object) -> bool:
    if isinstance(literal, StringLit):
        return literal.value == "1"
    return isinstance(literal, NumberLit) and literal.value == 1.0


# lowering of resolved trees to the IR


class _Lowering:
    """Turns resolved trees into IR with one variable per joined row class."""

    def __init__(self, resolver: _Resolver, catalog: Catalog, learn: Mapping[str, ParamSet]):
        self.resolver = resolver
        self.catalog = catalog
        self.learn = learn

    def var(self, uid: int) -> str:
        return f"v{self.resolver.uf.find(uid)}"

    def term(self, col: _RCol) -> Term:
        var = self.var(col.uid)
        key = col.table.name.key
        if col.column == "time":
            return CalendarTerm("time", var)
        column_def = col.table.column(col.column)
        if key in CALENDAR_TABLES:
            return CalendarTerm(CALENDAR_TABLES[key], var)
        if column_def is not None and column_def.type.is_interval:
            return CalendarTerm("payPeriod", var)
        values = [c for c in col.table.columns if not c.type.is_interval]
        if len(values) != 1:
            raise CompileError(
                f"table {col.table.name} must have exactly one value column",
                table=str(col.table.name),
            )
        if key in self.learn:
            return ParamTerm(self.learn[key].name, var)
        return SeriesTerm(str(col.table.name), var)

    def linear(self, node: object, error: type[CompileError]) -> Linear:
        if isinstance(node, NumberLit):
            return Linear.const(node.value)
        if isinstance(node, _RCol):
            return Linear.of(self.term(node))
        if isinstance(node, _RArith):
            left = self.linear(node.left, error)
            right = self.linear(node.right, error)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if left.is_constant:
                return right.scale(left.constant)
            if right.is_constant:
                return left.scale(right.constant)
            raise error("product of two columns is not linear")
        if isinstance(node, StringLit):
            raise error(f"string {node.value!r} in arithmetic")
        raise error("CASE expressions are only allowed as indicator guards")

    def cond(self, node: object) -> Cond:
        if isinstance(node, _RBool):
            return Junction(node.op, tuple(self.cond(op) for op in node.operands))
        assert isinstance(node, _RCompare)
        # an indicator column tested against '1' stands for its CASE condition
        for case, literal in ((node.left, node.right), (node.right, node.left)):
            if isinstance(case, _RCase):
                if node.op != "=" or not _is_true_literal(literal):
                    raise UnsupportedGuardShape(
                        "an indicator may only be tested with = '1'", view=case.owner
                    )
                return self.guard(case)
        left = self.linear(node.left, UnsupportedGuardShape)
        right = self.linear(node.right, UnsupportedGuardShape)
        if node.op not in _FLIP:
            raise UnsupportedGuardShape(f"operator {node.op!r}")
        return Compare(left, node.op, right)

    def guard(self, case: object) -> Cond:
        if not isinstance(case, _RCase) or not _is_true_literal(case.then):
            raise UnsupportedGuardShape(
                "a guard must be an indicator column CASE WHEN ... THEN '1'",
            )
        if case.else_ is not None and _is_true_literal(case.else_):
            raise UnsupportedGuardShape("indicator ELSE must not be '1'", view=case.owner)
        return self.cond(case.condition)


def _terms(cond: Cond | Linear) -> Iterator[Term]:
    if isinstance(cond, Linear):
        for term, _ in cond.terms:
            yield term
    elif isinstance(cond, Compare):
        yield from _terms(cond.left)
        yield from _terms(cond.right)
    else:
        for operand in cond.operands:
            yield from _terms(operand)


def _compares(cond: Cond) -> Iterator[Compare]:
    if isinstance(cond, Compare):
        yield cond
    else:
        for operand in cond.operands:
            yield from _compares(operand)


def _rename(cond, names: Mapping[str, str]):
    if isinstance(cond, Linear):
        return Linear(
            tuple((type(t)(*_fields(t)[:-1], names[t.var]), c) for t, c in cond.terms),
            cond.constant,
        )
    if isinstance(cond, Compare):
        return Compare(_rename(cond.left, names), cond.op, _rename(cond.right, names))
    return Junction(cond.op, tuple(_rename(op, names) for op in cond.operands))


def _fields(term: Term) -> tuple:
    if isinstance(term, CalendarTerm):
        return (term.field, term.var)
    if isinstance(term, SeriesTerm):
        return (term.series, term.var)
    return (term.param, term.var)


def _quantify(parts: list, params: Mapping[str, ParamSet]) -> tuple[tuple[QuantVar, ...], dict]:
    """Name the variables of a constraint ``t``/``p`` by level, in order of first use."""
    order: list[str] = []
    interval: set[str] = set()
    for part in parts:
        for term in _terms(part):
            if term.var not in order:
                order.append(term.var)
            if isinstance(term, CalendarTerm) and term.field != "payPeriod":
                interval.add(term.var)
            elif isinstance(term, SeriesTerm):
                interval.add(term.var)
            elif isinstance(term, ParamTerm) and params[term.param.casefold()].keyed == "interval":
                interval.add(term.var)
    names: dict[str, str] = {}
    counts = {"interval": 0, "period": 0}
    variables = []
    for var in order:
        level = "interval" if var in interval else "period"
        counts[level] += 1
        base = "t" if level == "interval" else "p"
        names[var] = base if counts[level] == 1 else f"{base}{counts[level]}"
        variables.append(QuantVar(names[var], level))
    return tuple(variables), names


def _is_monitoring(guard: Cond, params: Mapping[str, ParamSet]) -> bool:
    """A guard detects an event when it compares an input series with a learned parameter."""
    for compare in _compares(guard):
        kinds = set()
        for side in (compare.left, compare.right):
            kinds.update(type(term) for term, _ in side.terms)
        if SeriesTerm in kinds and ParamTerm in kinds:
            return True
    return False


def compile_event(event: CreateEvent, catalog: Catalog) -> PEInstance:
    """Lower a learning event into a symbolic estimation problem.

    Args:
        event (CreateEvent): The parsed ``CREATE EVENT``.
        catalog (Catalog): Tables and views the event may reference.

    Returns:
        PEInstance: Constraints are numbered ``C1..Cn`` in ``WITH`` order;
        implication clauses whose guard compares an input series with a
        learned parameter are monitoring constraints, all others global.

    Raises:
        UnresolvedReference: for unknown tables, views, aliases or columns.
        NonLinearObjective: when the objective is not ``rate * param + offset``.
        UnsupportedGuardShape: when a guard is not an indicator tested with ``'1'``.
    """
    learn: dict[str, ParamSet] = {}
    for name in event.learn_params:
        table = catalog.table(name)
        if table is None:
            raise UnresolvedReference(f"unknown parameter table {name}", event=str(event.name))
        keyed = (
            "period"
            if any(c.type.is_interval and c.name != "time" for c in table.columns)
            else "interval"
        )
        learn[name.key] = ParamSet(str(table.name), keyed)

    resolver = _Resolver(catalog, learn)
    scope = resolver.scope(str(event.name), event.from_refs)
    for conjunct in _conjuncts(event.where):
        if not resolver.join(conjunct, scope):
            raise UnsupportedGuardShape(
                "the event WHERE may only join rows on time", event=str(event.name)
            )
    lowering = _Lowering(resolver, catalog, learn)

    global_constraints: list[Constraint] = []
    monitoring: list[Constraint] = []
    series: list[str] = []
    for i, clause in enumerate(event.with_clauses, start=1):
        cid = f"C{i}"
        consequent = lowering.cond(resolver.condition(clause.constraint, scope))
        if not isinstance(consequent, Compare):
            raise UnsupportedConstraintShape("a WITH constraint must be one comparison", cid=cid)
        if clause.guard is None:
            variables, names = _quantify([consequent], learn)
            constraint: Constraint = AtomicConstraint(
                cid, variables, _rename(consequent, names), source=_source(clause.constraint)
            )
            global_constraints.append(constraint)
        else:
            guard = lowering.guard(resolver.column(clause.guard, scope))
            variables, names = _quantify([guard, consequent], learn)
            constraint = ImplicationConstraint(
                cid,
                variables,
                _rename(guard, names),
                _rename(consequent, names),
                source=str(clause.guard.qualifier or ""),
            )
            if _is_monitoring(guard, learn):
                monitoring.append(constraint)
            else:
                global_constraints.append(constraint)
        for term in _terms(constraint.guard if isinstance(constraint, ImplicationConstraint) else constraint.condition):
            if isinstance(term, SeriesTerm) and term.series not in series:
                series.append(term.series)
        if isinstance(constraint, ImplicationConstraint):
            for term in _terms(constraint.consequent):
                if isinstance(term, SeriesTerm) and term.series not in series:
                    series.append(term.series)

    objective = _objective(event, resolver, lowering, scope, learn)
    instance = PEInstance(
        str(event.name),
        tuple(series),
        tuple(learn.values()),
        tuple(global_constraints),
        tuple(monitoring),
        objective,
    )
    LOG.info(
        f"Compiled {event.name}: {len(global_constraints)} global, "
        f"{len(monitoring)} monitoring constraints"
    )
    return instance


def _source(comparison: Comparison) -> str:
    for side in (comparison.left, comparison.right):
        if isinstance(side, ColumnRef) and side.qualifier is not None:
            return str(side.qualifier)
    return ""


def _objective(
    event: CreateEvent,
    resolver: _Resolver,
    lowering: _Lowering,
    scope: _Scope,
    learn: Mapping[str, ParamSet],
) -> ObjectiveSpec:
    spec = event.objective
    if spec.aggregate != "SUM":
        raise NonLinearObjective(f"aggregate {spec.aggregate} is not supported")
    linear = lowering.linear(resolver.expr(spec.expr, scope), NonLinearObjective)
    params = [(t, c) for t, c in linear.terms if isinstance(t, ParamTerm)]
    if len(params) != 1 or len(linear.terms) != 1:
        raise NonLinearObjective(
            "the objective must be rate * parameter + constant", event=str(event.name)
        )
    term, rate = params[0]
    if learn[term.param.casefold()].keyed != "period":
        raise NonLinearObjective(
            "the objective must sum a per-period parameter", param=term.param
        )
    if rate <= 0:
        raise NonLinearObjective("the objective rate must be positive", rate=rate)
    return ObjectiveSpec(
        spec.direction,
        rate,
        term.param,
        linear.constant,
        str(spec.alias) if spec.alias is not None else None,
    )


# grounding


@dataclass(frozen=True, eq=False)
class SupplyGroup:
    """Rows ``param[period] >= coef * kw[t]`` for every calendar row in ``rows``."""

    cid: str
    period: int
    rows: np.ndarray
    coef: float


@dataclass(frozen=True)
class VariableLimit:
    cid: str
    param: str
    sense: str  # ">=" | "<="
    value: float


@dataclass(frozen=True)
class Roles:
    """Which parameter or series plays which part of the billing model."""

    bound: str
    supply: str
    kw: str
    demand: str
    exceed_cid: str
    within_cid: str
    link_cid: str | None


@dataclass(eq=False)
class GroundInstance:
    """A problem expanded against a calendar and the loaded demand.

    Decision variables are ``bound[p]`` and ``supply[p]`` for the future
    periods ``1..P`` and ``kw[t]`` for every calendar row; ``kw`` is fixed to
    the demand on ``t <= 0`` and equals ``min(demand, bound[period(t)])`` on
    ``t >= 1``.
    """

    instance: PEInstance
    calendar: CalendarTable
    demand: np.ndarray
    future_periods: np.ndarray
    supply: Tuple[SupplyGroup, ...]
    limits: Tuple[VariableLimit, ...]
    roles: Roles
    budget: float
    rate: float
    offset: float
    direction: str
    time_interval_size: float
    annual_bound: float
    horizon_years: float
    period_slot: np.ndarray = field(init=False)
    future_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        self.future_mask = self.calendar.time >= 1
        slot = np.full(len(self.calendar), -1, dtype=np.int64)
        periods = self.calendar.pay_period
        in_future = periods >= 1
        slot[in_future] = np.searchsorted(self.future_periods, periods[in_future])
        self.period_slot = slot

    @property
    def times(self) -> np.ndarray:
        return self.calendar.time

    @property
    def periods(self) -> np.ndarray:
        return self.calendar.pay_period

    @property
    def n_periods(self) -> int:
        return len(self.future_periods)

    @property
    def fixed_kw(self) -> np.ndarray:
        """Calendar rows whose kw is fixed to the historical demand."""
        return np.flatnonzero(~self.future_mask)

    @property
    def min_records(self) -> np.ndarray:
        """Calendar rows carrying the ``kw = min(demand, bound)`` structure."""
        return np.flatnonzero(self.future_mask)

    @property
    def max_demand(self) -> float:
        return float(self.demand.max()) if len(self.demand) else 0.0

    def future_demand(self, slot: int) -> np.ndarray:
        """Demand of the future intervals of the ``slot``-th future period."""
        return self.demand[self.future_mask & (self.period_slot == slot)]

    def lower_bound(self) -> float:
        values = [lim.value for lim in self.limits if lim.param == self.roles.bound and lim.sense == ">="]
        return max(values) if values else -np.inf

    def upper_bound(self) -> float:
        values = [lim.value for lim in self.limits if lim.param == self.roles.bound and lim.sense == "<="]
        return min(values) if values else np.inf

    def supply_floor(self) -> float:
        values = [lim.value for lim in self.limits if lim.param == self.roles.supply and lim.sense == ">="]
        return max(values) if values else 0.0


def _normalize(compare: Compare) -> tuple[Linear, str]:
    """Rewrite ``a op b`` as ``expr op' 0`` with ``op'`` one of ``>= > =``."""
    if compare.op in (">=", ">", "="):
        return compare.left - compare.right, compare.op
    return compare.right - compare.left, _FLIP[compare.op]


class _GuardContext:
    def __init__(self, calendar: CalendarTable, store: DataStore, params: Mapping[str, ParamSet]):
        self.calendar = calendar
        self.store = store
        self.params = params
        self._series: dict[str, np.ndarray] = {}

    def series(self, name: str) -> np.ndarray:
        key = name.casefold()
        if key not in self._series:
            self._series[key] = _aligned_series(self.store, name)
        return self._series[key]

    def value(self, term: Term, env: Mapping[str, object]) -> object:
        if isinstance(term, CalendarTerm):
            if env[term.var] == "rows":
                column = "time" if term.field == "time" else term.field
                return self.calendar.column(column)
            if term.field != "payPeriod":
                raise UnsupportedGuardShape(f"{term.field} of a period variable")
            return env[term.var]
        if isinstance(term, SeriesTerm):
            if env[term.var] != "rows":
                raise UnsupportedGuardShape(f"series {term.series} at a period variable")
            return self.series(term.series)
        raise UnsupportedGuardShape(f"learned parameter {term.param} in a data guard")

    def linear(self, linear: Linear, env: Mapping[str, object]) -> object:
        total: object = linear.constant
        for term, coef in linear.terms:
            total = total + coef * self.value(term, env)  # type: ignore[operator]
        return total

    def evaluate(self, cond: Cond, env: Mapping[str, object]) -> np.ndarray:
        n = len(self.calendar)
        if isinstance(cond, Compare):
            left = self.linear(cond.left, env)
            right = self.linear(cond.right, env)
            result = _OPS[cond.op](left, right)
        elif not cond.operands:
            result = cond.op == "AND"
        else:
            parts = [self.evaluate(op, env) for op in cond.operands]
            reduce = np.logical_and if cond.op == "AND" else np.logical_or
            result = reduce.reduce(parts)
        return np.broadcast_to(np.asarray(result, dtype=bool), (n,))


_OPS = {
    "<": np.less,
    "<=": np.less_equal,
    "=": np.equal,
    ">=": np.greater_equal,
    ">": np.greater,
}


def _aligned_series(store: DataStore, name: str) -> np.ndarray:
    series = store.get(name)
    if series is None:
        raise MissingSeries(f"series {name} is not loaded", series=name)
    values = series.aligned(store.calendar)
    missing = np.isnan(values)
    if missing.any():
        raise MissingSeries(
            f"series {name} does not cover the calendar",
            series=name,
            missing=int(missing.sum()),
            first_missing=int(store.calendar.time[missing][0]),
        )
    return values


def _min_structure(instance: PEInstance) -> tuple[str, str, str, str, str]:
    """Recognize ``kw = min(demand, bound)`` in the monitoring constraints.

    Returns:
        (demand series, bound param, kw param, exceed cid, within cid)
    """
    params = {p.name.casefold(): p for p in instance.params}
    exceed = within = None
    for constraint in instance.monitoring_constraints:
        if not isinstance(constraint, ImplicationConstraint):
            raise UnsupportedConstraintShape("monitoring constraints must be implications", cid=constraint.cid)
        found = None
        for compare in _compares(constraint.guard):
            left, right = compare.left.terms, compare.right.terms
            if len(left) == 1 and len(right) == 1:
                (lt, lc), (rt, rc) = left[0], right[0]
                if lc == rc == 1.0 and isinstance(lt, SeriesTerm) and isinstance(rt, ParamTerm):
                    found = (lt.series, rt.param, compare.op)
                elif lc == rc == 1.0 and isinstance(lt, ParamTerm) and isinstance(rt, SeriesTerm):
                    found = (rt.series, lt.param, _FLIP[compare.op])
        if found is None:
            raise UnsupportedConstraintShape(
                "a monitoring guard must compare demand with a bound", cid=constraint.cid
            )
        series, bound, op = found
        consequent = constraint.consequent
        sides = consequent.left.terms + consequent.right.terms
        if consequent.op != "=" or len(sides) != 2 or consequent.left.constant or consequent.right.constant:
            raise UnsupportedConstraintShape(
                "a monitoring consequent must equate two columns", cid=constraint.cid
            )
        kw_terms = [t for t, _ in sides if isinstance(t, ParamTerm) and params[t.param.casefold()].keyed == "interval"]
        if len(kw_terms) != 1:
            raise UnsupportedConstraintShape("a monitoring consequent must set a per-interval parameter", cid=constraint.cid)
        kw = kw_terms[0].param
        other = [t for t, _ in sides if t is not kw_terms[0]][0]
        if op in (">", ">=") and isinstance(other, ParamTerm) and other.param == bound:
            exceed = (series, bound, kw, constraint.cid, op)
        elif op in ("<", "<=") and isinstance(other, SeriesTerm) and other.series == series:
            within = (series, bound, kw, constraint.cid, op)
        else:
            raise UnsupportedConstraintShape(
                "monitoring constraints must cap kw at the bound above it and pass demand below it",
                cid=constraint.cid,
            )
    if exceed is None or within is None:
        raise UnsupportedConstraintShape(
            "the event needs a monitoring pair setting kw = min(demand, bound)",
            event=instance.event,
        )
    if exceed[:3] != within[:3] or {exceed[4], within[4]} not in ({">", "<="}, {">=", "<"}):
        raise UnsupportedConstraintShape(
            "the monitoring pair does not partition demand against one bound",
            cids=(exceed[3], within[3]),
        )
    return exceed[0], exceed[1], exceed[2], exceed[3], within[3]


def _check_calendar(calendar: CalendarTable) -> np.ndarray:
    report = validate_calendar(calendar)
    gaps = report.of_kind("contiguity") + report.of_kind("duplicate")
    if gaps:
        raise CalendarGap(gaps[0].message, t=gaps[0].t, violations=len(report))
    if not report.ok:
        first = report.violations[0]
        raise GroundingError(f"invalid calendar: {first.message}", t=first.t)
    periods = calendar.future_periods()
    if not len(periods):
        raise CalendarGap("the calendar has no future pay periods; the objective range is empty")
    if not np.array_equal(periods, np.arange(1, len(periods) + 1)):
        raise CalendarGap("future pay periods must run 1..P without gaps", periods=periods.tolist())
    late = (calendar.time >= 1) & (calendar.pay_period < 1)
    if late.any():
        raise CalendarGap(
            "a future interval falls in a past pay period", t=int(calendar.time[late][0])
        )
    return periods


def ground(instance: PEInstance, store: DataStore, config: SolverConfig) -> GroundInstance:
    """Expand an estimation problem against the calendar and loaded data.

    Args:
        instance (PEInstance): Output of :py:func:`compile_event`.
        store (DataStore): Calendar and input series.
        config (SolverConfig): Supplies ``annual_bound``, ``horizon_years`` and
            ``time_interval_size``.

    Returns:
        GroundInstance

    Raises:
        MissingSeries: when an input series is not loaded or has holes.
        CalendarGap: when the calendar is not contiguous or has no future periods.
        UnsupportedConstraintShape: when a constraint is not part of the
            billing model the solvers understand.
    """
    calendar = store.calendar
    future_periods = _check_calendar(calendar)
    params = {p.name.casefold(): p for p in instance.params}
    demand_name, bound, kw, exceed_cid, within_cid = _min_structure(instance)
    supply_param = instance.objective.param
    if params[bound.casefold()].keyed != "period":
        raise UnsupportedConstraintShape(f"bound {bound} must be per period")
    context = _GuardContext(calendar, store, params)
    demand = context.series(demand_name)

    groups: list[SupplyGroup] = []
    limits: list[VariableLimit] = []
    link_cid = None
    for constraint in instance.global_constraints:
        if isinstance(constraint, ImplicationConstraint):
            groups.extend(
                _supply_rows(constraint, context, calendar, future_periods, supply_param, kw, params)
            )
            continue
        expr, op = _normalize(constraint.condition)  # type: ignore[arg-type]
        if op == "=":
            raise UnsupportedConstraintShape("equality between parameters", cid=constraint.cid)
        names = {t.param for t, _ in expr.terms if isinstance(t, ParamTerm)}
        if len(expr.terms) != len(names) or len({t.var for t, _ in expr.terms}) > 1:
            raise UnsupportedConstraintShape("global constraint shape", cid=constraint.cid)
        if len(expr.terms) == 1:
            (term, coef), = expr.terms
            value = -expr.constant / coef
            sense = ">=" if coef > 0 else "<="
            limits.append(VariableLimit(constraint.cid, term.param, sense, value))
        elif (
            len(expr.terms) == 2
            and expr.constant == 0
            and expr.coef(ParamTerm(supply_param, expr.terms[0][0].var)) > 0
            and expr.coef(ParamTerm(bound, expr.terms[0][0].var))
            == -expr.coef(ParamTerm(supply_param, expr.terms[0][0].var))
        ):
            link_cid = constraint.cid
        else:
            raise UnsupportedConstraintShape(
                f"only {bound} <= {supply_param} and variable limits are global constraints",
                cid=constraint.cid,
            )

    g = GroundInstance(
        instance=instance,
        calendar=calendar,
        demand=demand,
        future_periods=future_periods,
        supply=tuple(groups),
        limits=tuple(limits),
        roles=Roles(bound, supply_param, kw, demand_name, exceed_cid, within_cid, link_cid),
        budget=config.annual_bound * config.horizon_years,
        rate=instance.objective.rate,
        offset=instance.objective.offset,
        direction=instance.objective.direction,
        time_interval_size=config.time_interval_size,
        annual_bound=config.annual_bound,
        horizon_years=config.horizon_years,
    )
    LOG.info(
        f"Grounded {instance.event}: {g.n_periods} periods, {len(calendar)} intervals, "
        f"{sum(len(grp.rows) for grp in groups)} supply rows"
    )
    return g


def _supply_rows(
    constraint: ImplicationConstraint,
    context: _GuardContext,
    calendar: CalendarTable,
    future_periods: np.ndarray,
    supply_param: str,
    kw: str,
    params: Mapping[str, ParamSet],
) -> list[SupplyGroup]:
    expr, op = _normalize(constraint.consequent)
    if op == "=" or expr.constant != 0 or len(expr.terms) != 2:
        raise UnsupportedConstraintShape(
            f"an implication must read {supply_param} >= coef * {kw}", cid=constraint.cid
        )
    supply_terms = [(t, c) for t, c in expr.terms if isinstance(t, ParamTerm) and t.param == supply_param]
    kw_terms = [(t, c) for t, c in expr.terms if isinstance(t, ParamTerm) and t.param == kw]
    if len(supply_terms) != 1 or len(kw_terms) != 1:
        raise UnsupportedConstraintShape(
            f"an implication must read {supply_param} >= coef * {kw}", cid=constraint.cid
        )
    (supply_term, a), (kw_term, b) = supply_terms[0], kw_terms[0]
    coef = -b / a
    if a <= 0 or coef < 0:
        raise UnsupportedConstraintShape("supply must bound a nonnegative multiple of kw", cid=constraint.cid)
    levels = {v.name: v.level for v in constraint.variables}
    interval_vars = [v for v, level in levels.items() if level == "interval"]
    period_vars = [v for v, level in levels.items() if level == "period"]
    if len(interval_vars) != 1 or len(period_vars) > 1 or kw_term.var != interval_vars[0]:
        raise UnsupportedConstraintShape(
            "an implication quantifies one interval and at most one period", cid=constraint.cid
        )
    t_var = interval_vars[0]
    periods = calendar.pay_period
    groups = []
    if supply_term.var == t_var:
        # supply indexed by the period of the same row
        mask = context.evaluate(constraint.guard, {t_var: "rows"})
        for p in future_periods:
            rows = np.flatnonzero(mask & (periods == p))
            if len(rows):
                groups.append(SupplyGroup(constraint.cid, int(p), rows, coef))
    else:
        p_var = supply_term.var
        for p in future_periods:
            mask = context.evaluate(constraint.guard, {t_var: "rows", p_var: int(p)})
            rows = np.flatnonzero(mask)
            if len(rows):
                groups.append(SupplyGroup(constraint.cid, int(p), rows, coef))
    return groups


def interpret(
    instance: PEInstance,
    constraint: Constraint,
    binding: Mapping[str, int],
    store: DataStore,
    assignment: Mapping[str, Mapping[int, float]],
) -> bool:
    """Truth value of a symbolic constraint at one binding of its variables.

    Args:
        instance (PEInstance): The problem the constraint belongs to.
        constraint (Constraint): The constraint.
        binding (Mapping[str, int]): Value of every variable (``t`` or ``p``).
        store (DataStore): Calendar and series.
        assignment (Mapping[str, Mapping[int, float]]): Parameter values keyed
            by period or interval.

    Returns:
        bool: For implications, ``not guard or consequent``.

    Raises:
        KeyError: when a referenced parameter value is not assigned.
    """
    calendar = store.calendar
    keyed = {p.name.casefold(): p.keyed for p in instance.params}
    levels = {v.name: v.level for v in constraint.variables}

    def value(term: Term) -> float:
        x = binding[term.var]
        interval = levels[term.var] == "interval"
        if isinstance(term, CalendarTerm):
            if term.field == "time":
                return x
            if interval:
                return int(calendar.column(term.field)[calendar.index_of(x)])
            return x
        if isinstance(term, SeriesTerm):
            return store.get(term.series).as_dict()[x]
        key = x
        if keyed[term.param.casefold()] == "period" and interval:
            key = calendar.period_of(x)
        return assignment[term.param][key]

    def linear(lin: Linear) -> float:
        return lin.constant + sum(c * value(t) for t, c in lin.terms)

    def truth(cond: Cond) -> bool:
        if isinstance(cond, Compare):
            return bool(_OPS[cond.op](linear(cond.left), linear(cond.right)))
        results = [truth(op) for op in cond.operands]
        return all(results) if cond.op == "AND" else any(results)

    if isinstance(constraint, ImplicationConstraint):
        return (not truth(constraint.guard)) or truth(constraint.consequent)
    return truth(constraint.condition)
