"""Monitoring and recommendation over streamed demand records.

A ``MONITOR`` statement names a view whose ``CASE`` column fires when an
input series crosses a learned parameter, either directly (an indicator view
such as ``ElectricLoadShedding``) or through one recommendation view that maps
the indicator to an action text. :py:func:`compile_monitor` resolves that
chain into a :py:class:`MonitoringRule`; :py:func:`step`, :py:func:`replay`
and :py:func:`follow` evaluate it record by record.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, List, Mapping, NamedTuple

import numpy as np

from mtsa.compiler import (
    Catalog,
    Compare,
    ParamSet,
    ParamTerm,
    SeriesTerm,
    _Lowering,
    _RCase,
    _Resolver,
)
from mtsa.exceptions import (
    CompileError,
    MissingParameter,
    ParseError,
    UnorderedStream,
    UnsupportedViewShape,
)
from mtsa.statements import CaseExpr, ColumnRef, Ident, StringLit, TableRef
from mtsa.timeseries import CalendarTable, DecisionParameterTable, TimeEventSeries

LOG = logging.getLogger(__name__)

__all__ = (
    "DEFAULT_ACTION",
    "MonitoringRule",
    "Recommendation",
    "StreamRecord",
    "compile_monitor",
    "follow",
    "indicator_series",
    "parse_stream",
    "replay",
    "step",
)

DEFAULT_ACTION = (
    "The Electric Power Demand Greater Than The Peak Demand Bound. "
    "The Electric Load Shedding Is Recommended."
)

_COMPARE = {
    "<": np.less,
    "<=": np.less_equal,
    "=": np.equal,
    ">=": np.greater_equal,
    ">": np.greater,
}
_FLIP = {"<": ">", "<=": ">=", "=": "=", ">=": "<=", ">": "<"}


class StreamRecord(NamedTuple):
    time: int
    value: float


@dataclass(frozen=True)
class Recommendation:
    time: int
    indicator: int
    value: float
    threshold: float
    action: str | None = None

    def to_dict(self) -> dict:
        fields = {
            "time": self.time,
            "indicator": self.indicator,
            "action": self.action,
            "value": self.value,
            "threshold": self.threshold,
        }
        return {key: val for key, val in fields.items() if val is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class MonitoringRule:
    """``value op threshold(t)`` with the action emitted when it holds.

    Attributes:
        view (str): The monitored view.
        series (str): Input series the stream carries.
        parameter (str): Parameter table supplying the thresholds.
        op (str): Comparison with the series value on the left.
        action (str): Recommendation text.
        keyed (str): ``period`` or ``interval``.
        thresholds (Mapping[int, float]): Threshold per period or interval.
        calendar (CalendarTable): Maps stream times to pay periods.
    """

    view: str
    series: str
    parameter: str
    op: str
    action: str
    keyed: str
    thresholds: Mapping[int, float]
    calendar: CalendarTable

    def threshold_of(self, t: int) -> float:
        key = self.calendar.period_of(t) if self.keyed == "period" else int(t)
        try:
            return self.thresholds[key]
        except KeyError:
            raise MissingParameter(
                f"{self.parameter} has no value for {self.keyed} {key}", t=int(t)
            ) from None


def _collapse(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def _parameter_tables(catalog: Catalog) -> dict[str, ParamSet]:
    """Catalog tables keyed by a period column besides ``time``."""
    found = {}
    for key, table in catalog.tables.items():
        if any(c.type.is_interval and c.name != "time" for c in table.columns) and any(
            not c.type.is_interval for c in table.columns
        ):
            found[key] = ParamSet(str(table.name), "period")
    return found


def compile_monitor(
    view_name: str,
    catalog: Catalog,
    params: Mapping[str, DecisionParameterTable],
    calendar: CalendarTable,
) -> MonitoringRule:
    """Resolve a monitored view into a rule.

    Args:
        view_name (str): The view ``MONITOR`` names.
        catalog (Catalog): Table and view definitions.
        params (Mapping[str, DecisionParameterTable]): Learned or supplied
            parameter tables by name.
        calendar (CalendarTable): Calendar the stream times refer to.

    Returns:
        MonitoringRule: The action is the view's ``THEN`` text with whitespace
        runs collapsed, or the default recommendation for a bare indicator view.

    Raises:
        UnsupportedViewShape: when the view has no ``CASE`` column or its
            condition is not one comparison of a series with a parameter.
        MissingParameter: when the parameter table lacks a future period.
    """
    view = catalog.view(view_name)
    if view is None:
        raise UnsupportedViewShape(f"{view_name} is not a view", view=view_name)
    cases = [item for item in view.select.items if isinstance(item.expr, CaseExpr)]
    if not cases:
        raise UnsupportedViewShape("the view has no CASE WHEN column", view=str(view.name))
    item = cases[0]
    then = item.expr.then
    action = DEFAULT_ACTION
    if isinstance(then, StringLit) and then.value != "1":
        action = _collapse(then.value)

    learn = _parameter_tables(catalog)
    resolver = _Resolver(catalog, learn)
    alias = Ident("__monitored")
    try:
        scope = resolver.scope(str(view.name), (TableRef(view.name, alias),))
        case = resolver.column(ColumnRef(alias, item.output_name or Ident("Indicator")), scope)
        assert isinstance(case, _RCase)
        guard = _Lowering(resolver, catalog, learn).cond(case.condition)
    except CompileError as err:
        raise UnsupportedViewShape(f"cannot resolve the view: {err.text}", view=str(view.name)) from None
    if not isinstance(guard, Compare):
        raise UnsupportedViewShape("the guard must be a single comparison", view=str(view.name))

    sides = []
    for side in (guard.left, guard.right):
        if len(side.terms) != 1 or side.constant or side.terms[0][1] != 1.0:
            raise UnsupportedViewShape("the guard must compare two columns", view=str(view.name))
        sides.append(side.terms[0][0])
    left, right = sides
    if isinstance(left, SeriesTerm) and isinstance(right, ParamTerm):
        series, parameter, op = left.series, right.param, guard.op
    elif isinstance(left, ParamTerm) and isinstance(right, SeriesTerm):
        series, parameter, op = right.series, left.param, _FLIP[guard.op]
    else:
        raise UnsupportedViewShape(
            "the guard must compare an input series with a parameter", view=str(view.name)
        )

    table = next((t for name, t in params.items() if name.casefold() == parameter.casefold()), None)
    if table is None:
        raise MissingParameter(f"no values for {parameter}; execute its learning event first", parameter=parameter)
    thresholds = table.as_dict()
    if table.keyed == "period":
        missing = [int(p) for p in calendar.future_periods() if int(p) not in thresholds]
        if missing:
            raise MissingParameter(
                f"{parameter} does not cover every future pay period",
                parameter=parameter,
                missing=missing[:5],
            )
    LOG.info(f"Monitoring {view.name}: {series} {op} {parameter}")
    return MonitoringRule(
        str(view.name), series, parameter, op, action, table.keyed, thresholds, calendar
    )


def step(rule: MonitoringRule, rec: StreamRecord) -> Recommendation:
    """Evaluate one record.

    Raises:
        OutOfRange: when the record time is not in the calendar.
    """
    threshold = rule.threshold_of(rec.time)
    fired = bool(_COMPARE[rule.op](rec.value, threshold))
    return Recommendation(
        int(rec.time),
        int(fired),
        float(rec.value),
        float(threshold),
        rule.action if fired else None,
    )


def _check_order(previous: int | None, t: int) -> None:
    if previous is not None and t < previous:
        raise UnorderedStream("stream records must be time ordered", t=t, previous=previous)


def replay(
    rule: MonitoringRule, stream: Iterable[StreamRecord], log: IO[str] | None = None
) -> List[Recommendation]:
    """Evaluate a finite stream; one recommendation per record.

    Args:
        rule (MonitoringRule): The compiled rule.
        stream (Iterable[StreamRecord]): Time-ordered records.
        log (Optional[IO[str]]): JSON-lines sink, one line per record.

    Raises:
        UnorderedStream: when a record precedes the one before it.
        OutOfRange: when a record is outside the calendar.
    """
    records = list(stream)
    if not records:
        return []
    times = np.fromiter((r.time for r in records), dtype=np.int64, count=len(records))
    values = np.fromiter((r.value for r in records), dtype=np.float64, count=len(records))
    back = np.flatnonzero(np.diff(times) < 0)
    if len(back):
        i = int(back[0]) + 1
        raise UnorderedStream(
            "stream records must be time ordered", t=int(times[i]), previous=int(times[i - 1])
        )
    rows = rule.calendar.index_of(times)
    keys = rule.calendar.pay_period[rows] if rule.keyed == "period" else times
    unique = np.unique(keys)
    lookup = {}
    for key in unique.tolist():
        if key not in rule.thresholds:
            raise MissingParameter(f"{rule.parameter} has no value for {rule.keyed} {key}")
        lookup[key] = rule.thresholds[key]
    thresholds = np.array([lookup[k] for k in keys.tolist()], dtype=np.float64)
    fired = _COMPARE[rule.op](values, thresholds)
    out = [
        Recommendation(t, int(f), v, th, rule.action if f else None)
        for t, f, v, th in zip(times.tolist(), fired.tolist(), values.tolist(), thresholds.tolist())
    ]
    if log is not None:
        log.writelines(rec.to_json() + "\n" for rec in out)
    LOG.info(f"Replayed {len(out)} records on {rule.view}: {int(fired.sum())} recommendations")
    return out


def parse_stream(lines: Iterable[str]) -> Iterator[StreamRecord]:
    """Read ``time,value`` lines, skipping blanks, ``#`` comments and a header.

    Raises:
        ParseError: on a malformed line.
    """
    for number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        fields = [f.strip() for f in text.split(",")]
        if number == 1 and fields[0].casefold() == "time":
            continue
        try:
            if len(fields) != 2:
                raise ValueError
            t = float(fields[0])
            if t != int(t):
                raise ValueError
            value = float(fields[1])
            if not np.isfinite(value):
                raise ValueError
        except ValueError:
            raise ParseError("expected a time,value record", line=number, value=text) from None
        yield StreamRecord(int(t), value)


def follow(rule: MonitoringRule, lines: Iterable[str], log: IO[str] | None = None) -> Iterator[Recommendation]:
    """Evaluate records as they arrive, writing and flushing each log line."""
    previous = None
    for rec in parse_stream(lines):
        _check_order(previous, rec.time)
        previous = rec.time
        recommendation = step(rule, rec)
        if recommendation.indicator:
            LOG.info(f"t={rec.time}: {rec.value} {rule.op} {recommendation.threshold}")
        if log is not None:
            log.write(recommendation.to_json() + "\n")
            log.flush()
        yield recommendation


def indicator_series(rule: MonitoringRule, recommendations: Iterable[Recommendation]) -> TimeEventSeries:
    """The ``Indicator`` column of the monitored view over the replayed times."""
    recs = list(recommendations)
    return TimeEventSeries(rule.view, [r.time for r in recs], [r.indicator for r in recs])

