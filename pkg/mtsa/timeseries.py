"""Time horizons, the calendar mapping and time series storage.

Every series is keyed by an integer base-interval index ``t``: ``t <= 0`` is
history, ``t >= 1`` is the projected future. The calendar maps each ``t`` to
its pay period and to the date attributes the contract terms test
(``year``, ``month``, ``day``, ``hour``, ``weekDay`` with 0 = Sunday).
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np
import pandas as pd

from mtsa.exceptions import DuplicateKey, MTSAError, OutOfRange, ParseError

LOG = logging.getLogger(__name__)

__all__ = (
    "CALENDAR_COLUMNS",
    "CalendarTable",
    "DataStore",
    "DecisionParameterTable",
    "Horizon",
    "TimeEventSeries",
    "TimeSeries",
    "ValidationReport",
    "horizon_of",
    "load_calendar",
    "load_parameters",
    "load_series",
    "period_of",
    "validate_calendar",
)

CALENDAR_COLUMNS = ("time", "payPeriod", "year", "month", "day", "hour", "weekDay")
SERIES_COLUMNS = ("time", "value")
PERIOD_PARAMETER_COLUMNS = ("time", "period", "value")

# inclusive ranges checked by validate_calendar
FIELD_RANGES = {
    "month": (1, 12),
    "day": (1, 31),
    "hour": (0, 23),
    "weekDay": (0, 6),
}


def _int_array(values: Iterable[int] | np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.int64).reshape(-1)


class CalendarTable:
    """Per-interval calendar attributes.

    The seven auxiliary tables of the dialect (``PayPeriod``, ``Year``,
    ``Month``, ``Day``, ``Hour``, ``WeekDay``) are views over the columns of
    this single table.

    Args:
        time: Interval indexes.
        payPeriod, year, month, day, hour, weekDay: Attribute per interval,
            aligned with ``time``.
    """

    def __init__(
        self,
        time: Iterable[int],
        payPeriod: Iterable[int],
        year: Iterable[int],
        month: Iterable[int],
        day: Iterable[int],
        hour: Iterable[int],
        weekDay: Iterable[int],
    ):
        self._columns = {
            "time": _int_array(time),
            "payPeriod": _int_array(payPeriod),
            "year": _int_array(year),
            "month": _int_array(month),
            "day": _int_array(day),
            "hour": _int_array(hour),
            "weekDay": _int_array(weekDay),
        }
        n = len(self._columns["time"])
        for name, column in self._columns.items():
            if len(column) != n:
                raise MTSAError(
                    "calendar columns differ in length", column=name, length=len(column)
                )
            column.setflags(write=False)
        times = self._columns["time"]
        self._contiguous = bool(n == 0 or np.array_equal(times, np.arange(times[0], times[0] + n)))
        self._order = None if self._contiguous else np.argsort(times, kind="stable")

    def __len__(self) -> int:
        return len(self._columns["time"])

    def __repr__(self) -> str:
        if not len(self):
            return "<CalendarTable empty>"
        return f"<CalendarTable t={self.t_min}..{self.t_max} rows={len(self)}>"

    def column(self, name: str) -> np.ndarray:
        """Return the read-only column named as in the calendar CSV header."""
        try:
            return self._columns[name]
        except KeyError:
            raise MTSAError(f"calendar has no column {name!r}") from None

    @property
    def time(self) -> np.ndarray:
        return self._columns["time"]

    @property
    def pay_period(self) -> np.ndarray:
        return self._columns["payPeriod"]

    @property
    def t_min(self) -> int:
        return int(self.time.min())

    @property
    def t_max(self) -> int:
        return int(self.time.max())

    @property
    def is_contiguous(self) -> bool:
        """bool: True if the keys form the range ``[t_min, t_max]`` in order."""
        return self._contiguous

    def index_of(self, t: int | np.ndarray) -> int | np.ndarray:
        """Row index of one or many interval indexes.

        Raises:
            OutOfRange: when any ``t`` is not a calendar key.
        """
        ts = np.asarray(t, dtype=np.int64)
        if not len(self):
            raise OutOfRange("calendar is empty", t=int(ts.flat[0]) if ts.size else None)
        if self._contiguous:
            idx = ts - self.time[0]
            bad = (idx < 0) | (idx >= len(self))
        else:
            pos = np.searchsorted(self.time[self._order], ts)
            pos = np.clip(pos, 0, len(self) - 1)
            idx = self._order[pos]
            bad = self.time[idx] != ts
        if np.any(bad):
            first = int(np.asarray(ts)[bad].flat[0]) if ts.ndim else int(ts)
            raise OutOfRange(
                "time outside the calendar", t=first, t_min=self.t_min, t_max=self.t_max
            )
        return int(idx) if ts.ndim == 0 else idx

    def period_of(self, t: int) -> int:
        return int(self.pay_period[self.index_of(t)])

    def periods(self) -> np.ndarray:
        """Distinct pay periods in ascending order."""
        return np.unique(self.pay_period)

    def future_periods(self) -> np.ndarray:
        """Distinct pay periods ``p >= 1`` in ascending order."""
        periods = self.periods()
        return periods[periods >= 1]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({name: self._columns[name] for name in CALENDAR_COLUMNS})

    def to_csv(self) -> str:
        return self.frame().to_csv(index=False, lineterminator="\n")

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> CalendarTable:
        return cls(**{name: df[name].to_numpy() for name in CALENDAR_COLUMNS})


def period_of(cal: CalendarTable, t: int) -> int:
    """Pay period of the interval ``t``.

    Args:
        cal (CalendarTable): The calendar.
        t (int): Interval index.

    Returns:
        int: ``cal.payPeriod(t)``.

    Raises:
        OutOfRange: when ``t`` is outside ``[tMin, tMax]``.
    """
    return cal.period_of(t)


class CalendarViolation(NamedTuple):
    kind: str  # "contiguity" | "monotonicity" | "range" | "duplicate"
    t: int | None
    message: str


@dataclass
class ValidationReport:
    """Calendar invariant violations; empty iff the calendar is valid."""

    violations: list[CalendarViolation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self) -> Iterator[CalendarViolation]:
        return iter(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str) -> list[CalendarViolation]:
        return [v for v in self.violations if v.kind == kind]


def validate_calendar(cal: CalendarTable) -> ValidationReport:
    """Check contiguity, the Period law and the attribute ranges of a calendar.

    Never raises: every failure is a row of the returned report.
    """
    report = ValidationReport()
    if not len(cal):
        return report
    times = cal.time
    order = np.argsort(times, kind="stable")
    sorted_times = times[order]
    periods = cal.pay_period[order]

    for t in sorted_times[1:][np.diff(sorted_times) == 0]:
        report.violations.append(
            CalendarViolation("duplicate", int(t), f"time {t} appears more than once")
        )
    gaps = np.flatnonzero(np.diff(sorted_times) > 1)
    for i in gaps:
        report.violations.append(
            CalendarViolation(
                "contiguity",
                int(sorted_times[i + 1]),
                f"missing times {sorted_times[i] + 1}..{sorted_times[i + 1] - 1}",
            )
        )
    if not np.array_equal(order, np.arange(len(times))):
        report.violations.append(
            CalendarViolation("contiguity", None, "rows are not in time order")
        )
    for i in np.flatnonzero(np.diff(periods) < 0):
        report.violations.append(
            CalendarViolation(
                "monotonicity",
                int(sorted_times[i + 1]),
                f"payPeriod drops from {periods[i]} to {periods[i + 1]}",
            )
        )
    for name, (lo, hi) in FIELD_RANGES.items():
        column = cal.column(name)
        for i in np.flatnonzero((column < lo) | (column > hi)):
            report.violations.append(
                CalendarViolation(
                    "range",
                    int(times[i]),
                    f"{name}={column[i]} outside {lo}..{hi}",
                )
            )
    return report


class TimeSeries:
    """A named map from interval index to a finite real value."""

    def __init__(self, name: str, times: Iterable[int], values: Iterable[float]):
        self.name = name
        times = _int_array(times)
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(times) != len(values):
            raise MTSAError("times and values differ in length", series=name)
        if not np.all(np.isfinite(values)):
            raise MTSAError("series values must be finite", series=name)
        order = np.argsort(times, kind="stable")
        self.times = times[order]
        self.values = values[order]
        if len(self.times) > 1 and np.any(np.diff(self.times) == 0):
            raise DuplicateKey("duplicate time key", series=name)
        self.times.setflags(write=False)
        self.values.setflags(write=False)

    @classmethod
    def from_mapping(cls, name: str, data: Mapping[int, float]) -> TimeSeries:
        return cls(name, list(data.keys()), list(data.values()))

    def __len__(self) -> int:
        return len(self.times)

    def __repr__(self) -> str:
        return f"<TimeSeries {self.name} n={len(self)}>"

    def as_dict(self) -> dict[int, float]:
        return {int(t): float(v) for t, v in zip(self.times, self.values)}

    def aligned(self, cal: CalendarTable) -> np.ndarray:
        """Values at every calendar row, NaN where the series has no key."""
        out = np.full(len(cal), np.nan)
        if len(self):
            pos = np.searchsorted(self.times, cal.time)
            pos = np.clip(pos, 0, len(self.times) - 1)
            hit = self.times[pos] == cal.time
            out[hit] = self.values[pos[hit]]
        return out

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.times, "value": self.values})

    def to_csv(self) -> str:
        return self.frame().to_csv(index=False, lineterminator="\n")


class TimeEventSeries:
    """A named map from interval index to a binary event indicator."""

    def __init__(self, name: str, times: Iterable[int], indicator: Iterable[int]):
        self.name = name
        self.times = _int_array(times)
        self.indicator = _int_array(indicator)
        if len(self.times) != len(self.indicator):
            raise MTSAError("times and indicator differ in length", series=name)
        if not np.all(np.isin(self.indicator, (0, 1))):
            raise MTSAError("indicator must be 0 or 1", series=name)

    def __len__(self) -> int:
        return len(self.times)

    def occurrences(self) -> np.ndarray:
        """Times at which the event fired."""
        return self.times[self.indicator == 1]

    def to_csv(self) -> str:
        return pd.DataFrame({"time": self.times, "Indicator": self.indicator}).to_csv(
            index=False, lineterminator="\n"
        )


class DecisionParameterTable:
    """Learned decision parameters keyed by pay period or by interval.

    Args:
        name (str): Table name, e.g. ``PeakDemandBound``.
        keyed (str): ``"period"`` or ``"interval"``.
        keys: Period or interval indexes.
        values: Parameter value per key.
        nonnegative (bool): Reject negative values.
    """

    def __init__(
        self,
        name: str,
        keyed: str,
        keys: Iterable[int],
        values: Iterable[float],
        nonnegative: bool = False,
    ):
        if keyed not in ("period", "interval"):
            raise MTSAError(f"unknown key kind {keyed!r}", table=name)
        self.name = name
        self.keyed = keyed
        self.keys = _int_array(keys)
        self.values = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(self.keys) != len(self.values):
            raise MTSAError("keys and values differ in length", table=name)
        if not np.all(np.isfinite(self.values)):
            raise MTSAError("parameter values must be finite", table=name)
        if nonnegative and np.any(self.values < 0):
            raise MTSAError("parameter values must not be negative", table=name)
        if len(np.unique(self.keys)) != len(self.keys):
            raise DuplicateKey("duplicate parameter key", table=name)

    def __len__(self) -> int:
        return len(self.keys)

    def as_dict(self) -> dict[int, float]:
        return {int(k): float(v) for k, v in zip(self.keys, self.values)}

    def to_csv(self, cal: CalendarTable | None = None) -> str:
        """Serialize the table.

        Per-period tables are broadcast over the calendar intervals of each
        period as ``time,period,value`` rows; per-interval tables are written
        as ``time,value``.
        """
        if self.keyed == "interval":
            df = pd.DataFrame({"time": self.keys, "value": self.values})
            return df.to_csv(index=False, lineterminator="\n")
        if cal is None:
            raise MTSAError("a calendar is needed to broadcast periods", table=self.name)
        lookup = dict(zip(self.keys.tolist(), self.values.tolist()))
        mask = np.isin(cal.pay_period, self.keys)
        periods = cal.pay_period[mask]
        df = pd.DataFrame(
            {
                "time": cal.time[mask],
                "period": periods,
                "value": [lookup[int(p)] for p in periods],
            }
        )
        return df.to_csv(index=False, lineterminator="\n")


@dataclass
class DataStore:
    """A calendar plus the input series loaded against it."""

    calendar: CalendarTable
    series: dict[str, TimeSeries] = field(default_factory=dict)

    def add(self, series: TimeSeries) -> None:
        self.series[series.name.casefold()] = series

    def get(self, name: str) -> TimeSeries | None:
        return self.series.get(name.casefold())


class Horizon(NamedTuple):
    past: tuple[int, ...]
    future: tuple[int, ...]


def horizon_of(series: TimeSeries) -> Horizon:
    """Split the domain of a series into past (``t <= 0``) and future (``t >= 1``)."""
    times = series.times
    return Horizon(
        tuple(int(t) for t in times[times <= 0]),
        tuple(int(t) for t in times[times >= 1]),
    )


def _read_rows(csv_text: str, columns: tuple[str, ...], what: str) -> tuple[pd.DataFrame, int]:
    """Read CSV text as strings, returning the frame and the line number of its first row."""
    lines = csv_text.splitlines()
    start = next((i for i, line in enumerate(lines) if line.strip()), None)
    if start is None:
        return pd.DataFrame({c: pd.Series(dtype=str) for c in columns}), 1
    first = lines[start]
    fields = [f.strip() for f in first.split(",")]
    try:
        int(float(fields[0]))
        has_header = False
    except ValueError:
        has_header = True
        if [f.casefold() for f in fields] != [c.casefold() for c in columns]:
            raise ParseError(
                f"{what} CSV must have the header {','.join(columns)}", header=first
            )
    # pandas would shift a row with extra fields into the index
    body = start + 1 if has_header else start
    for number, line in enumerate(lines[body:], start=body + 1):
        count = len(line.split(","))
        if line.strip() and count != len(columns):
            raise ParseError(
                f"{what} CSV rows must have {len(columns)} fields", line=number, fields=count
            )
    try:
        df = pd.read_csv(
            io.StringIO(csv_text),
            header=0 if has_header else None,
            names=list(columns),
            dtype=str,
            skip_blank_lines=True,
            skipinitialspace=True,
        )
    except pd.errors.ParserError as err:
        raise ParseError(f"malformed {what} CSV: {err}") from None
    return df, 2 if has_header else 1


def _integers(df: pd.DataFrame, column: str, first_line: int) -> np.ndarray:
    raw = df[column]
    numbers = pd.to_numeric(raw, errors="coerce")
    bad = numbers.isna() | (numbers != numbers.round())
    if bad.any():
        i = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(
            f"{column} must be an integer", line=first_line + i, value=raw.iloc[i]
        )
    return numbers.to_numpy(dtype=np.int64)


def _reals(df: pd.DataFrame, column: str, first_line: int) -> np.ndarray:
    raw = df[column]
    numbers = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(numbers)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ParseError(
            f"{column} must be a finite real", line=first_line + i, value=raw.iloc[i]
        )
    return numbers


def _check_duplicates(times: np.ndarray, first_line: int, name: str) -> None:
    seen = pd.Series(times).duplicated()
    if seen.any():
        i = int(np.flatnonzero(seen.to_numpy())[0])
        raise DuplicateKey(
            "duplicate time key", series=name, time=int(times[i]), line=first_line + i
        )


def load_series(csv_text: str, name: str) -> TimeSeries:
    """Parse a ``time,value`` CSV into a TimeSeries.

    Args:
        csv_text (str): CSV text; the header line may be omitted.
        name (str): Series name.

    Returns:
        TimeSeries

    Raises:
        ParseError: on a malformed row.
        DuplicateKey: when a time appears twice.
    """
    df, first_line = _read_rows(csv_text, SERIES_COLUMNS, "series")
    times = _integers(df, "time", first_line)
    values = _reals(df, "value", first_line)
    _check_duplicates(times, first_line, name)
    LOG.debug(f"Loaded series {name} with {len(times)} rows")
    return TimeSeries(name, times, values)


def load_calendar(csv_text: str) -> CalendarTable:
    """Parse a ``time,payPeriod,year,month,day,hour,weekDay`` CSV.

    Raises:
        ParseError: on a malformed row.
        DuplicateKey: when a time appears twice.
    """
    df, first_line = _read_rows(csv_text, CALENDAR_COLUMNS, "calendar")
    columns = {name: _integers(df, name, first_line) for name in CALENDAR_COLUMNS}
    _check_duplicates(columns["time"], first_line, "calendar")
    return CalendarTable(**columns)


def load_parameters(csv_text: str, name: str) -> DecisionParameterTable:
    """Parse a learned parameter CSV written by :meth:`DecisionParameterTable.to_csv`.

    ``time,period,value`` files give a per-period table (one value per period
    is kept, all rows of a period must agree); ``time,value`` files give a
    per-interval table.
    """
    first = next((line for line in csv_text.splitlines() if line.strip()), "")
    if [f.strip().casefold() for f in first.split(",")] == list(PERIOD_PARAMETER_COLUMNS):
        df, first_line = _read_rows(csv_text, PERIOD_PARAMETER_COLUMNS, "parameter")
        periods = _integers(df, "period", first_line)
        values = _reals(df, "value", first_line)
        frame = pd.DataFrame({"period": periods, "value": values})
        grouped = frame.groupby("period", sort=True)["value"]
        if (grouped.nunique() > 1).any():
            raise ParseError("rows of one period disagree", table=name)
        first_values = grouped.first()
        return DecisionParameterTable(
            name, "period", first_values.index.to_numpy(), first_values.to_numpy()
        )
    df, first_line = _read_rows(csv_text, SERIES_COLUMNS, "parameter")
    times = _integers(df, "time", first_line)
    _check_duplicates(times, first_line, name)
    return DecisionParameterTable(name, "interval", times, _reals(df, "value", first_line))
