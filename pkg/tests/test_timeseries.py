from __future__ import annotations

import time

import numpy as np
import pytest
from parameterized import parameterized

from mtsa.exceptions import DuplicateKey, OutOfRange, ParseError
from mtsa.timeseries import (
    CalendarTable,
    DecisionParameterTable,
    TimeEventSeries,
    TimeSeries,
    horizon_of,
    load_calendar,
    load_parameters,
    load_series,
    period_of,
    validate_calendar,
)
from tests.conftest import MTSATestCase, make_calendar, tiny_calendar


def three_hour_periods() -> CalendarTable:
    """t = -8..9 with three intervals per pay period."""
    times = np.arange(-8, 10)
    return CalendarTable(
        time=times,
        payPeriod=np.ceil(times / 3).astype(int),
        year=np.full(len(times), 2012),
        month=np.full(len(times), 1),
        day=np.full(len(times), 1),
        hour=np.arange(len(times)) % 24,
        weekDay=np.full(len(times), 3),
    )


class PeriodMapTests(MTSATestCase):
    @parameterized.expand([(2, 1), (3, 1), (0, 0), (8, 3), (-6, -2)])
    def test_period_of_examples(self, t, expected):
        cal = three_hour_periods()
        assert period_of(cal, t) == expected

    def test_period_of_is_fast(self):
        cal = three_hour_periods()
        start = time.perf_counter()
        for t in (2, 3, 0, 8, -6):
            period_of(cal, t)
        assert time.perf_counter() - start < 0.01

    @parameterized.expand([(-9,), (10,)])
    def test_period_of_outside_calendar(self, t):
        # GIVEN: a calendar over -8..9
        cal = three_hour_periods()
        # WHEN / THEN: a time outside it is rejected with its value
        with pytest.raises(OutOfRange) as info:
            period_of(cal, t)
        assert info.value.t == t

    def test_index_of_array(self):
        cal = tiny_calendar()
        assert cal.index_of(np.array([-2, 0, 4])).tolist() == [0, 2, 6]

    def test_future_periods(self):
        cal = tiny_calendar()
        assert cal.future_periods().tolist() == [1, 2]
        assert cal.periods().tolist() == [0, 1, 2]


class ValidateCalendarTests(MTSATestCase):
    def test_valid_calendar(self):
        assert validate_calendar(tiny_calendar()).ok

    def test_gap_is_reported(self):
        # GIVEN: a calendar missing t = 1
        cal = CalendarTable(
            time=[-1, 0, 2],
            payPeriod=[0, 0, 1],
            year=[2012] * 3,
            month=[7] * 3,
            day=[2] * 3,
            hour=[11] * 3,
            weekDay=[2] * 3,
        )
        # WHEN: the calendar is validated
        report = validate_calendar(cal)
        # THEN: one contiguity violation names the first time after the gap
        gaps = report.of_kind("contiguity")
        assert not report.ok
        assert [v.t for v in gaps] == [2]

    def test_period_must_not_decrease(self):
        cal = make_calendar([0, 1, 0, 1])
        report = validate_calendar(cal)
        assert [v.t for v in report.of_kind("monotonicity")] == [1]

    def test_field_ranges(self):
        cal = CalendarTable(
            time=[0, 1],
            payPeriod=[0, 1],
            year=[2012, 2012],
            month=[13, 7],
            day=[1, 1],
            hour=[11, 24],
            weekDay=[7, 2],
        )
        report = validate_calendar(cal)
        assert len(report.of_kind("range")) == 3

    def test_duplicate_time(self):
        cal = CalendarTable(
            time=[0, 0, 1],
            payPeriod=[0, 0, 1],
            year=[2012] * 3,
            month=[7] * 3,
            day=[2] * 3,
            hour=[11] * 3,
            weekDay=[2] * 3,
        )
        assert [v.t for v in validate_calendar(cal).of_kind("duplicate")] == [0]


class SeriesTests(MTSATestCase):
    def test_horizon_split(self):
        series = TimeSeries("d", [3, -1, 0, 1], [1.0, 2.0, 3.0, 4.0])
        assert horizon_of(series) == ((-1, 0), (1, 3))

    def test_duplicate_key(self):
        with pytest.raises(DuplicateKey):
            TimeSeries("d", [1, 1], [1.0, 2.0])

    def test_aligned_marks_missing(self):
        series = TimeSeries("d", [-2, 0], [5.0, 6.0])
        aligned = series.aligned(tiny_calendar())
        assert aligned[0] == 5.0
        assert aligned[2] == 6.0
        assert np.isnan(aligned[1])

    def test_event_series_occurrences(self):
        events = TimeEventSeries("ELS", [1, 2, 3], [0, 1, 1])
        assert events.occurrences().tolist() == [2, 3]
        assert events.to_csv().splitlines()[0] == "time,Indicator"


class CsvTests(MTSATestCase):
    def test_load_series_with_header(self):
        series = load_series("time,value\n-1,2.5\n0,3\n1,4.25\n", "ElectricPowerDemand")
        assert series.as_dict() == {-1: 2.5, 0: 3.0, 1: 4.25}

    def test_load_series_without_header(self):
        series = load_series("1,2\n2,3\n", "d")
        assert series.times.tolist() == [1, 2]

    def test_load_series_bad_value(self):
        # GIVEN: a CSV whose third line is not a number
        text = "time,value\n1,2\n2,abc\n"
        # WHEN / THEN: the error names the line
        with pytest.raises(ParseError) as info:
            load_series(text, "d")
        assert info.value.line == 3

    def test_load_series_non_integer_time(self):
        with pytest.raises(ParseError):
            load_series("time,value\n1.5,2\n", "d")

    def test_load_series_duplicate(self):
        with pytest.raises(DuplicateKey) as info:
            load_series("time,value\n1,2\n1,3\n", "d")
        assert info.value.time == 1

    def test_load_series_wrong_header(self):
        with pytest.raises(ParseError):
            load_series("t,v\n1,2\n", "d")

    @parameterized.expand(
        [
            ("header_extra", "time,value\n1,10,5\n2,11,6\n", 2, 3),
            ("headerless_extra", "1,10,5\n2,11,6\n", 1, 3),
            ("late_extra", "time,value\n1,10\n\n2,11,6\n", 4, 3),
            ("missing", "1,10\n2\n", 2, 1),
        ]
    )
    def test_load_series_field_count(self, _, text, line, fields):
        # GIVEN: a row whose field count differs from time,value
        # WHEN / THEN: it is rejected with its line instead of shifting columns
        with pytest.raises(ParseError) as info:
            load_series(text, "d")
        assert info.value.line == line
        assert info.value.fields == fields

    def test_calendar_csv(self):
        cal = load_calendar(tiny_calendar().to_csv())
        assert cal.time.tolist() == [-2, -1, 0, 1, 2, 3, 4]
        assert cal.pay_period.tolist() == [0, 0, 0, 1, 1, 2, 2]

    def test_period_parameters_broadcast(self):
        # GIVEN: a per-period table over the TINY future periods
        table = DecisionParameterTable("PeakDemandBound", "period", [1, 2], [14.0, 12.6])
        # WHEN: it is written against the calendar
        text = table.to_csv(tiny_calendar())
        # THEN: every interval of a period repeats its value
        lines = text.splitlines()
        assert lines[0] == "time,period,value"
        assert lines[1:] == ["1,1,14.0", "2,1,14.0", "3,2,12.6", "4,2,12.6"]
        assert load_parameters(text, "PeakDemandBound").as_dict() == {1: 14.0, 2: 12.6}

    def test_interval_parameters(self):
        table = DecisionParameterTable("KW", "interval", [1, 2], [10.0, 13.0])
        text = table.to_csv()
        assert text.splitlines()[0] == "time,value"
        loaded = load_parameters(text, "KW")
        assert loaded.keyed == "interval"
        assert loaded.as_dict() == {1: 10.0, 2: 13.0}

    def test_disagreeing_period_rows(self):
        with pytest.raises(ParseError):
            load_parameters("time,period,value\n1,1,2\n2,1,3\n", "PeakDemandBound")
