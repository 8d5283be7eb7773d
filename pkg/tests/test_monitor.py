from __future__ import annotations

import io
import json

import pytest

from mtsa.exceptions import MissingParameter, ParseError, UnorderedStream, UnsupportedViewShape
from mtsa.monitor import (
    DEFAULT_ACTION,
    StreamRecord,
    compile_monitor,
    follow,
    indicator_series,
    parse_stream,
    replay,
    step,
)
from mtsa.timeseries import DecisionParameterTable
from tests.conftest import (
    SHED_ACTION,
    MONITORED_VIEW,
    TINY_DEMAND,
    MTSATestCase,
    make_calendar,
    tiny_calendar,
)

THRESHOLD = 17211.0


def bound_table(values: dict[int, float]) -> dict[str, DecisionParameterTable]:
    return {
        "PeakDemandBound": DecisionParameterTable(
            "PeakDemandBound", "period", list(values), list(values.values())
        )
    }


class MonthStreamTests(MTSATestCase):
    def setUp(self) -> None:
        super().setUp()
        # one history interval and a 720 hour pay period
        self.calendar = make_calendar([0] + [1] * 720)
        self.rule = compile_monitor(
            MONITORED_VIEW, self.catalog, bound_table({1: THRESHOLD}), self.calendar
        )

    def test_rule(self):
        assert self.rule.series == "ElectricPowerDemand"
        assert self.rule.parameter == "PeakDemandBound"
        assert self.rule.op == ">"
        assert self.rule.action == SHED_ACTION

    def test_three_peaks_fire(self):
        # GIVEN: a month of demand with three intervals above the bound
        peaks = {100: 17500.0, 400: 18000.0, 650: 17211.5}
        stream = [StreamRecord(t, peaks.get(t, 12000.0)) for t in range(1, 721)]
        # WHEN: the stream is replayed
        recommendations = replay(self.rule, stream)
        # THEN: exactly those intervals recommend load shedding
        fired = [r for r in recommendations if r.indicator]
        assert len(recommendations) == 720
        assert [r.time for r in fired] == [100, 400, 650]
        assert all(r.action == SHED_ACTION for r in fired)
        assert all(r.threshold == THRESHOLD for r in fired)

    def test_equal_demand_does_not_fire(self):
        rec = step(self.rule, StreamRecord(5, THRESHOLD))
        assert rec.indicator == 0
        assert "action" not in rec.to_dict()

    def test_replay_writes_json_lines(self):
        log = io.StringIO()
        replay(self.rule, [StreamRecord(1, 1.0), StreamRecord(2, 20000.0)], log)
        lines = [json.loads(line) for line in log.getvalue().splitlines()]
        assert [line["indicator"] for line in lines] == [0, 1]
        assert lines[1]["action"] == SHED_ACTION

    def test_unordered_replay(self):
        with pytest.raises(UnorderedStream) as info:
            replay(self.rule, [StreamRecord(3, 1.0), StreamRecord(2, 1.0)])
        assert (info.value.t, info.value.previous) == (2, 3)

    def test_follow(self):
        log = io.StringIO()
        lines = ["time,value", "1,100", "", "# pause", "2,18000"]
        recommendations = list(follow(self.rule, lines, log))
        assert [r.indicator for r in recommendations] == [0, 1]
        assert len(log.getvalue().splitlines()) == 2

    def test_follow_rejects_going_back(self):
        with pytest.raises(UnorderedStream):
            list(follow(self.rule, ["5,1", "4,1"]))

    def test_indicator_series(self):
        recommendations = replay(self.rule, [StreamRecord(1, 1.0), StreamRecord(2, 20000.0)])
        events = indicator_series(self.rule, recommendations)
        assert events.occurrences().tolist() == [2]


class ReplayTinyTests(MTSATestCase):
    def test_zero_budget_bounds_never_fire(self):
        # GIVEN: the bounds learned with no shedding allowed
        rule = compile_monitor(MONITORED_VIEW, self.catalog, bound_table({1: 14.0, 2: 12.6}), tiny_calendar())
        stream = [StreamRecord(t, TINY_DEMAND[t]) for t in range(1, 5)]
        # WHEN / THEN: no future demand exceeds its bound
        assert sum(r.indicator for r in replay(rule, stream)) == 0

    def test_one_kwh_bounds_fire_once(self):
        rule = compile_monitor(MONITORED_VIEW, self.catalog, bound_table({1: 13.0, 2: 11.7}), tiny_calendar())
        stream = [StreamRecord(t, TINY_DEMAND[t]) for t in range(1, 5)]
        assert [r.time for r in replay(rule, stream) if r.indicator] == [2]

    def test_indicator_view_uses_default_action(self):
        rule = compile_monitor("ElectricLoadShedding", self.catalog, bound_table({1: 14.0, 2: 12.6}), tiny_calendar())
        assert rule.action == DEFAULT_ACTION

    def test_missing_period(self):
        with pytest.raises(MissingParameter) as info:
            compile_monitor(MONITORED_VIEW, self.catalog, bound_table({1: 14.0}), tiny_calendar())
        assert info.value.missing == [2]

    def test_not_learned(self):
        with pytest.raises(MissingParameter):
            compile_monitor(MONITORED_VIEW, self.catalog, {}, tiny_calendar())

    def test_view_without_case(self):
        with pytest.raises(UnsupportedViewShape):
            compile_monitor("MonthlyEServiceCharge", self.catalog, {}, tiny_calendar())

    def test_unknown_view(self):
        with pytest.raises(UnsupportedViewShape):
            compile_monitor("NoSuchView", self.catalog, {}, tiny_calendar())


class ParseStreamTests(MTSATestCase):
    def test_header_blanks_and_comments(self):
        records = list(parse_stream(["time,value", "", "# note", "1, 2.5", "2,3"]))
        assert records == [StreamRecord(1, 2.5), StreamRecord(2, 3.0)]

    def test_bad_line(self):
        with pytest.raises(ParseError) as info:
            list(parse_stream(["1,2", "2,oops"]))
        assert info.value.line == 2

    def test_fractional_time(self):
        with pytest.raises(ParseError):
            list(parse_stream(["1.5,2"]))
