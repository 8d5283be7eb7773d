from __future__ import annotations

import re
import unittest
from pathlib import Path

import numpy as np
import pyomo.environ as pyo
import pytest
from hypothesis import strategies as st
from pyomo.repn import generate_standard_repn

from mtsa.compiler import Catalog, GroundInstance, compile_event, ground
from mtsa.config import SolverConfig
from mtsa.parser import parse_script
from mtsa.statements import CreateEvent, Execute, Monitor, Statement
from mtsa.timeseries import CalendarTable, DataStore, TimeSeries
from mtsa.workspace import Workspace, example_script

EVENT = "LearnPeakDemandBoundParameter"
MONITORED_VIEW = "ELS_Monitoring_Recommendation"
DEMAND = "ElectricPowerDemand"

SHED_ACTION = (
    "The Electric Power Demand Greater Than The Peak Demand Bound. "
    "The Electric Load Shedding Is Recommended."
)

# seven hourly intervals: pay period 0 is history, 1 and 2 are the future
TINY_TIMES = (-2, -1, 0, 1, 2, 3, 4)
TINY_PERIODS = (0, 0, 0, 1, 1, 2, 2)
TINY_DEMAND = {-2: 10.0, -1: 8.0, 0: 12.0, 1: 10.0, 2: 14.0, 3: 9.0, 4: 11.0}

# the series, parameter, monitoring, charge and learning statements of the shipped script
CORE_STATEMENTS = (
    "ElectricPowerDemand",
    "PeakDemandBound",
    "ElectricLoadShedding",
    "ELS_Monitoring_Recommendation",
    "MonthlyEServiceCharge",
    "CurrentBillingMonth",
    "ElectricPowerPeakDemandBound",
    "LearnPeakDemandBoundParameter",
)


def script_statement_texts() -> list[str]:
    """The shipped script split into one text per statement."""
    return [chunk + ";" for chunk in example_script().split(";") if chunk.strip()]


def statement_text(name: str) -> str:
    for text in script_statement_texts():
        m = re.search(r"CREATE\s+(?:TABLE|VIEW|EVENT)\s+(\w+)", text)
        if m and m.group(1) == name:
            return text
    raise KeyError(name)


def campus_definitions() -> list[Statement]:
    return [s for s in parse_script(example_script()) if not isinstance(s, (Execute, Monitor))]


def campus_catalog() -> Catalog:
    return Catalog(campus_definitions())


def campus_event(catalog: Catalog | None = None) -> CreateEvent:
    return (catalog or campus_catalog()).event(EVENT)


def make_calendar(periods) -> CalendarTable:
    """A calendar whose first row is ``t = 1 - n_past``; every row is a July weekday at 11:00."""
    periods = np.asarray(periods, dtype=np.int64)
    n_past = int(np.sum(periods <= 0))
    n = len(periods)
    return CalendarTable(
        time=np.arange(n) - n_past + 1,
        payPeriod=periods,
        year=np.full(n, 2012),
        month=np.full(n, 7),
        day=np.full(n, 2),
        hour=np.full(n, 11),
        weekDay=np.full(n, 2),
    )


def tiny_calendar() -> CalendarTable:
    return make_calendar(TINY_PERIODS)


def tiny_store(demand: dict[int, float] | None = None) -> DataStore:
    store = DataStore(tiny_calendar())
    store.add(TimeSeries.from_mapping(DEMAND, demand or TINY_DEMAND))
    return store


def tiny_ground(
    annual_bound: float = 0.0,
    horizon_years: float = 1.0,
    store: DataStore | None = None,
    **options,
) -> GroundInstance:
    """The shipped learning event grounded on TINY; the budget is ``annual_bound * horizon_years``."""
    config = SolverConfig(annual_bound=annual_bound, horizon_years=horizon_years, **options)
    catalog = campus_catalog()
    instance = compile_event(campus_event(catalog), catalog)
    return ground(instance, store or tiny_store(), config)


def write_tiny_data(ws: Workspace, demand: dict[int, float] | None = None) -> None:
    ws.load_csv(tiny_calendar().to_csv(), "calendar")
    ws.load_csv(TimeSeries.from_mapping(DEMAND, demand or TINY_DEMAND).to_csv(), DEMAND)


def linear_row(con, lead: str | None = None) -> tuple[dict[str, float], float | None, float | None]:
    """Read a pyomo constraint back as ``lo <= sum(coef * var) <= hi``.

    Fixed variables fold into the bounds. With ``lead`` the row is scaled so
    that variable has a positive coefficient.
    """
    repn = generate_standard_repn(con.body, compute_values=True)
    coeffs = {v.name: float(c) for v, c in zip(repn.linear_vars, repn.linear_coefs)}
    shift = float(pyo.value(repn.constant))
    lo = None if con.lb is None else pyo.value(con.lb) - shift
    hi = None if con.ub is None else pyo.value(con.ub) - shift
    if lead is not None and coeffs.get(lead, 0.0) < 0:
        coeffs = {name: -c for name, c in coeffs.items()}
        lo, hi = (None if hi is None else -hi), (None if lo is None else -lo)
    return coeffs, lo, hi


@st.composite
def small_instances(draw, max_periods: int = 3, max_intervals: int = 12):
    """Random stores of at most ``max_periods`` future periods and ``max_intervals`` intervals.

    Demands are on a 0.5 grid so bounds found by the solvers and the grid
    oracle coincide.
    """
    n_future = draw(st.integers(1, max_periods))
    sizes = [draw(st.integers(1, 3)) for _ in range(n_future + 1)]
    while sum(sizes) > max_intervals:
        i = int(np.argmax(sizes))
        sizes[i] -= 1
    periods = np.repeat(np.arange(len(sizes)), sizes)
    calendar = make_calendar(periods)
    values = draw(
        st.lists(
            st.integers(2, 40).map(lambda v: v / 2.0),
            min_size=len(periods),
            max_size=len(periods),
        )
    )
    store = DataStore(calendar)
    store.add(TimeSeries(DEMAND, calendar.time, values))
    return store


@pytest.fixture
def tiny_workspace(tmp_path: Path) -> Workspace:
    ws = Workspace.init(tmp_path / "ws", config=SolverConfig(horizon_years=1))
    write_tiny_data(ws)
    return ws


class MTSATestCase(unittest.TestCase):
    """Test case for the pipeline tests.

    Provides the compiled shipped learning event and the TINY data set: seven
    hourly intervals, one past pay period and two future ones.

    Where possible follow the:

    * GIVEN - where you set up any pre-requisites e.g. the expected result
    * WHEN  - where you perform the action and obtain the result
    * THEN  - where you assert the expectation vs the result

    format for tests.
    """

    catalog: Catalog
    store: DataStore

    def setUp(self) -> None:
        """
        This is called before each test. If you want to add more for your tests,
        Run `super().setUp() in your custom setUp() to obtain these.
        """
        self.catalog = campus_catalog()
        self.event = campus_event(self.catalog)
        self.instance = compile_event(self.event, self.catalog)
        self.store = tiny_store()

    def ground(self, annual_bound: float = 0.0, **options) -> GroundInstance:
        config = SolverConfig(annual_bound=annual_bound, horizon_years=1.0, **options)
        return ground(self.instance, self.store, config)
