"""A synthetic replica of a campus demand history and projection.

One past year (2011) and two projected years (2012-2013) of hourly demand,
``t = -8759..17520``. Pay periods are calendar months numbered so that
January 2012 is period 1. Demand follows a daily, weekly and seasonal shape
with a small annual growth; off-peak hours never exceed the on-peak maximum of
their month, so a zero-budget optimum bills exactly the contract peaks.
"""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from mtsa.timeseries import CalendarTable, DataStore, TimeSeries

LOG = logging.getLogger(__name__)

__all__ = ("DEMAND_SERIES", "generate", "on_peak", "summer_on_peak", "synthetic_store")

START = "2011-01-01"
PAST_INTERVALS = 8760
FUTURE_INTERVALS = 17520
FIRST_PERIOD_YEAR = 2012
DEMAND_SERIES = "ElectricPowerDemand"


def _calendar_frame() -> pd.DataFrame:
    stamps = pd.date_range(START, periods=PAST_INTERVALS + FUTURE_INTERVALS, freq="h")
    return pd.DataFrame(
        {
            "time": np.arange(len(stamps), dtype=np.int64) - (PAST_INTERVALS - 1),
            "payPeriod": (stamps.year - FIRST_PERIOD_YEAR) * 12 + stamps.month,
            "year": stamps.year,
            "month": stamps.month,
            "day": stamps.day,
            "hour": stamps.hour,
            "weekDay": (stamps.dayofweek + 1) % 7,
        }
    )


def on_peak(calendar: CalendarTable) -> np.ndarray:
    """Rows whose demand sets the monthly billed peak.

    Weekdays, 10:00-22:00 in June-September, 7:00-22:00 in the other months.
    """
    weekday = (calendar.column("weekDay") >= 1) & (calendar.column("weekDay") <= 5)
    hour, month = calendar.column("hour"), calendar.column("month")
    summer = (month >= 6) & (month <= 9)
    return weekday & np.where(summer, (hour >= 10) & (hour <= 22), (hour >= 7) & (hour <= 22))


def summer_on_peak(calendar: CalendarTable) -> np.ndarray:
    """Rows whose demand counts toward the ratchet on later months."""
    weekday = (calendar.column("weekDay") >= 1) & (calendar.column("weekDay") <= 5)
    hour, month = calendar.column("hour"), calendar.column("month")
    return weekday & (month >= 6) & (month <= 9) & (hour >= 10) & (hour <= 22)


def generate(seed: int | None = 2012) -> tuple[CalendarTable, TimeSeries]:
    """Build the calendar and the demand series.

    Args:
        seed (Optional[int]): Seed of the noise generator; the same seed gives
            byte-identical data.

    Returns:
        Tuple[CalendarTable, TimeSeries]
    """
    frame = _calendar_frame()
    calendar = CalendarTable.from_frame(frame)
    rng = np.random.default_rng(seed)
    hour = frame["hour"].to_numpy()
    month = frame["month"].to_numpy()
    weekday = frame["weekDay"].to_numpy()
    years = (frame["time"].to_numpy() + PAST_INTERVALS) / 8760.0

    base = 9000.0 * (1.0 + 0.02 * years)
    seasonal = 3500.0 * np.exp(-(((month - 7.5) / 1.6) ** 2)) + 800.0 * np.exp(-(((month - 1.0) / 1.2) ** 2))
    daily = 2500.0 * np.clip(np.sin(np.pi * (hour - 6) / 17.0), 0.0, None)
    working = np.where((weekday >= 1) & (weekday <= 5), 1.0, 0.7)
    noise = rng.normal(0.0, 250.0, size=len(frame))
    demand = np.maximum((base + seasonal + daily) * working + noise, 0.0)

    peak = on_peak(calendar)
    periods = calendar.pay_period
    df = pd.DataFrame({"period": periods, "demand": demand, "peak": peak})
    ceiling = df[df["peak"]].groupby("period")["demand"].max()
    cap = df["period"].map(0.98 * ceiling).to_numpy()
    demand = np.where(peak, demand, np.minimum(demand, cap))
    demand = np.round(demand, 1)
    LOG.info(f"Generated {len(demand)} synthetic demand values (seed {seed})")
    return calendar, TimeSeries(DEMAND_SERIES, calendar.time, demand)


def synthetic_store(seed: int | None = 2012) -> DataStore:
    calendar, demand = generate(seed)
    store = DataStore(calendar)
    store.add(demand)
    return store
