from __future__ import annotations

import numpy as np

from mtsa.synthetic import generate, on_peak, summer_on_peak, synthetic_store
from mtsa.timeseries import validate_calendar


def test_layout():
    calendar, demand = generate()
    assert len(calendar) == 8760 + 17520
    assert calendar.time[0] == -8759
    assert calendar.time[-1] == 17520
    assert calendar.future_periods().tolist() == list(range(1, 25))
    assert validate_calendar(calendar).ok
    assert demand.name == "ElectricPowerDemand"


def test_seed_is_reproducible():
    assert generate(7)[1].to_csv() == generate(7)[1].to_csv()
    assert generate(7)[1].to_csv() != generate(8)[1].to_csv()


def test_off_peak_stays_below_the_monthly_peak():
    store = synthetic_store()
    cal = store.calendar
    values = store.get("ElectricPowerDemand").aligned(cal)
    peak = on_peak(cal)
    for p in np.unique(cal.pay_period).tolist():
        month = cal.pay_period == p
        assert values[month & ~peak].max() <= values[month & peak].max()


def test_summer_peak_is_part_of_on_peak():
    cal, _ = generate()
    summer = summer_on_peak(cal)
    assert summer.any()
    assert not (summer & ~on_peak(cal)).any()
