from __future__ import annotations

import pytest

from mtsa.config import CONFIG_FILE, SolverConfig, load_config, render_config
from mtsa.exceptions import MTSAError


def write_ini(tmp_path, text: str):
    (tmp_path / CONFIG_FILE).write_text(text)
    return tmp_path


def test_defaults_without_file(tmp_path):
    config = load_config(tmp_path)
    assert config == SolverConfig()
    assert config.budget == 0.0


def test_camel_case_keys(tmp_path):
    root = write_ini(tmp_path, "[mtsa]\nannualBound = 250\nhorizonYears = 1\nsolver = local_search\n")
    config = load_config(root)
    assert config.annual_bound == 250.0
    assert config.horizon_years == 1.0
    assert config.solver == "local_search"
    assert config.budget == 250.0


def test_overrides_win(tmp_path):
    root = write_ini(tmp_path, "[mtsa]\nannualBound = 250\n")
    assert load_config(root, annual_bound=10.0, workers=None).annual_bound == 10.0


def test_unknown_key(tmp_path):
    root = write_ini(tmp_path, "[mtsa]\nannualBudget = 1\n")
    with pytest.raises(MTSAError) as info:
        load_config(root)
    assert "annualbudget" in info.value.text


def test_bad_value(tmp_path):
    root = write_ini(tmp_path, "[mtsa]\nworkers = many\n")
    with pytest.raises(MTSAError):
        load_config(root)


@pytest.mark.parametrize(
    "changes",
    [
        {"annual_bound": -1.0},
        {"horizon_years": -1.0},
        {"tolerance": 0.0},
        {"grid_step": -0.1},
        {"time_interval_size": 0.0},
        {"solver": "simplex"},
        {"workers": 0},
    ],
)
def test_invalid_values(changes):
    with pytest.raises(MTSAError):
        SolverConfig(**changes)


def test_render_reads_back(tmp_path):
    # GIVEN: a config with non-default values
    config = SolverConfig(annual_bound=12.5, big_m=1e5, water_fill_steps=8)
    # WHEN: it is written and read again
    write_ini(tmp_path, render_config(config))
    # THEN: nothing is lost
    assert load_config(tmp_path) == config


def test_replace_ignores_none():
    config = SolverConfig(annual_bound=3.0)
    assert config.replace(annual_bound=None, solver="zero_budget") == SolverConfig(
        annual_bound=3.0, solver="zero_budget"
    )
