"""The root of the mtsa package namespace."""

from __future__ import annotations

import logging

try:
    import importlib.metadata

    __version__ = importlib.metadata.version("mtsa")
except Exception:
    __version__ = "unknown"

logging.getLogger(__name__).addHandler(logging.NullHandler())

from mtsa.compiler import Catalog, PEInstance, compile_event, ground  # noqa: E402
from mtsa.config import SolverConfig, load_config  # noqa: E402
from mtsa.emitters import build_milp, emit_milp, emit_opl  # noqa: E402
from mtsa.exceptions import MTSAError  # noqa: E402
from mtsa.monitor import compile_monitor, replay  # noqa: E402
from mtsa.parser import parse_script, pretty_print  # noqa: E402
from mtsa.solver import (  # noqa: E402
    brute_force_oracle,
    check_solution,
    local_search,
    solve,
    solve_breakpoints,
    solve_zero_budget,
)
from mtsa.timeseries import CalendarTable, TimeSeries, period_of  # noqa: E402
from mtsa.workspace import Workspace, execute_script, export_model  # noqa: E402

__all__ = (
    "__version__",
    "Catalog",
    "CalendarTable",
    "MTSAError",
    "PEInstance",
    "SolverConfig",
    "TimeSeries",
    "Workspace",
    "brute_force_oracle",
    "build_milp",
    "check_solution",
    "compile_event",
    "compile_monitor",
    "emit_milp",
    "emit_opl",
    "execute_script",
    "export_model",
    "ground",
    "load_config",
    "local_search",
    "parse_script",
    "period_of",
    "pretty_print",
    "replay",
    "solve",
    "solve_breakpoints",
    "solve_zero_budget",
)
