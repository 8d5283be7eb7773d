"""Config handler.

This module keeps the solver and workspace options of a project outside the
scripts, in an ``mtsa.ini`` file in the workspace root, so the same ``.mtsa``
script can be re-run with a different shed budget or solver.
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass

from typing_extensions import Literal

from mtsa.exceptions import MTSAError

LOG = logging.getLogger(__name__)

CONFIG_FILE = "mtsa.ini"
SECTION = "mtsa"

SolverName = Literal["zero_budget", "breakpoints", "local_search"]
SOLVERS = ("zero_budget", "breakpoints", "local_search")


@dataclass(frozen=True)
class SolverConfig:
    """Options for grounding and solving a learning event.

    Attributes:
        annual_bound (float): Energy that may be shed per year (kWh).
        time_interval_size (float): Duration of one base interval in hours.
        horizon_years (float): Number of years covered by the future horizon.
        tolerance (float): Relative tolerance for constraint checks.
        grid_step (float): Step of the brute force oracle grid (kW).
        grid_cap (float): Largest number of grid points the oracle will visit.
        solver (str): One of ``zero_budget``, ``breakpoints``, ``local_search``.
        max_exhaustive_combos (int): Cap on the breakpoint cross-product.
        refinement_iters (int): Golden-section passes after the exhaustive step.
        water_fill_steps (int): Number of budget fractions tried per period.
        max_local_iterations (int): Iteration cap of the local search.
        workers (int): Threads used by the oracle.
        big_m (Optional[float]): Big-M for MILP export, max demand when unset.
    """

    annual_bound: float = 0.0
    time_interval_size: float = 1.0
    horizon_years: float = 2
    tolerance: float = 1e-6
    grid_step: float = 0.1
    grid_cap: float = 2.5e8
    solver: SolverName = "breakpoints"
    max_exhaustive_combos: int = 20000
    refinement_iters: int = 2
    water_fill_steps: int = 4
    max_local_iterations: int = 1000
    workers: int = 1
    big_m: float | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise MTSAError("tolerance must be positive", tolerance=self.tolerance)
        if not self.grid_step > 0:
            raise MTSAError("gridStep must be positive", grid_step=self.grid_step)
        if self.annual_bound < 0:
            raise MTSAError(
                "annualBound must not be negative", annual_bound=self.annual_bound
            )
        if not self.horizon_years >= 0:
            raise MTSAError(
                "horizonYears must not be negative", horizon_years=self.horizon_years
            )
        if not self.time_interval_size > 0:
            raise MTSAError(
                "timeIntervalSize must be positive",
                time_interval_size=self.time_interval_size,
            )
        if self.solver not in SOLVERS:
            raise MTSAError(f"unknown solver {self.solver!r}", choices=SOLVERS)
        if self.workers < 1:
            raise MTSAError("workers must be at least 1", workers=self.workers)

    @property
    def budget(self) -> float:
        """float: Shed budget over the whole future horizon (kWh)."""
        return self.annual_bound * self.horizon_years

    def replace(self, **changes) -> SolverConfig:
        """A copy with the given fields changed; None values are ignored."""
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


# ini key -> (field, converter); configparser lowercases keys
_KEYS = {
    "annualbound": ("annual_bound", float),
    "timeintervalsize": ("time_interval_size", float),
    "horizonyears": ("horizon_years", float),
    "tolerance": ("tolerance", float),
    "gridstep": ("grid_step", float),
    "gridcap": ("grid_cap", float),
    "solver": ("solver", str),
    "maxexhaustivecombos": ("max_exhaustive_combos", int),
    "refinementiters": ("refinement_iters", int),
    "waterfillsteps": ("water_fill_steps", int),
    "maxlocaliterations": ("max_local_iterations", int),
    "workers": ("workers", int),
    "bigm": ("big_m", float),
}


def findfile(path: str, root: str | os.PathLike | None = None) -> str | None:
    """Find the file named path in the workspace root, the current directory, home or sys.path.

    Returns the full path name if found, None if not found
    """
    paths = [os.fspath(root)] if root is not None else []
    paths.extend([".", os.path.expanduser("~")])
    paths.extend(sys.path)
    for dirname in paths:
        possible = os.path.abspath(os.path.join(dirname, path))
        if os.path.isfile(possible):
            return possible
    return None


def load_config(
    root: str | os.PathLike | None = None, search: bool = False, **overrides
) -> SolverConfig:
    """Return a SolverConfig built from the ``mtsa.ini`` file.

    Args:
        root (Optional[str]): Workspace directory holding ``mtsa.ini``.
        search (bool): Also look in the current directory, the user home
            directory and PYTHONPATH when the workspace has no file.
        **overrides: Field values that win over the file.

    Returns:
        SolverConfig

    Raises:
        MTSAError: on unknown keys or values that do not convert.

    Usage:

        >>> from mtsa.config import load_config
        >>>
        >>> config = load_config("my-workspace", annual_bound=10.0)

    The file looks like this:

    .. code-block:: none

        [mtsa]
        annualBound = 0
        timeIntervalSize = 1.0
        horizonYears = 2
        solver = breakpoints

    """
    config_file = None
    if root is not None:
        candidate = os.path.join(os.fspath(root), CONFIG_FILE)
        if os.path.isfile(candidate):
            config_file = candidate
    if config_file is None and (search or root is None):
        config_file = findfile(CONFIG_FILE)

    values: dict[str, object] = {}
    if config_file:
        LOG.debug(f"Found {config_file} config file")
        parser = configparser.ConfigParser()
        try:
            parser.read(config_file)
        except configparser.Error as err:
            raise MTSAError(f"Couldn't read config file: {err}", path=config_file)
        if parser.has_section(SECTION):
            for key, raw in parser.items(SECTION):
                if key not in _KEYS:
                    raise MTSAError(f"unknown option {key!r}", path=config_file)
                field, convert = _KEYS[key]
                try:
                    values[field] = convert(raw.strip())
                except ValueError:
                    raise MTSAError(
                        f"bad value {raw!r} for {key!r}", path=config_file
                    ) from None

    values.update({k: v for k, v in overrides.items() if v is not None})
    return SolverConfig(**values)  # type: ignore[arg-type]


def render_config(config: SolverConfig) -> str:
    """Render a config as ``mtsa.ini`` text."""
    lines = [f"[{SECTION}]"]
    names = {field: key for key, (field, _) in _KEYS.items()}
    spelled = {
        "annualbound": "annualBound",
        "timeintervalsize": "timeIntervalSize",
        "horizonyears": "horizonYears",
        "gridstep": "gridStep",
        "gridcap": "gridCap",
        "maxexhaustivecombos": "maxExhaustiveCombos",
        "refinementiters": "refinementIters",
        "waterfillsteps": "waterFillSteps",
        "maxlocaliterations": "maxLocalIterations",
        "bigm": "bigM",
    }
    for field in dataclasses.fields(config):
        value = getattr(config, field.name)
        if value is None:
            continue
        key = names[field.name]
        lines.append(f"{spelled.get(key, key)} = {value}")
    return "\n".join(lines) + "\n"
