"""Workspace directories and the script runner.

A workspace is a directory holding everything one project needs::

    mtsa.ini            solver options
    catalog.json        CREATE statements executed so far, pretty printed
    data/               calendar.csv and one <Series>.csv per input series
    params/             learned or supplied parameter tables
    solutions/          <Event>.json per executed learning event
    logs/               <View>.jsonl recommendation logs
    exports/            OPL and LP models

Mutating operations hold ``.mtsa.lock`` for their duration.
"""

from __future__ import annotations

import contextlib
import errno
import json
import logging as _logging
import os
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, List

from mtsa.compiler import Catalog, GroundInstance, compile_event, ground
from mtsa.config import CONFIG_FILE, SolverConfig, load_config, render_config
from mtsa.emitters import emit_milp, emit_opl, emit_opl_data
from mtsa.exceptions import (
    DialectError,
    MissingSeries,
    MTSAError,
    StatementFailed,
    UnknownEvent,
    UnknownView,
    WorkspaceError,
    WorkspaceLocked,
)
from mtsa.monitor import (
    MonitoringRule,
    Recommendation,
    StreamRecord,
    compile_monitor,
    follow,
    replay,
)
from mtsa.parser import parse_script, pretty_print
from mtsa.solver import CheckReport, Solution, check_solution, solve
from mtsa.statements import (
    CreateEvent,
    CreateTable,
    CreateView,
    Execute,
    Monitor,
    Statement,
    statement_kind,
    statement_name,
)
from mtsa.synthetic import generate
from mtsa.timeseries import (
    DataStore,
    DecisionParameterTable,
    load_calendar,
    load_parameters,
    load_series,
)
from mtsa.utils import atomic_write, json_dumps

LOG = _logging.getLogger(__name__)

__all__ = (
    "RunReport",
    "StatementResult",
    "Workspace",
    "example_script",
    "execute_script",
    "export_model",
    "monitor_rule",
    "monitor_view",
    "solve_event",
)

CATALOG_FILE = "catalog.json"
LOCK_FILE = ".mtsa.lock"
CALENDAR = "calendar"
EXAMPLE_SCRIPT = "campus.mtsa"


def example_script() -> str:
    """Text of the shipped peak demand learning script."""
    return (resources.files("mtsa") / "scripts" / EXAMPLE_SCRIPT).read_text(encoding="utf-8")


class Workspace:
    """An initialized workspace directory.

    Args:
        root (str): The workspace directory.
        config (Optional[SolverConfig]): Options; read from ``mtsa.ini`` when omitted.
        logging (bool): True enables loglevel to info => else critical. (Default: ``True``)

    Raises:
        WorkspaceError: when ``root`` has not been initialized.
    """

    def __init__(
        self,
        root: str | os.PathLike,
        config: SolverConfig | None = None,
        logging: bool = True,
    ):
        self.root = Path(root)
        if not (self.root / CATALOG_FILE).is_file():
            raise WorkspaceError("not a workspace; run `mtsa init` first", root=str(self.root))
        _logging.getLogger("mtsa").setLevel(_logging.INFO if logging else _logging.CRITICAL)
        self.config = config or load_config(self.root)
        self.catalog = self._read_catalog()

    @classmethod
    def init(
        cls,
        root: str | os.PathLike,
        synthetic: bool = False,
        seed: int | None = None,
        config: SolverConfig | None = None,
    ) -> Workspace:
        """Create the workspace layout, optionally with synthetic data."""
        root = Path(root)
        if (root / CATALOG_FILE).exists():
            raise WorkspaceError("workspace already initialized", root=str(root))
        for sub in ("data", "params", "solutions", "logs", "exports"):
            (root / sub).mkdir(parents=True, exist_ok=True)
        atomic_write(root / CONFIG_FILE, render_config(config or SolverConfig()))
        atomic_write(root / CATALOG_FILE, json_dumps({"statements": []}))
        atomic_write(root / EXAMPLE_SCRIPT, example_script())
        if synthetic:
            calendar, demand = generate(2012 if seed is None else seed)
            atomic_write(root / "data" / f"{CALENDAR}.csv", calendar.to_csv())
            atomic_write(root / "data" / f"{demand.name}.csv", demand.to_csv())
        LOG.info(f"Initialized workspace {root}")
        return cls(root, config)

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    @property
    def params_dir(self) -> Path:
        return self.root / "params"

    def solution_path(self, event: str) -> Path:
        return self.root / "solutions" / f"{event}.json"

    def log_path(self, view: str) -> Path:
        return self.root / "logs" / f"{view}.jsonl"

    def export_dir(self) -> Path:
        return self.root / "exports"

    @contextlib.contextmanager
    def lock(self) -> Iterator[None]:
        """Hold the workspace lock file.

        Raises:
            WorkspaceLocked: when another process holds it.
        """
        path = self.root / LOCK_FILE
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except OSError as err:
            if err.errno == errno.EEXIST:
                raise WorkspaceLocked(
                    f"workspace is in use; remove {LOCK_FILE} if no mtsa process is running",
                    path=str(path),
                ) from None
            raise
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            LOG.debug(f"Acquired {path}")
            yield
        finally:
            with contextlib.suppress(FileNotFoundError):
                path.unlink()

    # catalog

    def _read_catalog(self) -> Catalog:
        with open(self.root / CATALOG_FILE, encoding="utf-8") as f:
            data = json.load(f)
        catalog = Catalog()
        for entry in data.get("statements", []):
            for stmt in parse_script(entry["text"]):
                catalog.add(stmt)
        return catalog

    def save_catalog(self) -> None:
        """Rewrite ``catalog.json``: tables, then views, then events, by name.

        Predefined calendar tables are left out unless redeclared differently.
        """
        builtin = Catalog().tables
        definitions: list[Statement] = [
            t for key, t in self.catalog.tables.items() if builtin.get(key) != t
        ]
        definitions.extend(self.catalog.views.values())
        definitions.extend(self.catalog.events.values())
        entries = [
            {"kind": statement_kind(stmt), "name": statement_name(stmt), "text": pretty_print(stmt)}
            for stmt in definitions
        ]
        entries.sort(key=lambda e: (("table", "view", "event").index(e["kind"]), e["name"].casefold()))
        atomic_write(self.root / CATALOG_FILE, json_dumps({"statements": entries}))

    def define(self, stmt: Statement) -> None:
        """Add a CREATE statement to the catalog and persist it."""
        self.catalog.add(stmt)
        self.save_catalog()

    # data

    def store(self) -> DataStore:
        """The calendar and every loaded input series.

        Raises:
            MissingSeries: when no calendar has been loaded.
        """
        path = self.data_dir / f"{CALENDAR}.csv"
        if not path.is_file():
            raise MissingSeries("no calendar loaded; use `mtsa load <csv> --as calendar`")
        store = DataStore(load_calendar(path.read_text(encoding="utf-8")))
        for csv in sorted(self.data_dir.glob("*.csv")):
            if csv.stem != CALENDAR:
                store.add(load_series(csv.read_text(encoding="utf-8"), csv.stem))
        return store

    def params(self) -> dict[str, DecisionParameterTable]:
        return {
            csv.stem: load_parameters(csv.read_text(encoding="utf-8"), csv.stem)
            for csv in sorted(self.params_dir.glob("*.csv"))
        }

    def load_csv(self, csv_text: str, name: str) -> Path:
        """Validate and store a calendar, series or parameter CSV.

        Names of catalogued tables keyed by a period column go to ``params/``.
        """
        if name.casefold() == CALENDAR:
            table = load_calendar(csv_text)
            path = self.data_dir / f"{CALENDAR}.csv"
            atomic_write(path, table.to_csv())
            return path
        declared = self.catalog.table(name)
        if declared is not None and any(c.type.is_interval and c.name != "time" for c in declared.columns):
            params = load_parameters(csv_text, str(declared.name))
            path = self.params_dir / f"{declared.name}.csv"
            atomic_write(path, params.to_csv(self.store().calendar if params.keyed == "period" else None))
            return path
        series = load_series(csv_text, str(declared.name) if declared is not None else name)
        path = self.data_dir / f"{series.name}.csv"
        atomic_write(path, series.to_csv())
        return path

    def event(self, name: str) -> CreateEvent:
        event = self.catalog.event(name)
        if event is None:
            raise UnknownEvent(f"no learning event named {name}", event=name)
        return event

    def ground(self, name: str, config: SolverConfig | None = None) -> GroundInstance:
        instance = compile_event(self.event(name), self.catalog)
        return ground(instance, self.store(), config or self.config)


def solve_event(
    ws: Workspace, name: str, config: SolverConfig | None = None
) -> tuple[Solution, CheckReport]:
    """Compile, ground, solve and check an event, then store the learned tables.

    Writes one CSV per learned parameter table to ``params/`` and the solution
    summary to ``solutions/<event>.json``.
    """
    config = config or ws.config
    g = ws.ground(name, config)
    solution = solve(g, config)
    report = check_solution(g, solution, config.tolerance)
    roles = g.roles
    tables = (
        DecisionParameterTable(roles.bound, "period", solution.periods, solution.bounds),
        DecisionParameterTable(roles.supply, "period", solution.periods, solution.ppsd),
        DecisionParameterTable(roles.kw, "interval", g.times, solution.kw),
    )
    for table in tables:
        atomic_write(ws.params_dir / f"{table.name}.csv", table.to_csv(g.calendar))
    summary = solution.to_dict()
    summary.update({"event": g.instance.event, "violations": len(report), "budget": g.budget})
    atomic_write(ws.solution_path(g.instance.event), json_dumps(summary))
    LOG.info(
        f"{g.instance.event}: {solution.status} objective {solution.objective:.4f}, "
        f"{len(report)} violations"
    )
    return solution, report


def export_model(
    ws: Workspace,
    name: str,
    fmt: str,
    big_m: float | None = None,
    output: str | os.PathLike | None = None,
) -> Path:
    """Write the OPL (``.mod`` plus ``.dat``) or LP model of an event.

    Returns:
        Path: The model file.

    Raises:
        UnknownEvent: when the event is not in the catalog.
        GroundingError: when the event cannot be grounded on the loaded data.
    """
    g = ws.ground(name)
    if fmt == "opl":
        path = Path(output) if output else ws.export_dir() / f"{g.instance.event}.mod"
        atomic_write(path, emit_opl(g))
        atomic_write(path.with_suffix(".dat"), emit_opl_data(g))
    elif fmt == "milp":
        path = Path(output) if output else ws.export_dir() / f"{g.instance.event}.lp"
        atomic_write(path, emit_milp(g, big_m if big_m is not None else ws.config.big_m))
    else:
        raise MTSAError(f"unknown export format {fmt!r}", choices=("opl", "milp"))
    LOG.info(f"Exported {g.instance.event} to {path}")
    return path


def monitor_rule(ws: Workspace, name: str, store: DataStore | None = None) -> MonitoringRule:
    """Compile a monitored view against the stored parameter tables.

    Raises:
        UnknownView: when the view is not in the catalog.
    """
    view = ws.catalog.view(name)
    if view is None:
        raise UnknownView(f"no view named {name}", view=name)
    return compile_monitor(str(view.name), ws.catalog, ws.params(), (store or ws.store()).calendar)


def monitor_view(
    ws: Workspace, name: str, stream: Iterable[str] | None = None, log: bool = True
) -> list[Recommendation]:
    """Run a monitored view over a stream, or over the future input data.

    Recommendations are appended to ``logs/<view>.jsonl``.
    """
    store = ws.store()
    rule = monitor_rule(ws, name, store)
    path = ws.log_path(rule.view)
    with contextlib.ExitStack() as stack:
        sink = stack.enter_context(open(path, "a", encoding="utf-8", newline="\n")) if log else None
        if stream is not None:
            return list(follow(rule, stream, sink))
        series = store.get(rule.series)
        if series is None:
            raise MissingSeries(f"series {rule.series} is not loaded", series=rule.series)
        future = series.times >= 1
        records = (StreamRecord(int(t), float(v)) for t, v in zip(series.times[future], series.values[future]))
        return replay(rule, records, sink)


@dataclass
class StatementResult:
    index: int
    kind: str
    name: str
    status: str  # "ok" | "failed" | "skipped"
    elapsed: float = 0.0
    objective: float | None = None
    message: str | None = None
    error: MTSAError | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "name": self.name,
            "status": self.status,
            "elapsed": round(self.elapsed, 6),
            "objective": self.objective,
            "message": self.message,
        }


@dataclass
class RunReport:
    """Outcome of :py:func:`execute_script`, one entry per statement."""

    results: List[StatementResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.status == "ok" for r in self.results)

    @property
    def failed(self) -> StatementResult | None:
        return next((r for r in self.results if r.status == "failed"), None)

    def raise_for_status(self) -> None:
        """Raise the error of the failed statement, if any.

        Raises:
            StatementFailed: wrapping the statement's error and its index.
        """
        failed = self.failed
        if failed is not None and failed.error is not None:
            raise StatementFailed(failed.index, failed.error)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "statements": [r.to_dict() for r in self.results]}

    def render(self) -> str:
        lines = []
        for r in self.results:
            line = f"[{r.index}] {r.kind} {r.name}: {r.status}"
            if r.objective is not None:
                line += f" objective={r.objective:.4f}"
            if r.status != "skipped":
                line += f" ({r.elapsed * 1000:.1f} ms)"
            if r.message:
                line += f"\n    {r.message}"
            lines.append(line)
        return "\n".join(lines)


def _run_statement(
    ws: Workspace, stmt: Statement, config: SolverConfig, stream: Iterable[str] | None
) -> tuple[float | None, str | None]:
    if isinstance(stmt, (CreateTable, CreateView, CreateEvent)):
        ws.define(stmt)
        return None, None
    if isinstance(stmt, Execute):
        solution, report = solve_event(ws, str(stmt.event_name), config)
        message = f"{solution.status}, shed {solution.shed_total:g} kWh"
        if not report.ok:
            message += f", {len(report)} constraint violations"
        return solution.objective, message
    assert isinstance(stmt, Monitor)
    recommendations = monitor_view(ws, str(stmt.view_name), stream)
    fired = sum(r.indicator for r in recommendations)
    return None, f"{fired} of {len(recommendations)} intervals recommend load shedding"


def execute_script(
    ws: Workspace,
    script: str,
    config: SolverConfig | None = None,
    stream: Iterable[str] | None = None,
) -> RunReport:
    """Run a script statement by statement.

    A script that does not parse is rejected as a whole. Otherwise statements
    run in order; the first failure stops the run, leaving the catalog and
    stored tables as the previous statement left them, and later statements
    are reported as skipped.

    Args:
        ws (Workspace): The workspace.
        script (str): Script text.
        config (Optional[SolverConfig]): Overrides the workspace options.
        stream (Optional[Iterable[str]]): ``time,value`` lines for ``MONITOR``;
            the future part of the monitored input series is replayed when omitted.

    Returns:
        RunReport
    """
    config = config or ws.config
    report = RunReport()
    try:
        statements = parse_script(script)
    except DialectError as err:
        index = err.context.get("statement_index", 0)
        report.results.append(
            StatementResult(index, "script", "-", "failed", message=str(err), error=err)
        )
        return report
    with ws.lock():
        failed = False
        for index, stmt in enumerate(statements):
            result = StatementResult(index, statement_kind(stmt), statement_name(stmt), "skipped")
            report.results.append(result)
            if failed:
                continue
            started = time.perf_counter()
            LOG.info(f"Statement {index}: {result.kind} {result.name}")
            try:
                result.objective, result.message = _run_statement(ws, stmt, config, stream)
                result.status = "ok"
            except MTSAError as err:
                LOG.error(f"Statement {index} failed: {err}")
                result.status = "failed"
                result.message = str(err)
                result.error = err
                failed = True
                ws.catalog = ws._read_catalog()
            result.elapsed = time.perf_counter() - started
    return report
