#!/usr/bin/env python
"""Command line front end for a workspace.

Run ``mtsa --help`` for the subcommands. Every subcommand exits 0 on success,
1 when the pipeline reports a diagnostic and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from mtsa import __version__
from mtsa.config import SOLVERS
from mtsa.exceptions import MTSAError
from mtsa.monitor import follow
from mtsa.utils import json_dumps
from mtsa.workspace import (
    Workspace,
    execute_script,
    export_model,
    monitor_rule,
    monitor_view,
    solve_event,
)

LOG = logging.getLogger("mtsa")


def _workspace_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("Workspace options")
    group.add_argument(
        "-w",
        "--workspace",
        default=".",
        help="The workspace directory. (Default: current directory)",
    )
    group.add_argument(
        "--json", action="store_true", help="Print machine readable JSON output."
    )
    group.add_argument(
        "-v", "--verbose", action="store_true", help="Log debug messages to stderr."
    )


def _solver_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("Solver options (override mtsa.ini)")
    group.add_argument("--solver", choices=SOLVERS, help="The peak demand bound solver.")
    group.add_argument(
        "--annual-bound", type=float, help="Maximal energy shed per year (kWh)."
    )
    group.add_argument("--workers", type=int, help="Threads for the grid oracle.")


def process_command_line(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="mtsa",
        description="Learn peak demand bounds and monitor demand streams.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    init = sub.add_parser("init", help="Create a workspace.")
    init.add_argument("--synthetic", action="store_true", help="Add synthetic demand data.")
    init.add_argument("--seed", type=int, help="Seed of the synthetic data. (Default: 2012)")

    load = sub.add_parser("load", help="Load a calendar, series or parameter CSV.")
    load.add_argument("csv", help="The CSV file.")
    load.add_argument(
        "--as", dest="table", required=True, help="Target table; `calendar` for the calendar."
    )

    run = sub.add_parser("run", help="Execute a script.")
    run.add_argument("script", help="The script file; `-` reads stdin.")
    run.add_argument("--stream", help="time,value file for MONITOR statements.")
    _solver_options(run)

    solve = sub.add_parser("solve", help="Learn the parameters of an event.")
    solve.add_argument("event", help="The learning event.")
    _solver_options(solve)

    export = sub.add_parser("export", help="Write the optimization model of an event.")
    export.add_argument("event", help="The learning event.")
    export.add_argument("--format", choices=("opl", "milp"), required=True)
    export.add_argument("--big-m", type=float, help="Big-M of the MILP. (Default: max demand)")
    export.add_argument("-o", "--output", help="The model file. (Default: exports/<event>.mod|.lp)")

    monitor = sub.add_parser("monitor", help="Monitor a view over a demand stream.")
    monitor.add_argument("view", help="The monitored view.")
    monitor.add_argument(
        "--stream", required=True, help="time,value file; `-` follows stdin."
    )

    for p in (init, load, run, solve, export, monitor):
        _workspace_options(p)
    return parser.parse_args(argv)


def _emit(args: argparse.Namespace, payload: dict, text: str) -> None:
    print(json_dumps(payload) if args.json else text, end="" if args.json else "\n")


def _config(ws: Workspace, args: argparse.Namespace):
    return ws.config.replace(
        solver=getattr(args, "solver", None),
        annual_bound=getattr(args, "annual_bound", None),
        workers=getattr(args, "workers", None),
    )


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def run_command(args: argparse.Namespace) -> int:
    if args.command == "init":
        ws = Workspace.init(args.workspace, synthetic=args.synthetic, seed=args.seed)
        _emit(args, {"workspace": str(ws.root)}, f"Initialized {ws.root}")
        return 0

    ws = Workspace(args.workspace, logging=True)
    LOG.setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    if args.command == "load":
        with ws.lock():
            path = ws.load_csv(_read(args.csv), args.table)
        _emit(args, {"table": args.table, "path": str(path)}, f"Loaded {args.table} into {path}")
        return 0

    if args.command == "run":
        stream = None
        if args.stream:
            stream = _read(args.stream).splitlines()
        report = execute_script(ws, _read(args.script), _config(ws, args), stream)
        _emit(args, report.to_dict(), report.render())
        report.raise_for_status()
        return 0

    if args.command == "solve":
        with ws.lock():
            solution, check = solve_event(ws, args.event, _config(ws, args))
        payload = solution.to_dict()
        payload["violations"] = len(check)
        text = f"{args.event}: {solution.status} objective {solution.objective:.4f}"
        for p, b, s in zip(solution.periods, solution.bounds, solution.ppsd):
            text += f"\n  period {p}: peakDemandBound {b:g} payPeriodSupplyDemand {s:g}"
        for v in check:
            text += f"\n  violation {v.constraint_id} t={v.t} p={v.p} slack={v.slack:g}"
        _emit(args, payload, text)
        return 0 if check.ok else 1

    if args.command == "export":
        with ws.lock():
            path = export_model(ws, args.event, args.format, args.big_m, args.output)
        _emit(args, {"event": args.event, "path": str(path)}, str(path))
        return 0

    # monitor
    with ws.lock():
        if args.stream == "-":
            rule = monitor_rule(ws, args.view)
            with open(ws.log_path(rule.view), "a", encoding="utf-8", newline="\n") as log:
                for rec in follow(rule, sys.stdin, log):
                    print(rec.to_json(), flush=True)
            return 0
        recommendations = monitor_view(ws, args.view, _read(args.stream).splitlines())
    fired = sum(r.indicator for r in recommendations)
    if args.json:
        for rec in recommendations:
            print(rec.to_json())
    else:
        for rec in recommendations:
            if rec.indicator:
                print(f"t={rec.time} demand {rec.value:g} bound {rec.threshold:g}: {rec.action}")
        print(f"{fired} of {len(recommendations)} intervals recommend load shedding")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = process_command_line(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return run_command(args)
    except MTSAError as e:
        print(e, file=sys.stderr)
        return 1
    except OSError as e:
        print(e, file=sys.stderr)
        return 1


if __name__ == "__main__":
    status = main()
    sys.exit(status)
