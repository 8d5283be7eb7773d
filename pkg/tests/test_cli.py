from __future__ import annotations

import io
import json
import sys
from unittest.mock import patch

import pytest

from mtsa import cli
from mtsa.timeseries import TimeSeries
from tests.conftest import DEMAND, EVENT, MONITORED_VIEW, TINY_DEMAND, tiny_calendar


def run(*args: str) -> int:
    with patch.object(sys, "argv", ["mtsa", *args]):
        return cli.main()


@pytest.fixture
def workspace(tmp_path, capsys):
    """An initialized workspace with the TINY files loaded and the script run."""
    ws = str(tmp_path / "ws")
    calendar = tmp_path / "calendar.csv"
    calendar.write_text(tiny_calendar().to_csv())
    demand = tmp_path / "demand.csv"
    demand.write_text(TimeSeries.from_mapping(DEMAND, TINY_DEMAND).to_csv())
    assert run("init", "-w", ws) == 0
    assert run("load", str(calendar), "--as", "calendar", "-w", ws) == 0
    assert run("load", str(demand), "--as", DEMAND, "-w", ws) == 0
    assert run("run", f"{ws}/campus.mtsa", "-w", ws) == 0
    capsys.readouterr()
    return ws


def test_version(capsys):
    assert run("--version") == 0
    assert capsys.readouterr().out.startswith("mtsa ")


def test_usage_error(capsys):
    assert run() == 2
    assert "usage: mtsa" in capsys.readouterr().err


def test_unknown_solver(capsys, tmp_path):
    assert run("solve", EVENT, "--solver", "simplex", "-w", str(tmp_path)) == 2


def test_not_a_workspace(capsys, tmp_path):
    assert run("solve", EVENT, "-w", str(tmp_path)) == 1
    captured = capsys.readouterr()
    assert captured.err.startswith("WorkspaceError: not a workspace")
    assert captured.out == ""


def test_init(capsys, tmp_path):
    assert run("init", "-w", str(tmp_path / "new"), "--json") == 0
    assert json.loads(capsys.readouterr().out) == {"workspace": str(tmp_path / "new")}


def test_run_json(workspace, capsys):
    # GIVEN: a workspace with the script's definitions in its catalog
    # WHEN: the shipped script is run again with JSON output
    status = run("run", f"{workspace}/campus.mtsa", "-w", workspace, "--json")
    # THEN: every statement reports ok
    report = json.loads(capsys.readouterr().out)
    assert status == 0
    assert report["ok"] is True
    assert [s["kind"] for s in report["statements"]][-2:] == ["execute", "monitor"]


def test_run_failure(workspace, capsys, tmp_path):
    script = tmp_path / "bad.mtsa"
    script.write_text("EXECUTE Missing;\n")
    assert run("run", str(script), "-w", workspace) == 1
    captured = capsys.readouterr()
    assert "failed" in captured.out
    assert captured.err.startswith("StatementFailed: UnknownEvent")


def test_solve_with_budget(workspace, capsys):
    # the default horizon is two years, so half a kWh a year allows one kWh
    assert run("solve", EVENT, "--annual-bound", "0.5", "-w", workspace, "--json") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["bounds"] == pytest.approx([13.0, 11.7])
    assert payload["violations"] == 0


def test_solve_text(workspace, capsys):
    assert run("solve", EVENT, "--solver", "zero_budget", "-w", workspace) == 0
    out = capsys.readouterr().out
    assert out.startswith(f"{EVENT}: Optimal objective 216.0984")
    assert "period 2: peakDemandBound 12.6 payPeriodSupplyDemand 12.6" in out


def test_export(workspace, capsys, tmp_path):
    target = tmp_path / "model.lp"
    assert run("export", EVENT, "--format", "milp", "-o", str(target), "-w", workspace) == 0
    assert capsys.readouterr().out.strip() == str(target)
    assert target.read_text().strip().splitlines()[-1].strip().lower() == "end"


def test_export_bad_big_m(workspace, capsys):
    assert run("export", EVENT, "--format", "milp", "--big-m", "1", "-w", workspace) == 1
    assert capsys.readouterr().err.startswith("BadBigM")


def test_monitor(workspace, capsys, tmp_path):
    stream = tmp_path / "stream.csv"
    stream.write_text("time,value\n1,10\n2,14.5\n")
    assert run("monitor", MONITORED_VIEW, "--stream", str(stream), "-w", workspace) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("t=2 demand 14.5 bound 14: The Electric Power Demand")
    assert lines[-1] == "1 of 2 intervals recommend load shedding"


def test_monitor_stdin(workspace, capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("1,10\n2,20\n"))
    assert run("monitor", MONITORED_VIEW, "--stream", "-", "-w", workspace) == 0
    records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [r["indicator"] for r in records] == [0, 1]
