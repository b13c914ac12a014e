import csv
from importlib import resources

import pytest

from slipstep.cli import main

PUSH = str(resources.files("slipstep") / "scenarios" / "push.yaml")
SWITCH = str(resources.files("slipstep") / "scenarios" / "gait_switch.yaml")


def test_run_writes_outputs_and_refuses_overwrite(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", PUSH, "--out", str(out)]) == 0
    assert "converged" in capsys.readouterr().out
    first = (out / "samples.csv").read_bytes()
    assert main(["run", PUSH, "--out", str(out)]) == 2
    assert "--force" in capsys.readouterr().err
    assert main(["run", PUSH, "--out", str(out), "--force"]) == 0
    assert (out / "samples.csv").read_bytes() == first


def test_run_reports_controller_failure(tmp_path):
    assert main(["run", PUSH, "--set", "mu=0.15", "--out", str(tmp_path)]) == 1


@pytest.mark.parametrize("argv", [
    ["run", "missing.yaml", "--out", "x"],
    ["run", PUSH, "--set", "bogus=1", "--out", "x"],
    ["frobnicate"],
    ["regions", "--grid", "1", "--out", "r.csv"],
    ["sweep", SWITCH, "--parameter", "mu", "--values", "", "--out", "s.csv"],
    ["accept", "--only", "99"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2


def test_regions(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["regions", PUSH, "--T", "0.3", "--grid", "11", "--out", str(out)]) == 0
    assert next(csv.reader(out.open())) == ["region", "branch", "x", "xdot"]


def test_sweep_orders_transients_by_friction(tmp_path):
    out = tmp_path / "s.csv"
    argv = ["sweep", SWITCH, "--parameter", "mu", "--values", "0.21,0.4,1.5",
            "--workers", "2", "--out", str(out)]
    assert main(argv) == 0
    rows = list(csv.DictReader(out.open()))
    counts = [int(r["transient_steps"]) for r in rows]
    assert counts[0] > counts[1] > counts[2]


def test_accept_subset(capsys):
    assert main(["accept", "--only", "1,11"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line[:10] for line in lines] == ["[PASS]  1 ", "[PASS] 11 "]
