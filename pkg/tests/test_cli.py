import csv
import json
import subprocess
import sys

import pytest

from duenilm.cli import main

SIMULATE = """
[simulate]
bundled_household = ukdale
synthetic = yes
synthetic_persons = 10
synthetic_days = 7
start = 2015-04-06
days = 6
seed = 1
out = data
"""

RUN = """
[run]
dataset = data
synthetic = yes
synthetic_persons = 10
synthetic_days = 7
train_days = 4
test_days = 2
seed = 2
out = reports
[engine]
max_iterations = 5
"""


def files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "simulate.ini").write_text(SIMULATE)
    (root / "run.ini").write_text(RUN)
    assert main(["simulate", "--config", str(root / "simulate.ini")]) == 0
    return root


def test_simulate_writes_dataset(workspace):
    data = workspace / "data"
    names = set(files(data))
    assert {"channels.csv", "household.ini", "activity_model.json", "aggregate.csv", "light.csv"} <= names
    with open(data / "light.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["timestamp", "power"] and len(rows) == 6 * 1440 + 1


def test_simulate_is_reproducible(workspace, tmp_path):
    assert main(["simulate", "--config", str(workspace / "simulate.ini"), "--out", str(tmp_path / "again")]) == 0
    assert files(tmp_path / "again") == files(workspace / "data")


def test_run_writes_reports(workspace, tmp_path):
    out = tmp_path / "reports"
    assert main(["run", "--config", str(workspace / "run.ini"), "--out", str(out)]) == 0
    assert set(files(out)) == {"metrics.csv", "energy_shares.csv", "summary.json",
                               "series_due.csv", "series_co.csv"}
    with open(out / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["algorithm"] for r in rows} == {"due", "co"}
    overall = [r for r in rows if r["category"] == "overall"]
    assert all(0 <= float(r["est_acc"]) <= 1 for r in overall)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 2


def test_run_timings_on_request(workspace, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(RUN.replace("[run]\n", "[run]\ntimings = yes\nalgorithms = co\n")
                   .replace("dataset = data", f"dataset = {workspace / 'data'}"))
    assert main(["run", "--config", str(cfg)]) == 0
    with open(tmp_path / "reports" / "timings.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["algorithm"], r["phase"]) for r in rows] == [("co", "train"), ("co", "test")]


def test_run_overrides_seed(workspace, tmp_path):
    assert main(["run", "--config", str(workspace / "run.ini"), "--out", str(tmp_path / "a"), "--seed", "7"]) == 0
    assert json.loads((tmp_path / "a" / "summary.json").read_text())["seed"] == 7


def test_inspect_model(workspace, tmp_path, capsys):
    cfg = tmp_path / "inspect.ini"
    cfg.write_text(f"[model]\nactivity_model = {workspace / 'data' / 'activity_model.json'}\n")
    assert main(["inspect-model", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out
    assert printed.splitlines()[0].startswith("stratum,")
    assert (tmp_path / "model_summary.csv").read_text() == printed



def test_inspect_model_seed_changes_synthetic_model(tmp_path, capsys):
    cfg = tmp_path / "inspect.ini"
    cfg.write_text("[model]\nbundled_household = ukdale\nsynthetic = yes\nsynthetic_persons = 5\n")
    outputs = []
    for seed in (1, 1, 2):
        assert main(["inspect-model", "--config", str(cfg), "--seed", str(seed)]) == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1] != outputs[2]

@pytest.mark.parametrize("body, code, kind", [
    ("[run]\ndataset = data\nbogus = 1\n", 2, "config-error"),
    ("[run]\n", 2, "config-error"),
    ("[run]\ndataset = nowhere\nsynthetic = yes\n", 2, "config-error"),
    ("[run]\ndataset = data\nsynthetic = yes\ntrain_days = 5\ntest_days = 5\n", 3, "data-error"),
    ("[run]\ndataset = data\nsynthetic = yes\n[engine]\ntolerance = 7\n", 2, "config-error"),
])
def test_error_exit_codes(workspace, body, code, kind, capsys):
    cfg = workspace / "bad.ini"
    cfg.write_text(body)
    assert main(["run", "--config", str(cfg)]) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"duenilm: {kind}: ")


def test_bad_channel_data(workspace, tmp_path, capsys):
    import shutil
    data = tmp_path / "data"
    shutil.copytree(workspace / "data", data)
    with open(data / "light.csv", "a") as fh:
        fh.write("oops,1\n")
    cfg = tmp_path / "run.ini"
    cfg.write_text(RUN)
    assert main(["run", "--config", str(cfg)]) == 3
    assert "light.csv" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "none.ini")]) == 2
    assert capsys.readouterr().err.startswith("duenilm: config-error:")


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "duenilm.cli", "simulate", "--config", str(tmp_path / "x.ini")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.count("\n") == 1
