"""Command-line interface."""

import json
import logging
import subprocess
import sys
import time

import pytest

from hpmc.analysis import read_records
from hpmc.cli import main

SMALL = ["--set", "experiment.n_targets=2", "--cycles", "1"]


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["--quiet", "run", "--out", str(out), *SMALL]) == 0
    return out


def test_run_outputs(run_dir):
    for name in ("samples.csv", "records.csv", "report.txt", "manifest.json"):
        assert (run_dir / name).is_file()
    m = json.loads((run_dir / "manifest.json").read_text())
    assert str(m["config"]["experiment.n_targets"]) == "2"
    assert len(read_records(run_dir / "records.csv")) == 4


def test_set_override_applied(run_dir):
    m = json.loads((run_dir / "manifest.json").read_text())
    assert str(m["config"]["experiment.cycles_per_target"]) == "1"


def test_analyze_reproduces_records(run_dir):
    assert main(["--quiet", "analyze", str(run_dir / "samples.csv")]) == 0
    a = read_records(run_dir / "records.csv")
    b = read_records(run_dir / "analysis" / "records.csv")
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert x.movement_id == y.movement_id and x.complete == y.complete
        for k in ("r_planned", "r_executed", "rmse_pos", "rmse_vel", "settle_time", "final_error"):
            assert getattr(y, k) == pytest.approx(getattr(x, k), rel=1e-9, abs=1e-12)
    for name in ("fig3_r_values", "fig4_rmse", "fig5_ellipses", "fig5_paths", "fig6_overlay"):
        assert (run_dir / "analysis" / f"{name}.csv").is_file()


def test_missing_config_exits_2(tmp_path, caplog):
    missing = tmp_path / "nowhere.cfg"
    assert main(["run", "--config", str(missing), "--out", str(tmp_path)]) == 2
    assert "nowhere.cfg" in caplog.text


def test_bad_override_exits_2(tmp_path):
    assert main(["--quiet", "run", "--out", str(tmp_path), "--set", "planner.bogus=1"]) == 2


def test_header_only_samples(tmp_path, run_dir, caplog):
    p = tmp_path / "samples.csv"
    p.write_text((run_dir / "samples.csv").read_text().splitlines()[0] + "\n")
    assert main(["analyze", str(p), "--set", "experiment.n_targets=2"]) == 1
    assert "no movements" in caplog.text


def test_truncated_final_movement(tmp_path, run_dir, caplog):
    lines = (run_dir / "samples.csv").read_text().splitlines()
    p = tmp_path / "samples.csv"
    p.write_text("\n".join(lines[:-300]) + "\n")
    (tmp_path / "manifest.json").write_text((run_dir / "manifest.json").read_text())
    with caplog.at_level(logging.WARNING):
        assert main(["--quiet", "analyze", str(p)]) == 0
    recs = read_records(tmp_path / "analysis" / "records.csv")
    assert [r.complete for r in recs] == [True, True, True, False]
    assert "movement 3" in caplog.text
    # excluded from the aggregates: fig3 counts only complete movements
    rows = (tmp_path / "analysis" / "fig3_r_values.csv").read_text().splitlines()[1:]
    assert [int(r.split(",")[1]) for r in rows] == [2, 1]


def test_selftest_exit_zero_and_fast():
    t0 = time.time()
    proc = subprocess.run([sys.executable, "-m", "hpmc", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert time.time() - t0 < 60
    assert proc.stdout.count("PASS") >= 5
