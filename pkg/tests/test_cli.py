import csv
import subprocess
import sys

import numpy as np
import pytest

from opdiff import cli
from opdiff.analysis import StabilityRecord, StabilityReport
from opdiff.timegrid import TimeGrid

FAST = ["--h", "0.02", "--T", "0.05"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_files(tmp_path):
    out = tmp_path / "run"
    rc = cli.main(["run", *FAST, "--N", "20", "--snapshots", "0,0.025,0.05", "--out", str(out)])
    assert rc == 0
    for name in ("grid.csv", "solution.csv", "exact.csv", "error.csv", "stability.csv",
                 "meta.txt"):
        assert (out / name).is_file()
    sol = read_csv(out / "solution.csv")
    # headers carry the actual level times
    assert sol[0][:2] == ["x", "u_0"]
    assert [float(c[2:]) for c in sol[0][1:]] == pytest.approx([0.0, 0.025, 0.05], abs=1e-15)
    assert len(sol) == 1 + 49
    err = read_csv(out / "error.csv")
    assert err[0] == ["n", "t_n", "tau_n", "eps"]
    assert float(err[1][3]) <= 1e-12
    meta = (out / "meta.txt").read_text()
    assert "alpha = 0.01" in meta and "stability_verdict = pass" in meta
    assert len(TimeGrid.from_csv((out / "grid.csv").read_text()).steps) == 20


def test_run_is_reproducible(tmp_path):
    args = ["run", *FAST, "--N", "15", "--grid", "random", "--seed", "7"]
    cli.main([*args, "--out", str(tmp_path / "a")])
    cli.main([*args, "--out", str(tmp_path / "b")])
    for name in ("grid.csv", "solution.csv", "error.csv", "stability.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    strip = [ln for ln in (tmp_path / "a" / "meta.txt").read_text().splitlines()
             if not ln.startswith("out =")]
    assert strip == [ln for ln in (tmp_path / "b" / "meta.txt").read_text().splitlines()
                     if not ln.startswith("out =")]


def test_convergence_table(tmp_path):
    rc = cli.main(["convergence", *FAST, "--N", "10,20,40", "--out", str(tmp_path)])
    assert rc == 0
    rows = read_csv(tmp_path / "convergence.csv")
    assert rows[0] == ["N", "eps_T", "order"]
    assert [r[0] for r in rows[1:]] == ["10", "20", "40"]
    assert rows[1][2] == "" and float(rows[2][2]) > 0
    assert (tmp_path / "grids" / "grid_N40.csv").is_file()


def test_stability_summary(tmp_path):
    rc = cli.main(["stability", *FAST, "--N", "20", "--sigma", "0.5,1", "--grid", "random",
                   "--out", str(tmp_path)])
    assert rc == 0
    rows = read_csv(tmp_path / "stability_summary.csv")
    assert rows[0] == ["sigma", "scheme", "all_ok", "max_violation"]
    assert [r[2] for r in rows[1:]] == ["true", "true"]
    per = read_csv(tmp_path / "stability_sigma_0.5.csv")
    assert per[0] == ["n", "t_n", "monitor", "bound", "ok"]
    # homogeneous run: the cumulative bound never grows
    assert len({r[3] for r in per[1:]}) == 1


def test_stability_below_threshold_is_observed(tmp_path):
    rc = cli.main(["stability", *FAST, "--N", "20", "--sigma", "0.3", "--out", str(tmp_path)])
    assert rc == 0
    assert "modes = observed" in (tmp_path / "meta.txt").read_text()


def test_violation_exit_code(tmp_path, monkeypatch, capsys):
    def failing(traj, problem):
        rep = StabilityReport(traj.scheme, traj.sigma, "point", True)
        rep.records.append(StabilityRecord(1, 0.1, 2.0, 1.0, False, 0.5))
        return rep
    monkeypatch.setattr(cli, "check_estimate", failing)
    rc = cli.main(["run", *FAST, "--N", "5", "--out", str(tmp_path)])
    assert rc == 1
    assert "violated" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [
    ["--scheme", "three-level-uniform", "--grid", "random"],
    ["--scheme", "three-level-nonuniform", "--sigma", "1"],
    ["--alpha", "0"],
    ["--h", "0.3"],
    ["--grid", "random", "--q", "3"],
])
def test_bad_flags_exit_2(tmp_path, extra, capsys):
    assert cli.main(["run", *FAST, "--N", "5", *extra, "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_argparse_rejects_unknown_scheme():
    with pytest.raises(SystemExit) as info:
        cli.main(["run", "--scheme", "leapfrog"])
    assert info.value.code == 2


def test_grids_command(tmp_path, capsys):
    assert cli.main(["grids", "--grid", "random", "--N", "30", "--seed", "3",
                     "--out", str(tmp_path)]) == 0
    assert "max_adjacent_ratio" in capsys.readouterr().out
    g = TimeGrid.from_csv((tmp_path / "grid.csv").read_text())
    assert g.N == 30 and g.levels[-1] == 0.1


def test_three_level_run(tmp_path):
    rc = cli.main(["run", *FAST, "--N", "20", "--scheme", "three-level-uniform", "--sigma",
                   "0.25", "--out", str(tmp_path)])
    assert rc == 0
    assert read_csv(tmp_path / "stability.csv")[1][0] == "1"


def test_alpha_point_one_goes_negative(tmp_path):
    rc = cli.main(["run", "--alpha", "0.1", "--N", "50", "--snapshots", "0.01,0.05,0.1",
                   "--out", str(tmp_path)])
    assert rc == 0
    rows = read_csv(tmp_path / "solution.csv")
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    assert values.min() < 0.0


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "opdiff", "grids", "--N", "4",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
