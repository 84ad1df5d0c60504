import csv
import json
from pathlib import Path

import numpy as np
import pytest

from enskog import cli, dynamics
from enskog.config import parse_config
from enskog.runner import SERIES_COLUMNS, SNAPSHOT_COLUMNS, run

TINY = Path(__file__).with_name("tiny.toml")


def _sim(tmp_path, *extra):
    return cli.main(["simulate", str(TINY), "--output-dir", str(tmp_path), "--quiet", *extra])


def test_simulate_outputs(tmp_path):
    assert _sim(tmp_path) == cli.EXIT_OK
    with open(tmp_path / "timeseries.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == SERIES_COLUMNS
    assert [float(r["t"]) for r in rows] == sorted(float(r["t"]) for r in rows)
    assert len(rows) == 5
    snaps = sorted((tmp_path / "snapshots").glob("*.csv"))
    assert len(snaps) == 3
    with open(snaps[-1]) as fh:
        assert next(csv.reader(fh)) == SNAPSHOT_COLUMNS
    man = json.loads((tmp_path / "manifest.json").read_text())
    for key in ("config_hash", "version", "seeds", "wall_clock_s", "verdicts"):
        assert key in man
    assert man["config_hash"] == parse_config(TINY).digest()
    assert set(man["verdicts"].values()) <= {"PASS", "INFO"}
    gp = (tmp_path / "plot_F.gp").read_text()
    assert "timeseries.csv" in gp and "using 1:7" in gp


def test_zero_step_run():
    cfg = parse_config(TINY, ["integrator.steps=0"])
    res = run(cfg, progress=False)
    assert len(res.series) == 1
    assert res.series[0]["t"] == 0.0
    assert np.isnan(res.series[0]["dF_dt"]) or res.series[0]["dF_dt"] == 0.0


def test_repeat_is_bit_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _sim(a) == 0 and _sim(b) == 0
    assert (a / "timeseries.csv").read_bytes() == (b / "timeseries.csv").read_bytes()
    for snap in (a / "snapshots").glob("*.csv"):
        assert snap.read_bytes() == (b / "snapshots" / snap.name).read_bytes()
    assert np.array_equal(np.load(a / "final_state.npy"), np.load(b / "final_state.npy"))


def test_seed_flag_changes_run(tmp_path):
    assert _sim(tmp_path / "a") == 0
    assert _sim(tmp_path / "b", "--seed", "99") == 0
    man = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert man["seeds"]["integrator"] == 99
    assert not np.array_equal(np.load(tmp_path / "a" / "final_state.npy"),
                              np.load(tmp_path / "b" / "final_state.npy"))


def test_verdict_failure_exit(tmp_path):
    # a dense unity gas at the CFL step: dt * collision rate far above the guard
    assert _sim(tmp_path, "--override", "initial.density=2.0") == cli.EXIT_VERDICT
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["verdicts"]["collision_stability"] == "FAIL"


def test_config_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[velocity]\nn_per_axis = 9\n[nope]\n")
    assert cli.main(["simulate", str(bad), "--output-dir", str(tmp_path)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "n_per_axis" in err and "nope" in err
    assert cli.main(["scenario", "relax-boltzmann", "--override", "geometry.n_cells=1",
                     "--output-dir", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["verify", "fluxes", "--resolution", "0"]) == cli.EXIT_CONFIG


def test_numerical_abort_exit(tmp_path, monkeypatch):
    def blow_up(self, state):
        raise dynamics.NumericalAbort("non-finite distribution", state)
    monkeypatch.setattr(dynamics.Stepper, "step", blow_up)
    assert _sim(tmp_path) == cli.EXIT_ABORT


def test_verify_writes_report(tmp_path, capsys):
    assert cli.main(["verify", "boundary", "--output-dir", str(tmp_path)]) == cli.EXIT_OK
    rep = json.loads((tmp_path / "verify_boundary.json").read_text())
    assert rep["checks"] and all(c["passed"] for c in rep["checks"])
    out = capsys.readouterr().out
    assert out.count("PASS") == len(rep["checks"])


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["scenario", "not-a-scenario"])
