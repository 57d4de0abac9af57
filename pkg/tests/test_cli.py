import csv
import json

import numpy as np
import pytest

from polysideband import cli
from polysideband.drive import PERIOD
from polysideband.propagate import IntegrationError

from conftest import random_spec


def _run(tmp_path, *args, name="out"):
    out = tmp_path / name
    return cli.run([*args, "--out", str(out)]), out


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_simulate_starts_in_g1(tmp_path):
    status, out = _run(tmp_path, "simulate", "--grid", "20", "--set", "cycles=0.25")
    assert status == 0
    rows = _rows(out / "trace.csv")
    assert float(rows[0]["p_g1"]) == 1.0 and float(rows[0]["t"]) == 0.0


def test_manifest_lists_every_file_and_config_is_versioned(tmp_path):
    status, out = _run(tmp_path, "timing-scan", "--set", "q_max=3")
    assert status == 0
    listed = {a["path"] for a in _manifest(out)["artifacts"]}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    assert "timing.png" in listed
    config = json.loads((out / "config.json").read_text())
    assert config["schema"] == 1 and config["options"]["q_max"] == 3


def test_no_plots_flag(tmp_path):
    status, out = _run(tmp_path, "timing-scan", "--set", "q_max=2", "--no-plots")
    assert status == 0
    assert not list(out.glob("*.png"))


def test_rerun_is_byte_identical(tmp_path):
    args = ("simulate", "--grid", "10", "--set", "cycles=0.1")
    _, a = _run(tmp_path, *args, name="a")
    _, b = _run(tmp_path, *args, name="b")
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


def test_verify_magnus_on_random_spec(tmp_path, rng):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"schema": 1, **random_spec(rng, 6).to_dict()}))
    status, out = _run(tmp_path, "verify-magnus", "--spec", str(spec_path))
    assert status == 0
    report = json.loads((out / "verify_magnus.json").read_text())
    assert len(report["coefficients"]) == 19
    assert all(row["rel_err"] < 1e-8 for row in report["coefficients"].values())


def test_coeffs_and_evaluate_reports(tmp_path):
    status, out = _run(tmp_path, "coeffs", "--set", "delta=0.3")
    assert status == 0
    report = json.loads((out / "coeffs.json").read_text())
    assert report["alpha"]["alpha1^(0)"] == [-0.075, 0.0]  # half of -delta/2, the rest is the h.c.
    assert len(report["c"]) == 8
    status, out = _run(tmp_path, "evaluate", "--set", "cycle=false", name="ev")
    assert status == 0
    assert json.loads((out / "functionals.json").read_text())["state_infidelity"] > 0


@pytest.mark.parametrize("argv", [
    ["simulate", "--set", "colour=blue"],
    ["simulate", "--set", "novalue"],
    ["simulate", "--set", "initial=x1"],
    ["optimize", "--set", "tones=4"],
    ["frobnicate"],
    [],
    ["simulate", "--grid", "many"],
])
def test_usage_errors_exit_one(tmp_path, argv, capsys):
    assert cli.run(argv + ["--out", str(tmp_path / "u")] if argv else argv) == 1
    assert "usage error" in capsys.readouterr().err


def test_unknown_key_is_named(tmp_path, capsys):
    cli.run(["optimize", "--set", "tones=4", "--out", str(tmp_path)])
    assert "'tones'" in capsys.readouterr().err


def test_missing_spec_file(tmp_path):
    assert cli.run(["coeffs", "--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


def test_infeasible_optimization_exits_two(tmp_path):
    status, out = _run(tmp_path, "optimize", "--set", "n=0", "--set", "restarts=0",
                       "--set", "delta_lo=0.15", "--set", "delta_hi=0.25", "--set", "refine_iters=4")
    assert status == 2
    assert _manifest(out)["status"] == 2
    assert not json.loads((out / "result.json").read_text())["feasible"]


def test_integration_failure_exits_three(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise IntegrationError("integration failed: step size too small", 1.0)

    monkeypatch.setattr(cli, "simulate", boom)
    status, _ = _run(tmp_path, "simulate")
    assert status == 3


def test_fig3_window_only(tmp_path):
    status, out = _run(tmp_path, "fig3", "--grid", "40", "--no-plots", "--set", "restarts=0",
                       "--set", "delta_lo=0.23", "--set", "delta_hi=0.25", "--set", "refine_iters=3")
    assert status == 0
    t = np.array([float(r["t"]) for r in _rows(out / "fig3.csv")])
    assert t.min() == pytest.approx(7.8 * PERIOD) and t.max() == pytest.approx(8.2 * PERIOD)


def test_fig5_series(tmp_path):
    status, out = _run(tmp_path, "fig5", "--grid", "10", "--set", "cycles=0.5")
    assert status == 0
    header = list(_rows(out / "fig5.csv")[0])
    for label in ("g1", "e0"):
        for series in ("exact", "zeroth", "first", "second"):
            assert f"P_{label}_{series}" in header
    assert "fig5.png" in {a["path"] for a in _manifest(out)["artifacts"]}


def test_sweep_row_at_six_tones(tmp_path):
    status, out = _run(tmp_path, "sweep-n", "--set", "n_min=6", "--set", "n_max=6", "--no-plots")
    assert status == 0
    rows = _rows(out / "sweep.csv")
    assert list(rows[0]) == ["n", "R_cycle", "R_theory", "I_mono", "I_poly", "delta_opt", "feasible"]
    assert rows[0]["n"] == "6" and 1.3 <= float(rows[0]["R_cycle"]) <= 2.1
