from __future__ import annotations

import json

import numpy as np
import pytest

from tempmode.cli import run
from tempmode.modes import load_mode
from tempmode.reconstruct import load_result

SIM = ["simulate", "--shape", "chirped", "--n", "1.1", "--nwf", "1000", "--nsamp", "100",
       "--seed", "7"]


def err_line(capsys):
    lines = capsys.readouterr().err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def test_happy_path(tmp_path):
    assert run(SIM + ["--out", str(tmp_path / "w.tmrw")]) == 0
    assert (tmp_path / "shape.json").exists()
    code = run(["reconstruct", "--in", str(tmp_path / "w.tmrw"), "--target",
                str(tmp_path / "shape.json"), "--out", str(tmp_path / "r.json")])
    assert code == 0
    d = json.loads((tmp_path / "r.json").read_text())
    assert set(d["candidates"]) == {"plus", "minus"}
    assert 0 < d["fidelity"]["best"] <= 1


def test_predict_example(capsys):
    assert run(["predict", "--nwf", "1e6", "--nmode", "100", "--n", "1.1"]) == 0
    d = json.loads(capsys.readouterr().out)
    lo, hi = d["complex_bounds"]
    assert round(lo, 7) == 1.736e-4 and round(hi, 6) == 9.091e-3


def test_predict_required_waveforms(capsys):
    assert run(["predict", "--nwf", "1e4", "--nmode", "200", "--n", "1",
                "--target-infidelity", "0.015"]) == 0
    assert json.loads(capsys.readouterr().out)["required_waveforms"] == 10000


def test_predict_zero_photons_is_valid_json(capsys):
    assert run(["predict", "--nwf", "1e4", "--nmode", "100", "--n", "0"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["mean_infidelity_real"] is None and d["complex_bounds"] is None


def test_vacuum_reconstruct_exit_4(tmp_path, capsys):
    assert run(["simulate", "--state", "vacuum", "--nwf", "2000", "--nsamp", "40", "--seed", "1",
                "--out", str(tmp_path / "v.tmrw")]) == 0
    code = run(["reconstruct", "--in", str(tmp_path / "v.tmrw"), "--out", str(tmp_path / "r.json")])
    assert code == 4
    e = err_line(capsys)
    assert e["exit_code"] == 4 and e["verdict"]["above_vacuum_count"] == 0
    assert not (tmp_path / "r.json").exists()


@pytest.mark.parametrize("argv", [
    SIM + ["--out", "w.tmrw", "--bogus", "1"],
    ["simulate", "--nwf", "10", "--nsamp", "10", "--out", "w.tmrw"],          # no seed
    SIM[:-2] + ["--seed", "-1", "--out", "w.tmrw"],
    ["simulate", "--nwf", "1.5", "--nsamp", "10", "--seed", "1", "--out", "w.tmrw"],
    ["predict", "--nwf", "1e4", "--nmode", "100"],
    ["frobnicate"],
    [],
])
def test_usage_errors(tmp_path, monkeypatch, capsys, argv):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 2
    assert err_line(capsys)["exit_code"] == 2
    assert list(tmp_path.iterdir()) == []


def test_abbreviated_flag_rejected(capsys):
    assert run(["predict", "--nw", "1e4", "--nmode", "100", "--n", "1"]) == 2


def test_format_error_exit_3(tmp_path, capsys):
    (tmp_path / "bad.tmrw").write_bytes(b"junk")
    assert run(["reconstruct", "--in", str(tmp_path / "bad.tmrw"), "--out", str(tmp_path / "r.json")]) == 3
    assert err_line(capsys)["error"] == "FormatError"


def test_domain_error_exit_2(capsys):
    assert run(["predict", "--nwf", "1e4", "--nmode", "100", "--n", "1",
                "--target-infidelity", "0"]) == 2


def test_cli_determinism_and_threads(tmp_path):
    outs = []
    for threads in ("1", "4"):
        d = tmp_path / threads
        d.mkdir()
        assert run(SIM + ["--nwf", "9000", "--out", str(d / "w.tmrw"), "--threads", threads]) == 0
        assert run(["reconstruct", "--in", str(d / "w.tmrw"), "--target", str(d / "shape.json"),
                    "--out", str(d / "r.json"), "--threads", threads]) == 0
        assert run(["report", "--kind", "polar_mode", "--in", str(d / "r.json"),
                    "--out", str(d / "p.svg")]) == 0
        outs.append([(d / n).read_bytes() for n in ("w.tmrw", "r.json", "p.svg", "p.csv")])
    assert outs[0] == outs[1]


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("TMR_THREADS", "2")
    assert run(SIM + ["--out", str(tmp_path / "w.tmrw")]) == 0


def test_spectrum_and_vacuum_count(tmp_path, capsys):
    assert run(["simulate", "--state", "vacuum", "--nwf", "20000", "--nsamp", "30", "--seed", "3",
                "--out", str(tmp_path / "v.tmrw")]) == 0
    assert run(["spectrum", "--in", str(tmp_path / "v.tmrw"), "--out", str(tmp_path / "s.json"),
                "--kernel-out", str(tmp_path / "k.tmrk"), "--vacuum"]) == 0
    est = json.loads(capsys.readouterr().out)
    assert 10 <= est["n_mode_eff"] <= 60
    assert run(["spectrum", "--kernel", str(tmp_path / "k.tmrk"), "--out", str(tmp_path / "s2.json")]) == 0
    a = json.loads((tmp_path / "s.json").read_text())
    b = json.loads((tmp_path / "s2.json").read_text())
    assert a["eigenvalues"] == b["eigenvalues"]
    assert run(["report", "--kind", "spectrum_histogram", "--in", str(tmp_path / "s.json"),
                "--out", str(tmp_path / "h.svg")]) == 0


def test_verify_simulated(tmp_path, capsys):
    args = ["--shape", "chirped", "--width", "6", "--chirp", "0.01", "--detuning", "0.1",
            "--n", "1", "--state", "single_photon"]
    assert run(["simulate", *args, "--nwf", "40000", "--nsamp", "60", "--seed", "5",
                "--out", str(tmp_path / "w.tmrw")]) == 0
    assert run(["reconstruct", "--in", str(tmp_path / "w.tmrw"), "--out", str(tmp_path / "r.json")]) == 0
    assert load_result(tmp_path / "r.json").verdict.case == "complex_or_two_mode"
    assert run(["verify", "--result", str(tmp_path / "r.json"), *args, "--nwf", "40000",
                "--seed", "6", "--out", str(tmp_path / "v.json")]) == 0
    v = json.loads((tmp_path / "v.json").read_text())
    assert v["case"] == "real_single_mode"


def test_verify_needs_seed(tmp_path, capsys):
    (tmp_path / "r.json").write_text("{}")
    assert run(["verify", "--result", str(tmp_path / "r.json"), "--nwf", "100"]) == 2


def test_sweep_and_report(tmp_path):
    plan = {"axis": "n_wf", "axis_values": [1000, 2000], "fixed": {"n_mode": 30, "n": 1.0},
            "trials_per_point": 8}
    (tmp_path / "plan.json").write_text(json.dumps(plan))
    assert run(["sweep", "--plan", str(tmp_path / "plan.json"), "--seed", "4",
                "--out", str(tmp_path / "s.csv"), "--threads", "1"]) == 0
    summary = json.loads((tmp_path / "s.summary.json").read_text())
    assert summary["applicable"] == 2
    assert run(["report", "--kind", "infidelity_vs_nwf", "--in", str(tmp_path / "s.csv"),
                "--out", str(tmp_path / "f.svg")]) == 0
    assert len((tmp_path / "f.csv").read_text().splitlines()) == 3


def test_mode_out_flag(tmp_path):
    assert run(SIM + ["--out", str(tmp_path / "w.csv"), "--mode-out", str(tmp_path / "m.json")]) == 0
    m = load_mode(tmp_path / "m.json")
    assert m.grid.n_samp == 100 and not m.is_real(1e-6)
    assert np.loadtxt(tmp_path / "w.csv", delimiter=",").shape == (1000, 100)
