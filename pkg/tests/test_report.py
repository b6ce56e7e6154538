from __future__ import annotations

import csv
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from tempmode.errors import FormatError
from tempmode.kernel import eigendecompose, save_spectrum, simulate_kernel
from tempmode.modes import ShapeSpec, TimeGrid, make_shape, save_mode
from tempmode.reconstruct import reconstruct, save_result
from tempmode.report import ReportSpec, emit_report
from tempmode.simulate import SimulationConfig, StateSpec
from tempmode.sweep import SweepPlan, run_sweep, write_rows

SVG = "{http://www.w3.org/2000/svg}"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("report")
    g = TimeGrid(80)
    f = make_shape(ShapeSpec("chirped_gaussian", width=8.0, chirp_rate=0.01), g)
    save_mode(f, d / "shape.json")
    k = simulate_kernel(SimulationConfig(StateSpec.coherent(f, 1.5), g, 40000, 1))
    save_result(reconstruct(k, target=f), d / "result.json")
    vac = eigendecompose(simulate_kernel(SimulationConfig(StateSpec.vacuum(), g, 40000, 2)))
    save_spectrum(vac, d / "vacuum.json")
    plan = SweepPlan("n_wf", (1000, 3000), {"n_mode": 30, "n": 1.0}, trials_per_point=8)
    write_rows(run_sweep(plan, threads=1), d / "sweep.csv")
    return d


def test_spectrum_histogram_vacuum_inside_band(files):
    svg, table = emit_report(ReportSpec("spectrum_histogram", str(files / "vacuum.json"),
                                        str(files / "spec.svg")))
    rows = read_csv(table)
    assert len(rows) == 80
    for r in rows:
        assert float(r["band_lower"]) <= float(r["photon_number"]) <= float(r["band_upper"])
    assert float(rows[0]["band_upper"]) == pytest.approx(3 * np.sqrt(80 / 40000))
    root = ET.parse(svg).getroot()
    assert root.tag == f"{SVG}svg"


def test_polar_mode_rows_and_curve(files):
    svg, table = emit_report(ReportSpec("polar_mode", str(files / "result.json"),
                                        str(files / "polar.svg"), target=str(files / "shape.json")))
    rows = read_csv(table)
    assert len(rows) == 80
    root = ET.parse(svg).getroot()
    lines = root.findall(f"{SVG}polyline")
    pts = lines[0].get("points").split()
    assert len(pts) == 80
    # smooth: consecutive points of the reconstructed curve move by small steps
    xy = np.array([[float(v) for v in p.split(",")] for p in pts])
    assert np.max(np.linalg.norm(np.diff(xy, axis=0), axis=1)) < 60


def test_eigenfunctions_overlay(files):
    svg, table = emit_report(ReportSpec("eigenfunctions_overlay", str(files / "result.json"),
                                        str(files / "eig.svg"), target=str(files / "shape.json")))
    rows = read_csv(table)
    assert len(rows) == 80
    assert all(r["re_target"] != "nan" for r in rows)
    assert len(ET.parse(svg).getroot().findall(f"{SVG}polyline")) == 4


def test_infidelity_vs_nwf_pass_through(files):
    from tempmode.sweep import read_rows
    sweep_rows = read_rows(files / "sweep.csv")
    svg, table = emit_report(ReportSpec("infidelity_vs_nwf", str(files / "sweep.csv"),
                                        str(files / "inf.svg")))
    rows = read_csv(table)
    assert len(rows) == len(sweep_rows)
    for r, s in zip(rows, sweep_rows):
        assert float(r["band_lower"]) == s.predicted.complex_bounds[0]
        assert float(r["band_upper"]) == s.predicted.complex_bounds[1]
        assert float(r["mean_infidelity"]) == s.mean_infidelity
    root = ET.parse(svg).getroot()
    assert len(root.findall(f"{SVG}circle")) == len(sweep_rows)
    assert len(root.findall(f"{SVG}polygon")) == 1


def test_report_deterministic(files):
    a = emit_report(ReportSpec("polar_mode", str(files / "result.json"), str(files / "a.svg")))
    b = emit_report(ReportSpec("polar_mode", str(files / "result.json"), str(files / "b.svg")))
    assert open(a[0]).read() == open(b[0]).read()
    assert open(a[1]).read() == open(b[1]).read()


def test_svg_self_contained(files):
    svg, _ = emit_report(ReportSpec("spectrum_histogram", str(files / "vacuum.json"),
                                    str(files / "s2.svg")))
    text = open(svg).read()
    assert not re.search(r"href|<script|<image", text)


@pytest.mark.parametrize("kind, source", [
    ("polar_mode", "vacuum.json"),
    ("spectrum_histogram", "result.json"),
    ("infidelity_vs_nwf", "result.json"),
    ("eigenfunctions_overlay", "sweep.csv"),
])
def test_kind_input_mismatch(files, kind, source):
    with pytest.raises(FormatError):
        emit_report(ReportSpec(kind, str(files / source), str(files / "x.svg")))


def test_unknown_kind():
    with pytest.raises(FormatError):
        ReportSpec("pie_chart", "a", "b")
