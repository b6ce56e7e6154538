"""Monte-Carlo sweeps of the reconstruction accuracy.

A sweep scans one of ``n_wf``, ``n_mode`` or ``n`` with the other two fixed,
runs independent end-to-end trials at every point (synthesize, kernel,
eigendecomposition, reconstruction) and aggregates the infidelity and the
photon-number deviation next to the closed-form predictions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import accuracy
from .errors import FormatError, UsageError
from .kernel import eigendecompose, in_mode_photons, simulate_kernel
from .modes import ShapeSpec, TimeGrid, fidelity, make_shape
from .reconstruct import conjugate_max_fidelity, vacuum_band
from .simulate import SimulationConfig, StateSpec
from .streams import derive_seed, ordered_map

AXES = ("n_wf", "n_mode", "n")
RECON_MODES = ("real_assumed", "complex_full")


@dataclass(frozen=True)
class SweepPlan:
    axis: str
    axis_values: tuple
    fixed: dict
    trials_per_point: int = 16
    state_kind: str = "single_photon"
    mode_shape: ShapeSpec = field(default_factory=lambda: ShapeSpec("gaussian"))
    reconstruction_mode: str = "real_assumed"
    base_seed: int = 0
    n_samp: Optional[int] = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise UsageError(f"axis must be one of {AXES}")
        vals = tuple(float(v) for v in self.axis_values)
        if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
            raise UsageError("axis values must be strictly increasing")
        object.__setattr__(self, "axis_values", vals)
        missing = set(AXES) - {self.axis} - set(self.fixed)
        if missing:
            raise UsageError(f"fixed parameters missing: {sorted(missing)}")
        if self.trials_per_point < 8:
            raise UsageError("trials_per_point must be >= 8")
        if self.reconstruction_mode not in RECON_MODES:
            raise UsageError(f"reconstruction_mode must be one of {RECON_MODES}")
        if self.state_kind not in ("vacuum", "single_photon", "coherent"):
            raise UsageError(f"unsupported state kind {self.state_kind!r}")
        for p in self.points():
            if self.state_kind == "vacuum" and p["n"] != 0:
                raise UsageError("vacuum sweeps need n = 0")
            if self.state_kind != "vacuum" and not p["n"] > 0:
                raise UsageError("non-vacuum sweeps need n > 0")
            if self.state_kind == "single_photon" and p["n"] > 1:
                raise UsageError("single_photon sweeps need n <= 1 (n is the efficiency)")
            if p["n_wf"] < 2 or p["n_mode"] < 1:
                raise UsageError("n_wf must be >= 2 and n_mode >= 1")

    def points(self) -> list:
        pts = []
        for v in self.axis_values:
            p = {k: float(self.fixed[k]) for k in AXES if k != self.axis}
            p[self.axis] = v
            p["n_wf"] = int(round(p["n_wf"]))
            p["n_mode"] = int(round(p["n_mode"]))
            pts.append(p)
        return pts

    def to_dict(self) -> dict:
        d = asdict(self)
        d["axis_values"] = list(self.axis_values)
        d["mode_shape"] = self.mode_shape.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        d = dict(d)
        try:
            if "mode_shape" in d:
                d["mode_shape"] = ShapeSpec.from_dict(d["mode_shape"])
            d["axis_values"] = tuple(d["axis_values"])
            return cls(**d)
        except (TypeError, KeyError) as exc:
            raise FormatError(f"invalid sweep plan: {exc}") from exc


def load_plan(path) -> SweepPlan:
    try:
        return SweepPlan.from_dict(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read sweep plan {path}: {exc}") from exc


@dataclass(frozen=True)
class TrialOutcome:
    infidelity: float
    dn: float
    n_meas: float
    failed: bool


def run_trial(plan: SweepPlan, point: dict, seed: int) -> TrialOutcome:
    """One synthesize / kernel / eigen / reconstruct pass at ``point``.

    The photon-number deviation is measured against the photon number the
    trial's own kernel holds in the true mode's carrier plane.  Its expectation
    equals the nominal ``n``, so the mean deviation is unchanged while the
    shot-to-shot spread of the state's photon statistics cancels out.  For
    vacuum the deviation is the largest ``|n_i|``.
    """
    n_mode, n_wf, n = point["n_mode"], point["n_wf"], point["n"]
    grid = TimeGrid(plan.n_samp or n_mode)
    target = make_shape(plan.mode_shape, grid)
    if plan.state_kind == "vacuum":
        state = StateSpec.vacuum()
    elif plan.state_kind == "single_photon":
        state = StateSpec.single_photon(target, n)
    else:
        state = StateSpec.coherent(target, n)
    cfg = SimulationConfig(state, grid, n_wf, seed, n_mode=min(n_mode, grid.n_samp))
    kernel = simulate_kernel(cfg, threads=1)
    spectrum = eigendecompose(kernel)
    nn = spectrum.photon_numbers
    if plan.state_kind == "vacuum":
        return TrialOutcome(math.nan, float(np.max(np.abs(nn))), float(nn[0]), False)

    n_ref = in_mode_photons(kernel, target)
    v = spectrum.eigenvectors
    if plan.reconstruction_mode == "real_assumed":
        n_meas = float(nn[0])
        if n_meas <= 0:
            return TrialOutcome(1.0, n_meas - n_ref, n_meas, True)
        f = fidelity(target, spectrum.mode(0))
    else:
        n1, n2 = float(nn[0]), float(nn[1])
        n_meas = n1 + n2
        if n1 <= 0 or n2 < 0:
            return TrialOutcome(1.0, n_meas - n_ref, n_meas, True)
        degenerate = abs(n1 - n2) <= vacuum_band(n_mode, n_wf)
        f = conjugate_max_fidelity(target, v[0], n1, v[1], n2, degenerate).best
    return TrialOutcome(1.0 - f, n_meas - n_ref, n_meas, False)


@dataclass(frozen=True)
class SweepRow:
    axis: str
    n_wf: int
    n_mode: int
    n: float
    state_kind: str
    reconstruction_mode: str
    trials: int
    failures: int
    mean_infidelity: float
    std_infidelity: float
    mean_dn: float
    std_dn: float
    mean_n_meas: float
    predicted: accuracy.AccuracyPrediction

    @property
    def point(self) -> tuple:
        return self.n_wf, self.n_mode, self.n


PRED_COLUMNS = ("pred_mean_infidelity_real", "pred_std_infidelity_real", "pred_vacuum_dn",
                "pred_mean_dn", "pred_complex_lower", "pred_complex_upper", "pred_regime_ratio",
                "pred_regime_ok", "pred_regime_tier", "pred_extrapolated")
ROW_COLUMNS = ("axis", "n_wf", "n_mode", "n", "state_kind", "reconstruction_mode", "trials",
               "failures", "mean_infidelity", "std_infidelity", "mean_dn", "std_dn",
               "mean_n_meas") + PRED_COLUMNS


def _aggregate(plan: SweepPlan, point: dict, outcomes: list) -> SweepRow:
    inf = np.array([o.infidelity for o in outcomes])
    dn = np.array([o.dn for o in outcomes])
    nm = np.array([o.n_meas for o in outcomes])
    pred = accuracy.predict(accuracy.AccuracyInputs(point["n_wf"], point["n_mode"], point["n"]))
    return SweepRow(plan.axis, point["n_wf"], point["n_mode"], point["n"], plan.state_kind,
                    plan.reconstruction_mode, len(outcomes), sum(o.failed for o in outcomes),
                    float(np.mean(inf)), float(np.std(inf, ddof=1)),
                    float(np.mean(dn)), float(np.std(dn, ddof=1)), float(np.mean(nm)), pred)


def _row_to_record(row: SweepRow) -> list:
    p = row.predicted
    vals = [row.axis, row.n_wf, row.n_mode, row.n, row.state_kind, row.reconstruction_mode,
            row.trials, row.failures, row.mean_infidelity, row.std_infidelity, row.mean_dn,
            row.std_dn, row.mean_n_meas, p.mean_infidelity_real, p.std_infidelity_real,
            p.vacuum_dn, p.mean_dn, p.complex_bounds[0], p.complex_bounds[1], p.regime_ratio,
            p.regime_ok, p.regime_tier, p.extrapolated]
    return [repr(v) if isinstance(v, float) else str(v) for v in vals]


def _row_from_record(rec: dict) -> SweepRow:
    try:
        f = {k: float(rec[k]) for k in ("n", "mean_infidelity", "std_infidelity", "mean_dn",
                                         "std_dn", "mean_n_meas")}
        pred = accuracy.AccuracyPrediction(
            float(rec["pred_mean_infidelity_real"]), float(rec["pred_std_infidelity_real"]),
            float(rec["pred_vacuum_dn"]), float(rec["pred_mean_dn"]),
            (float(rec["pred_complex_lower"]), float(rec["pred_complex_upper"])),
            rec["pred_regime_ok"] == "True", float(rec["pred_regime_ratio"]),
            rec["pred_regime_tier"], rec["pred_extrapolated"] == "True")
        return SweepRow(rec["axis"], int(rec["n_wf"]), int(rec["n_mode"]), f["n"], rec["state_kind"],
                        rec["reconstruction_mode"], int(rec["trials"]), int(rec["failures"]),
                        f["mean_infidelity"], f["std_infidelity"], f["mean_dn"], f["std_dn"],
                        f["mean_n_meas"], pred)
    except (KeyError, ValueError) as exc:
        raise FormatError(f"invalid sweep CSV row: {exc}") from exc


def read_rows(path) -> list:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        if tuple(reader.fieldnames) != ROW_COLUMNS:
            raise FormatError(f"{path} is not a sweep CSV (unexpected header)")
        return [_row_from_record(r) for r in reader]


def write_rows(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in rows:
            w.writerow(_row_to_record(r))


def run_sweep(plan: SweepPlan, checkpoint=None, threads: Optional[int] = None,
              on_row: Optional[Callable] = None) -> list:
    """Run every point of ``plan`` and return one :class:`SweepRow` per point.

    Trial ``j`` at point ``i`` uses the seed derived from
    ``(base_seed, i, j)``.  When ``checkpoint`` names a CSV file, each completed
    row is appended to it and rows already present are reused, so an
    interrupted sweep resumes after its last complete row.
    """
    points = plan.points()
    done = read_rows(checkpoint) if checkpoint is not None else []
    for row, p in zip(done, points):
        if row.point != (p["n_wf"], p["n_mode"], p["n"]):
            raise FormatError("checkpoint rows do not match the sweep plan")
    if len(done) > len(points):
        raise FormatError("checkpoint has more rows than the sweep plan")
    rows = list(done)
    fh = None
    if checkpoint is not None:
        new = not Path(checkpoint).exists() or not done
        fh = open(checkpoint, "w" if new else "a", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(ROW_COLUMNS)
            fh.flush()
    try:
        for i in range(len(done), len(points)):
            p = points[i]
            seeds = [derive_seed(plan.base_seed, i, j) for j in range(plan.trials_per_point)]
            outcomes = ordered_map(lambda s: run_trial(plan, p, s), seeds, threads)
            row = _aggregate(plan, p, outcomes)
            rows.append(row)
            if fh is not None:
                writer.writerow(_row_to_record(row))
                fh.flush()
            if on_row is not None:
                on_row(row)
    finally:
        if fh is not None:
            fh.close()
    return rows


# --------------------------------------------------------------------------
# model comparison

PASS, FAIL, NOT_APPLICABLE = "PASS", "FAIL", "NOT-APPLICABLE"


@dataclass(frozen=True)
class Comparison:
    n_wf: int
    n_mode: int
    n: float
    verdict: str
    ratio_infidelity: float
    ratio_dn: float
    within_band: bool

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in asdict(self).items()}


def compare_row(row: SweepRow) -> Comparison:
    """Observed-to-predicted ratios and a PASS / FAIL / NOT-APPLICABLE verdict.

    * vacuum rows: the largest ``|n_i|`` against ``sqrt(n_mode / n_wf)``;
    * ``real_assumed``: infidelity ratio and photon-number-bias ratio in
      ``[1/2, 2]`` and infidelity within ``mu +/- 2 sigma (1 + 2/sqrt(trials))``;
    * ``complex_full``: infidelity inside the complex band widened by 3 on
      each side (ratio reported against the upper edge).

    Rows with ``sqrt(n_mode / n_wf) >= n`` are in the breakdown regime.
    """
    p = row.predicted
    nan = math.nan
    if row.n == 0:
        r = row.mean_dn / p.vacuum_dn
        ok = 0.5 <= r <= 2.0
        return Comparison(row.n_wf, row.n_mode, row.n, PASS if ok else FAIL, nan, r, ok)
    if p.regime_ratio >= 1.0:
        return Comparison(row.n_wf, row.n_mode, row.n, NOT_APPLICABLE, nan, nan, False)
    if row.reconstruction_mode == "real_assumed":
        r_f = row.mean_infidelity / p.mean_infidelity_real
        r_n = row.mean_dn / p.mean_dn
        slack = 2 * p.std_infidelity_real * (1 + 2 / math.sqrt(row.trials))
        within = abs(row.mean_infidelity - p.mean_infidelity_real) <= slack
        ok = 0.5 <= r_f <= 2.0 and 0.5 <= r_n <= 2.0 and within
        return Comparison(row.n_wf, row.n_mode, row.n, PASS if ok else FAIL, r_f, r_n, within)
    lower, upper = p.complex_bounds
    within = lower / 3 <= row.mean_infidelity <= 3 * upper
    return Comparison(row.n_wf, row.n_mode, row.n, PASS if within else FAIL,
                      row.mean_infidelity / upper, nan, within)


def compare_to_model(rows) -> dict:
    """Per-row comparisons plus the pass rate over the applicable rows."""
    table = [compare_row(r) for r in rows]
    applicable = [c for c in table if c.verdict != NOT_APPLICABLE]
    passed = sum(c.verdict == PASS for c in applicable)
    return {"rows": table,
            "applicable": len(applicable),
            "passed": passed,
            "pass_rate": passed / len(applicable) if applicable else math.nan}


def summary_to_json(summary: dict) -> str:
    out = {"rows": [c.to_dict() for c in summary["rows"]],
           "applicable": summary["applicable"], "passed": summary["passed"],
           "pass_rate": None if math.isnan(summary["pass_rate"]) else summary["pass_rate"]}
    return json.dumps(out, indent=2) + "\n"
