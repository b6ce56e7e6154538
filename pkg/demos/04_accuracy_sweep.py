"""Infidelity against the number of waveforms, compared with the model.

Runs a small reproducible sweep, prints the per-point verdicts and writes an
SVG plot with its CSV table next to this script.
"""

from __future__ import annotations

from pathlib import Path

from tempmode.report import ReportSpec, emit_report
from tempmode.sweep import SweepPlan, compare_to_model, run_sweep, write_rows

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

plan = SweepPlan("n_wf", (1_000, 3_000, 10_000, 30_000), {"n_mode": 60, "n": 1.0},
                 trials_per_point=16, base_seed=2024)
rows = run_sweep(plan, checkpoint=out / "sweep.csv")
write_rows(rows, out / "sweep.csv")

summary = compare_to_model(rows)
for c in summary["rows"]:
    print(c)
print("pass rate over applicable points:", summary["pass_rate"])

# %% figure
svg, table = emit_report(ReportSpec("infidelity_vs_nwf", str(out / "sweep.csv"),
                                    str(out / "infidelity.svg")))
print("wrote", svg, "and", table)
