"""Telling a pure complex mode from an incoherent two-mode mixture.

Both show two eigenvalues above the vacuum band. Repeating the measurement
with the local oscillator phase-compensated by the reconstructed phase
collapses a pure mode to one eigenvalue; a mixture keeps two.
"""

from __future__ import annotations

from tempmode.kernel import simulate_kernel
from tempmode.modes import ShapeSpec, TimeGrid, make_shape
from tempmode.reconstruct import reconstruct, verify_single_mode
from tempmode.simulate import SimulationConfig, StateSpec

grid = TimeGrid(100)
pure = StateSpec.single_photon(make_shape(
    ShapeSpec("chirped_gaussian", width=10.0, chirp_rate=0.01, detuning=0.1), grid))
h0 = make_shape(ShapeSpec("hermite_gauss", order=0, width=10.0), grid)
h1 = make_shape(ShapeSpec("hermite_gauss", order=1, width=10.0), grid)
mixture = StateSpec.mixture([StateSpec.single_photon(h0), StateSpec.single_photon(h1)], [0.5, 0.5])

for label, state in (("pure chirped photon", pure), ("50/50 mixture", mixture)):
    cfg = SimulationConfig(state, grid, 100_000, seed=3)
    first = reconstruct(simulate_kernel(cfg))
    check = verify_single_mode(cfg, first)
    print(f"{label}: first pass {first.verdict.case} ({first.above_vacuum_count} above band),"
          f" after compensation {check.case} ({check.above_vacuum_count} above band)")
