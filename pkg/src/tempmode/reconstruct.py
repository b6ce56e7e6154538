"""Mode reconstruction from an eigen-spectrum, purity diagnostics and checks.

A single occupied complex mode ``f = |f| exp(i phi)`` puts two eigenvalues
``kappa_i = 2 n_i + 1`` above the vacuum level; the mode is rebuilt as
``(sqrt(n1) f1 + i sqrt(n2) f2) / sqrt(n1 + n2)``.  Data taken at a single
local-oscillator frequency cannot tell ``f`` from its complex conjugate, so
both candidates are always reported.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import FormatError, StatisticalFloorError, UnsupportedMultimodeError, UsageError
from .kernel import EigenSpectrum, Kernel, eigendecompose, estimate_kernel, simulate_kernel
from .modes import TemporalMode, fidelity, mode_from_dict, mode_to_dict, normalize
from .simulate import SimulationConfig, WaveformBatch
from .streams import derive_seed

REAL_SINGLE = "real_single_mode"
COMPLEX_OR_TWO = "complex_or_two_mode"
MULTIMODE = "multimode"
UNVERIFIED = "unverified single-mode assumption"


@dataclass(frozen=True)
class PurityVerdict:
    """Outcome of counting eigenvalues above the vacuum band.

    ``band`` is the statistical vacuum deviation ``sqrt(N_mode / N_wf)`` and
    ``threshold = z * band``.  A count of 0 is reported as ``real_single_mode``
    with ``vacuum_like`` set.
    """

    case: str
    above_vacuum_count: int
    threshold: float
    band: float = 0.0
    compensation: Optional[str] = None

    @property
    def vacuum_like(self) -> bool:
        return self.above_vacuum_count == 0

    def to_dict(self) -> dict:
        d = {"case": self.case, "above_vacuum_count": self.above_vacuum_count,
             "threshold": self.threshold, "band": self.band, "vacuum_like": self.vacuum_like}
        if self.compensation is not None:
            d["compensation"] = self.compensation
        return d


def _case_for(count: int) -> str:
    if count <= 1:
        return REAL_SINGLE
    if count == 2:
        return COMPLEX_OR_TWO
    return MULTIMODE


def vacuum_band(n_mode_eff: float, n_wf: int) -> float:
    return math.sqrt(n_mode_eff / n_wf)


def classify_spectrum(spectrum: EigenSpectrum, n_wf: Optional[int] = None,
                      n_mode_eff: Optional[float] = None, z: float = 3.0) -> PurityVerdict:
    """Count photon numbers above ``z * sqrt(n_mode_eff / n_wf)``.

    ``n_wf`` defaults to the count recorded on the spectrum and ``n_mode_eff``
    to the number of samples.
    """
    n_wf = spectrum.n_wf if n_wf is None else int(n_wf)
    if n_wf < 1:
        raise UsageError("classification needs the number of waveforms")
    n_mode_eff = spectrum.grid.n_samp if n_mode_eff is None else float(n_mode_eff)
    band = vacuum_band(n_mode_eff, n_wf)
    threshold = z * band
    count = int(np.sum(spectrum.photon_numbers > threshold))
    return PurityVerdict(_case_for(count), count, threshold, band)


@dataclass(frozen=True)
class FidelityRecord:
    best: float
    plus: float
    minus: float
    rotation: float = 0.0

    def to_dict(self) -> dict:
        return {"best": self.best, "plus": self.plus, "minus": self.minus, "rotation": self.rotation}


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    candidate_plus: TemporalMode
    candidate_minus: TemporalMode
    n1: float
    n2: float
    above_vacuum_count: int
    threshold_used: float
    verdict: Optional[PurityVerdict] = None
    fidelity_vs_target: Optional[FidelityRecord] = None
    eigenvectors: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_total(self) -> float:
        return self.n1 + self.n2

    def candidates(self) -> tuple:
        return self.candidate_plus, self.candidate_minus

    def to_dict(self) -> dict:
        d = {"n1": self.n1, "n2": self.n2, "n_total": self.n_total,
             "candidates": {"plus": mode_to_dict(self.candidate_plus),
                            "minus": mode_to_dict(self.candidate_minus)},
             "verdict": None if self.verdict is None else self.verdict.case,
             "above_vacuum_count": self.above_vacuum_count,
             "threshold": self.threshold_used}
        if self.fidelity_vs_target is not None:
            d["fidelity"] = self.fidelity_vs_target.to_dict()
        d["provenance"] = dict(self.metadata)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReconstructionResult":
        try:
            plus = mode_from_dict(d["candidates"]["plus"])
            minus = mode_from_dict(d["candidates"]["minus"])
            fid = d.get("fidelity")
            prov = d.get("provenance", {})
            verdict = None
            if d.get("verdict") is not None:
                verdict = PurityVerdict(d["verdict"], int(d["above_vacuum_count"]), float(d["threshold"]),
                                        float(prov.get("band", 0.0)))
            return cls(plus, minus, float(d["n1"]), float(d["n2"]), int(d["above_vacuum_count"]),
                       float(d["threshold"]), verdict,
                       None if fid is None else FidelityRecord(**fid), None, prov)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"invalid result JSON: {exc}") from exc


def combine(v1: np.ndarray, n1: float, v2: Optional[np.ndarray], n2: float, grid) -> tuple:
    """Both conjugate candidates ``(sqrt(n1) v1 +/- i sqrt(n2) v2) / sqrt(n1 + n2)``."""
    if v2 is None or n2 == 0:
        m = normalize(np.asarray(v1, dtype=complex), grid)
        return m, m
    a = math.sqrt(n1) * np.asarray(v1)
    b = math.sqrt(n2) * np.asarray(v2)
    return normalize(a + 1j * b, grid), normalize(a - 1j * b, grid)


def _fid_pair(target: TemporalMode, plus: TemporalMode, minus: TemporalMode) -> tuple:
    return fidelity(target, plus), fidelity(target, minus)


def conjugate_max_fidelity(target: TemporalMode, v1, n1: float, v2=None, n2: float = 0.0,
                           degenerate: bool = False) -> FidelityRecord:
    """Fidelity of both conjugate candidates against ``target``.

    With ``degenerate`` set the two eigenvectors are only meaningful as a
    plane, and the rotation of ``(v1, v2)`` within it that maximizes the
    fidelity is used.
    """
    grid = target.grid
    plus, minus = combine(v1, n1, v2, n2, grid)
    fp, fm = _fid_pair(target, plus, minus)
    if not degenerate or v2 is None or n2 <= 0:
        return FidelityRecord(max(fp, fm), fp, fm, 0.0)

    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)

    def rotated(psi):
        c, s = math.cos(psi), math.sin(psi)
        return combine(c * v1 + s * v2, n1, -s * v1 + c * v2, n2, grid)

    def neg_best(psi):
        return -max(_fid_pair(target, *rotated(psi)))

    # coarse scan over one period (the candidate pair repeats after pi), then refine
    grid_psi = np.linspace(0.0, math.pi, 73)
    vals = [neg_best(p) for p in grid_psi]
    i = int(np.argmin(vals))
    step = grid_psi[1] - grid_psi[0]
    res = minimize_scalar(neg_best, bounds=(grid_psi[i] - step, grid_psi[i] + step),
                          method="bounded", options={"xatol": 1e-10})
    psi = float(res.x) if res.fun <= vals[i] else float(grid_psi[i])
    fp, fm = _fid_pair(target, *rotated(psi))
    if max(fp, fm) < max(_fid_pair(target, plus, minus)):
        fp, fm = _fid_pair(target, plus, minus)
        psi = 0.0
    return FidelityRecord(max(fp, fm), fp, fm, psi)


def reconstruct_mode(spectrum: EigenSpectrum, verdict: PurityVerdict,
                     target: Optional[TemporalMode] = None) -> ReconstructionResult:
    """Rebuild the mode from the top one or two eigenpairs.

    Raises :class:`UnsupportedMultimodeError` for a multimode verdict and
    :class:`StatisticalFloorError` when nothing rises above the vacuum band or a
    used photon number is negative.
    """
    if verdict.case == MULTIMODE:
        raise UnsupportedMultimodeError(
            f"{verdict.above_vacuum_count} eigenvalues above the vacuum band; "
            "reconstruction of more than two modes is not supported", verdict)
    if verdict.vacuum_like:
        raise StatisticalFloorError(
            f"no eigenvalue above the vacuum band (threshold n > {verdict.threshold:.3g}); "
            "increase the number of waveforms", verdict)
    n = spectrum.photon_numbers
    used = 1 if verdict.case == REAL_SINGLE else 2
    if np.any(n[:used] < 0):
        raise StatisticalFloorError(
            "negative photon number among the used eigenmodes; increase the number of waveforms",
            verdict)
    v1 = spectrum.eigenvectors[0]
    n1 = float(n[0])
    if used == 1:
        v2, n2 = None, 0.0
    else:
        v2, n2 = spectrum.eigenvectors[1], float(n[1])
    plus, minus = combine(v1, n1, v2, n2, spectrum.grid)
    degenerate = used == 2 and abs(n1 - n2) <= verdict.band
    fid = None
    if target is not None:
        fid = conjugate_max_fidelity(target, v1, n1, v2, n2, degenerate)
    meta = {"band": verdict.band, "degenerate": degenerate}
    if verdict.case == COMPLEX_OR_TWO:
        meta["assumption"] = UNVERIFIED
    vecs = spectrum.eigenvectors[:used].copy()
    return ReconstructionResult(plus, minus, n1, n2, verdict.above_vacuum_count, verdict.threshold,
                                verdict, fid, vecs, meta)


def reconstruct(source: Union[WaveformBatch, Kernel, EigenSpectrum], target=None,
                n_mode_eff: Optional[float] = None, z: float = 3.0,
                threads: Optional[int] = None, n_wf: Optional[int] = None) -> ReconstructionResult:
    """Kernel, spectrum, classification and reconstruction in one call.

    ``n_wf`` overrides the waveform count carried by the source (needed for
    model kernels, which carry none).
    """
    if isinstance(source, WaveformBatch):
        source = estimate_kernel(source, threads=threads)
    spectrum = eigendecompose(source) if isinstance(source, Kernel) else source
    verdict = classify_spectrum(spectrum, n_wf=n_wf, n_mode_eff=n_mode_eff, z=z)
    return reconstruct_mode(spectrum, verdict, target)


def verify_single_mode(source: Union[SimulationConfig, WaveformBatch, tuple],
                       result: ReconstructionResult, n_mode_eff: Optional[float] = None,
                       z: float = 3.0, threads: Optional[int] = None) -> PurityVerdict:
    """Repeat the measurement with the local oscillator phase-compensated by the
    reconstructed phase and classify the new spectrum.

    ``source`` is either a :class:`SimulationConfig` (the measurement is re-run
    with every state mode multiplied by ``exp(-i phi(t))`` and a fresh seed) or
    one or two recorded batches taken with the compensation applied.  Because
    the sign of the phase is unknown, the compensation is tried with the phase
    of ``candidate_plus`` first and of ``candidate_minus`` second; a pure single
    mode shows a single eigenvalue above the band for one of them.
    """
    attempts = []
    if isinstance(source, SimulationConfig):
        for label, cand in (("plus", result.candidate_plus), ("minus", result.candidate_minus)):
            cfg = source.with_state(source.state.compensated(cand.phase),
                                    seed=derive_seed(source.seed, 1, len(attempts)))
            attempts.append((label, lambda cfg=cfg: simulate_kernel(cfg, threads)))
    elif isinstance(source, WaveformBatch):
        attempts.append(("recorded", lambda: estimate_kernel(source, threads)))
    elif isinstance(source, tuple) and all(isinstance(b, WaveformBatch) for b in source):
        for label, b in zip(("plus", "minus"), source):
            attempts.append((label, lambda b=b: estimate_kernel(b, threads)))
    else:
        raise UsageError("verification needs a simulation config or a compensated recorded batch")

    verdict = None
    for label, make_kernel in attempts:
        spectrum = eigendecompose(make_kernel())
        v = classify_spectrum(spectrum, n_mode_eff=n_mode_eff, z=z)
        verdict = PurityVerdict(v.case, v.above_vacuum_count, v.threshold, v.band, label)
        if v.case == REAL_SINGLE:
            break
    return verdict


def save_result(result: ReconstructionResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict()) + "\n")


def load_result(path) -> ReconstructionResult:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read result {path}: {exc}") from exc
    return ReconstructionResult.from_dict(d)
