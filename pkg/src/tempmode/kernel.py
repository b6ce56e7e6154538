"""Autocorrelation-kernel estimation and ordered eigendecomposition."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import ContaminationError, DimensionError, EigensolverError, FormatError
from .modes import TemporalMode, TimeGrid, carrier_split
from .simulate import SimulationConfig, WaveformBatch, synthesize_blocks
from .streams import BLOCK_SIZE, block_ranges, ordered_map, tree_sum


@dataclass(frozen=True, eq=False)
class Kernel:
    """Symmetric ``n_samp x n_samp`` second-moment matrix in vacuum units."""

    grid: TimeGrid
    matrix: np.ndarray
    n_wf_used: int = 0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (self.grid.n_samp, self.grid.n_samp):
            raise DimensionError(f"kernel must be {self.grid.n_samp} x {self.grid.n_samp}, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise FormatError("kernel has non-finite entries")
        if not np.array_equal(m, m.T):
            raise DimensionError("kernel matrix is not exactly symmetric")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_samp(self) -> int:
        return self.grid.n_samp


def _symmetrize(m: np.ndarray) -> np.ndarray:
    # (a + b) / 2 == (b + a) / 2 exactly, so the result is bitwise symmetric
    return 0.5 * (m + m.T)


def _gram(block: np.ndarray) -> np.ndarray:
    return block.T @ block


def _finish(total: np.ndarray, n_wf: int, sigma0_sq: float) -> np.ndarray:
    k = _symmetrize(total) / (n_wf * sigma0_sq)
    if not np.all(np.isfinite(k)):
        raise FormatError("kernel accumulation produced non-finite values")
    return k


def estimate_kernel(batch: WaveformBatch, threads: Optional[int] = None,
                    subtract_mean: bool = False) -> Kernel:
    """``K_ij = sum_w x_w(t_i) x_w(t_j) / (n_wf * sigma0^2)``.

    Rows are accumulated in blocks of :data:`~tempmode.streams.BLOCK_SIZE`
    and the partial sums combined by a fixed pairwise tree, so the result does
    not depend on ``threads``.  ``subtract_mean`` removes the per-sample mean
    first (off by default: phase-averaged data has no first moment).
    """
    if batch.n_wf < 2:
        raise DimensionError("kernel estimation needs at least two waveforms")
    data = batch.data
    if subtract_mean:
        data = data - data.mean(axis=0)
    parts = ordered_map(lambda item: _gram(data[item[1]:item[2]]),
                        block_ranges(batch.n_wf, BLOCK_SIZE), threads)
    k = _finish(tree_sum(parts), batch.n_wf, batch.sigma0_sq)
    return Kernel(batch.grid, k, batch.n_wf)


def simulate_kernel(config: SimulationConfig, threads: Optional[int] = None) -> Kernel:
    """Kernel of ``synthesize_batch(config)`` without materializing the batch.

    Bit-identical to ``estimate_kernel(synthesize_batch(config))``.
    """
    if config.n_wf < 2:
        raise DimensionError("kernel estimation needs at least two waveforms")
    parts = synthesize_blocks(config, fn=_gram, threads=threads)
    return Kernel(config.grid, _finish(tree_sum(parts), config.n_wf, 1.0), config.n_wf)


def analytic_kernel(mode: TemporalMode, n: float) -> Kernel:
    """Model kernel ``I + 2 n Re[f f^dag]`` for a single occupied mode."""
    f = mode.samples
    excess = np.outer(f.real, f.real) + np.outer(f.imag, f.imag)
    k = np.eye(mode.grid.n_samp) + 2.0 * n * _symmetrize(excess)
    return Kernel(mode.grid, _symmetrize(k))


def in_mode_photons(kernel: Kernel, mode: TemporalMode) -> float:
    """Photon number the kernel assigns to the carrier plane of ``mode``.

    ``(trace(P K) - rank P) / 2`` with ``P`` the projector on the real carriers
    of ``mode``; unbiased for the true photon number on simulated data.
    """
    _, _, u_r, u_i, _ = carrier_split(mode)
    vecs = [u_r] if u_i is None else [u_r, u_i]
    k = kernel.matrix
    return 0.5 * (sum(float(v @ k @ v) for v in vecs) - len(vecs))


# --------------------------------------------------------------------------
# eigendecomposition

@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    """Descending eigenvalues with orthonormal real eigenvectors (rows)."""

    grid: TimeGrid
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_wf: int = 0

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=float)
        vecs = np.array(self.eigenvectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape != (len(ev), self.grid.n_samp):
            raise DimensionError("eigenvectors must be (n_eig, n_samp)")
        if np.any(np.diff(ev) > 0):
            raise DimensionError("eigenvalues must be sorted in descending order")
        ev.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "eigenvectors", vecs)

    @property
    def photon_numbers(self) -> np.ndarray:
        """``n_i = (kappa_i - 1) / 2``."""
        return (self.eigenvalues - 1.0) / 2.0

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def mode(self, i: int) -> TemporalMode:
        return TemporalMode(self.grid, self.eigenvectors[i].astype(complex))

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(),
                "photon_numbers": self.photon_numbers.tolist(),
                "eigenvectors": self.eigenvectors.tolist(),
                "dt": self.grid.dt, "n_wf": self.n_wf}

    @classmethod
    def from_dict(cls, d: dict) -> "EigenSpectrum":
        try:
            vecs = np.asarray(d["eigenvectors"], dtype=float)
            return cls(TimeGrid(vecs.shape[1], float(d.get("dt", 1.0))),
                       np.asarray(d["eigenvalues"], dtype=float), vecs, int(d.get("n_wf", 0)))
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise FormatError(f"invalid spectrum JSON: {exc}") from exc


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; argmax picks the earliest index on ties
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigendecompose(kernel: Kernel) -> EigenSpectrum:
    """Full spectrum of ``kernel`` in descending order with a deterministic sign
    convention (each eigenvector's largest-magnitude entry is positive)."""
    try:
        w, v = scipy.linalg.eigh(kernel.matrix, driver="evd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"symmetric eigensolver failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise EigensolverError("eigensolver returned non-finite values")
    order = np.argsort(-w, kind="stable")
    v = _fix_signs(v[:, order])
    return EigenSpectrum(kernel.grid, w[order], v.T, kernel.n_wf_used)


@dataclass(frozen=True)
class ModeCountEstimate:
    estimate: float
    count_based: int
    max_deviation: float


def estimate_effective_mode_count(vacuum_spectrum: EigenSpectrum, n_wf: Optional[int] = None,
                                  contamination_z: float = 3.0) -> ModeCountEstimate:
    """Effective number of detected modes from a vacuum spectrum.

    The largest vacuum photon-number deviation scales as ``sqrt(N_mode / N_wf)``,
    so ``N_mode ~ N_wf * max|n_i|^2``.  The count of eigenvalues whose deviation
    exceeds half the maximum is returned alongside as a cross-check.
    """
    n_wf = vacuum_spectrum.n_wf if n_wf is None else int(n_wf)
    if n_wf < 2:
        raise DimensionError("need the number of waveforms behind the spectrum")
    dev = np.abs(vacuum_spectrum.photon_numbers)
    max_dev = float(dev.max())
    # N_mode never exceeds the sample count, which bounds the vacuum band
    band = math.sqrt(vacuum_spectrum.grid.n_samp / n_wf)
    if max_dev > contamination_z * band:
        raise ContaminationError(
            f"max |n_i| = {max_dev:.4g} exceeds {contamination_z} x vacuum band {band:.4g}; "
            "the input does not look like vacuum")
    count = int(np.sum(dev > 0.5 * max_dev))
    return ModeCountEstimate(n_wf * max_dev**2, count, max_dev)


# --------------------------------------------------------------------------
# file formats

TMRK_MAGIC = b"TMRK"
TMRK_VERSION = 1
_TMRK_HEADER = struct.Struct("<4sIId")


def write_kernel(kernel: Kernel, path, format: Optional[str] = None) -> None:
    fmt = format or ("csv" if str(path).lower().endswith(".csv") else "tmrk")
    if fmt == "tmrk":
        with open(path, "wb") as fh:
            fh.write(_TMRK_HEADER.pack(TMRK_MAGIC, TMRK_VERSION, kernel.n_samp, kernel.grid.dt))
            fh.write(kernel.matrix.astype("<f8").tobytes(order="C"))
    elif fmt == "csv":
        with open(path, "w") as fh:
            for row in kernel.matrix.tolist():
                fh.write(",".join(repr(v) for v in row) + "\n")
    else:
        raise FormatError(f"unknown kernel format {fmt!r}")


def read_kernel(path, format: Optional[str] = None, dt: float = 1.0) -> Kernel:
    fmt = format or ("csv" if str(path).lower().endswith(".csv") else "tmrk")
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if fmt == "tmrk":
        if len(raw) < _TMRK_HEADER.size:
            raise FormatError("truncated TMRK header")
        magic, version, n_samp, dt = _TMRK_HEADER.unpack_from(raw)
        if magic != TMRK_MAGIC or version != TMRK_VERSION:
            raise FormatError(f"not a TMRK v{TMRK_VERSION} file")
        payload = raw[_TMRK_HEADER.size:]
        if len(payload) != n_samp * n_samp * 8:
            raise FormatError("TMRK payload length does not match header")
        m = np.frombuffer(payload, dtype="<f8").reshape(n_samp, n_samp).astype(np.float64)
    elif fmt == "csv":
        try:
            m = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise FormatError(f"invalid kernel CSV: {exc}") from exc
    else:
        raise FormatError(f"unknown kernel format {fmt!r}")
    return Kernel(TimeGrid(m.shape[0], dt), m)


def save_spectrum(spectrum: EigenSpectrum, path) -> None:
    Path(path).write_text(json.dumps(spectrum.to_dict()) + "\n")


def load_spectrum(path) -> EigenSpectrum:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read spectrum {path}: {exc}") from exc
    return EigenSpectrum.from_dict(d)
