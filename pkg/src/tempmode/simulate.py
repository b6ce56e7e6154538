"""Synthetic homodyne waveform batches.

Each waveform is ``x(t_k) = sum_j x_j f_j(t_k)`` over an orthonormal real basis
``{f_j}`` that contains the carriers of the occupied mode; all other basis modes
hold vacuum.  Quadratures are in vacuum units (variance 1 for vacuum) with the
convention ``x_theta = a exp(-i theta) + a^dag exp(i theta)``.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import signal

from .errors import DimensionError, FormatError, UsageError
from .modes import (TemporalMode, TimeGrid, extend_basis, normalize,
                    orthonormal_completion)
from .streams import BLOCK_SIZE, block_generator, block_ranges, check_seed, ordered_map

SIGMA0_SQ = 1.0
STATE_KINDS = ("vacuum", "single_photon", "coherent", "mixture")


# --------------------------------------------------------------------------
# samplers

def sample_vacuum(rng: np.random.Generator, size=None):
    """Vacuum quadrature, ``Normal(0, 1)``."""
    return rng.standard_normal(size)


def sample_single_photon(rng: np.random.Generator, size=None):
    """Single-photon quadrature with density ``x^2 exp(-x^2/2) / sqrt(2 pi)``.

    ``|x|`` is chi-distributed with three degrees of freedom; the sign is an
    independent fair coin.
    """
    mag = np.sqrt(rng.chisquare(3, size))
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * mag


def sample_lossy_single_photon(rng: np.random.Generator, eta: float, size=None):
    """Quadrature of ``eta |1><1| + (1 - eta) |0><0|``."""
    _check_eta(eta)
    photon = sample_single_photon(rng, size)
    vac = sample_vacuum(rng, size)
    return np.where(rng.random(size) < eta, photon, vac)


def _check_eta(eta):
    if not 0.0 <= eta <= 1.0:
        raise UsageError(f"efficiency must lie in [0, 1], got {eta}")


def sample_complex_photon_pair(rng: np.random.Generator, t_amp: float, r_amp: float,
                               eta: float, size=None):
    """Joint draw of the real- and imaginary-carrier quadratures of a lossy
    single photon in ``t f_r + i r f_i``.

    The joint density is ``eta (t^2 P1(x_r) P0(x_i) + r^2 P0(x_r) P1(x_i))
    + (1 - eta) P0(x_r) P0(x_i)``; the interference term between the two
    one-photon branches integrates out for the ``i``-phased superposition
    under phase averaging, so the law is a three-branch mixture: photon in the
    real carrier (probability ``eta t^2``), in the imaginary carrier
    (``eta r^2``), or vacuum.
    """
    if abs(t_amp**2 + r_amp**2 - 1.0) > 1e-9 or t_amp < 0 or r_amp < 0:
        raise UsageError(f"carrier amplitudes must satisfy t^2 + r^2 = 1, got ({t_amp}, {r_amp})")
    _check_eta(eta)
    u = rng.random(size)
    p_one = sample_single_photon(rng, size)
    vac_r = sample_vacuum(rng, size)
    vac_i = sample_vacuum(rng, size)
    in_r = u < eta * t_amp**2
    in_i = (u >= eta * t_amp**2) & (u < eta)
    x_r = np.where(in_r, p_one, vac_r)
    x_i = np.where(in_i, p_one, vac_i)
    return x_r, x_i


def sample_coherent_mode_amplitudes(rng: np.random.Generator, alpha: complex,
                                    basis_overlaps: Sequence[complex], theta, size=None):
    """Per-mode quadratures of a coherent state at local-oscillator phase ``theta``.

    ``basis_overlaps[j]`` is ``<f_j, f>``; mode ``j`` then holds amplitude
    ``alpha_j = alpha * <f_j, f>`` and reads ``Normal(2 Re(alpha_j e^{-i theta}), 1)``.
    ``theta`` may be an array with one phase per draw.
    """
    alpha_j = alpha * np.asarray(basis_overlaps, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    if size is None:
        size = theta.shape if theta.ndim else ()
    size = (size,) if np.isscalar(size) else tuple(size)
    mean = 2.0 * (np.multiply.outer(np.exp(-1j * theta), alpha_j)).real
    return rng.standard_normal(size + alpha_j.shape) + mean


# --------------------------------------------------------------------------
# configuration types

@dataclass(frozen=True, eq=False)
class StateSpec:
    """State occupying a temporal mode.

    ``mean_photons`` is the photon number after losses: for ``single_photon``
    it is the detection efficiency ``eta``, for ``coherent`` it is ``|alpha|^2``.
    ``mixture`` is a statistical mixture of the (non-mixture) ``components``
    with probabilities ``weights``.
    """

    kind: str
    mean_photons: float = 0.0
    mode: Optional[TemporalMode] = None
    components: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise UsageError(f"unknown state kind {self.kind!r}")
        if not (self.mean_photons >= 0 and math.isfinite(self.mean_photons)):
            raise UsageError(f"mean photon number must be >= 0, got {self.mean_photons}")
        if self.kind == "single_photon" and self.mean_photons > 1:
            raise UsageError("single_photon mean_photons is the efficiency and must be <= 1")
        if self.kind in ("single_photon", "coherent") and self.mode is None:
            raise UsageError(f"{self.kind} state needs a mode")
        if self.kind == "mixture":
            if not self.components or len(self.components) != len(self.weights):
                raise UsageError("mixture needs matching components and weights")
            if any(c.kind == "mixture" for c in self.components):
                raise UsageError("nested mixtures are not supported")
            if min(self.weights) < 0 or abs(sum(self.weights) - 1.0) > 1e-12:
                raise UsageError("mixture weights must be nonnegative and sum to 1")
            object.__setattr__(self, "mean_photons",
                               float(sum(w * c.mean_photons for w, c in zip(self.weights, self.components))))

    @classmethod
    def vacuum(cls) -> "StateSpec":
        return cls("vacuum")

    @classmethod
    def single_photon(cls, mode: TemporalMode, eta: float = 1.0) -> "StateSpec":
        return cls("single_photon", float(eta), mode)

    @classmethod
    def coherent(cls, mode: TemporalMode, n: float) -> "StateSpec":
        return cls("coherent", float(n), mode)

    @classmethod
    def mixture(cls, components, weights) -> "StateSpec":
        return cls("mixture", 0.0, None, tuple(components), tuple(float(w) for w in weights))

    def modes(self) -> list:
        if self.kind == "mixture":
            return [m for c in self.components for m in c.modes()]
        return [] if self.mode is None or self.kind == "vacuum" else [self.mode]

    def compensated(self, phase: np.ndarray) -> "StateSpec":
        """Same state measured with an extra local-oscillator phase profile:
        every mode ``f(t)`` becomes ``f(t) exp(-i phase(t))``."""
        if self.kind == "mixture":
            return StateSpec.mixture([c.compensated(phase) for c in self.components], self.weights)
        if self.mode is None or self.kind == "vacuum":
            return self
        return StateSpec(self.kind, self.mean_photons, self.mode.with_phase(-np.asarray(phase)))

    def describe(self) -> dict:
        d = {"kind": self.kind, "mean_photons": self.mean_photons}
        if self.kind == "mixture":
            d["components"] = [c.describe() for c in self.components]
            d["weights"] = list(self.weights)
        return d


@dataclass(frozen=True)
class FilterSpec:
    """Linear-phase FIR high-/low-pass applied on a guard-extended grid.

    Cutoffs are in inverse time units of the grid.  The synthesis window is
    extended by ``guard`` samples on each side before filtering and truncated
    afterwards; ``guard`` defaults to (and must be at least) three filter
    lengths.
    """

    highpass: Optional[float] = None
    lowpass: Optional[float] = None
    numtaps: int = 101
    guard: Optional[int] = None

    def __post_init__(self):
        if self.highpass is None and self.lowpass is None:
            raise UsageError("filter needs a highpass and/or lowpass cutoff")
        if self.numtaps < 3 or self.numtaps % 2 == 0:
            raise UsageError("numtaps must be odd and >= 3")
        guard = 3 * self.numtaps if self.guard is None else int(self.guard)
        if guard < 3 * self.numtaps:
            raise UsageError(f"guard must be >= 3 filter lengths ({3 * self.numtaps})")
        object.__setattr__(self, "guard", guard)

    def taps(self, dt: float) -> np.ndarray:
        nyq = 0.5 / dt
        for c in (self.highpass, self.lowpass):
            if c is not None and not 0 < c < nyq:
                raise UsageError(f"filter cutoff {c} outside (0, Nyquist={nyq})")
        if self.highpass is not None and self.lowpass is not None:
            if self.highpass >= self.lowpass:
                raise UsageError("highpass cutoff must be below lowpass cutoff")
            return signal.firwin(self.numtaps, [self.highpass, self.lowpass],
                                 pass_zero=False, fs=1.0 / dt)
        if self.highpass is not None:
            return signal.firwin(self.numtaps, self.highpass, pass_zero=False, fs=1.0 / dt)
        return signal.firwin(self.numtaps, self.lowpass, fs=1.0 / dt)

    def describe(self) -> dict:
        return {"highpass": self.highpass, "lowpass": self.lowpass,
                "numtaps": self.numtaps, "guard": self.guard}


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    state: StateSpec
    grid: TimeGrid
    n_wf: int
    seed: int
    n_mode: Optional[int] = None
    filter: Optional[FilterSpec] = None
    basis_seed: int = 0

    def __post_init__(self):
        if int(self.n_wf) != self.n_wf or self.n_wf < 1:
            raise UsageError(f"n_wf must be a positive integer, got {self.n_wf}")
        object.__setattr__(self, "n_wf", int(self.n_wf))
        n_mode = self.grid.n_samp if self.n_mode is None else self.n_mode
        if int(n_mode) != n_mode or not 1 <= n_mode <= self.grid.n_samp:
            raise DimensionError(f"n_mode must lie in [1, n_samp={self.grid.n_samp}], got {n_mode}")
        object.__setattr__(self, "n_mode", int(n_mode))
        check_seed(self.seed)
        for m in self.state.modes():
            if m.grid.n_samp != self.grid.n_samp:
                raise DimensionError("state mode and simulation grid differ in length")
            if not m.is_real(1e-12) and self.n_mode < 2:
                raise DimensionError("a complex mode needs n_mode >= 2")
        if self.filter is not None:
            self.filter.taps(self.grid.dt)

    def with_state(self, state: StateSpec, seed: Optional[int] = None) -> "SimulationConfig":
        return SimulationConfig(state, self.grid, self.n_wf, self.seed if seed is None else seed,
                                self.n_mode, self.filter, self.basis_seed)

    def describe(self) -> dict:
        return {"source": "simulation", "state": self.state.describe(),
                "n_samp": self.grid.n_samp, "dt": self.grid.dt, "n_wf": self.n_wf,
                "n_mode": self.n_mode, "seed": self.seed,
                "filter": None if self.filter is None else self.filter.describe()}


@dataclass(frozen=True, eq=False)
class WaveformBatch:
    """``n_wf x n_samp`` real quadrature samples.

    ``sigma0_sq`` is the vacuum variance in the units of ``data`` (1 for
    simulated batches); the kernel estimator divides by it.
    """

    grid: TimeGrid
    data: np.ndarray
    provenance: dict = field(default_factory=dict)
    sigma0_sq: float = SIGMA0_SQ

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[1] != self.grid.n_samp or d.shape[0] < 1:
            raise DimensionError(f"batch data must have shape (n_wf, {self.grid.n_samp}), got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise FormatError("batch contains non-finite samples")
        if not (self.sigma0_sq > 0 and math.isfinite(self.sigma0_sq)):
            raise FormatError(f"vacuum variance must be positive, got {self.sigma0_sq}")
        if not d.flags.c_contiguous or d is self.data:
            d = np.ascontiguousarray(d).copy()
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def n_wf(self) -> int:
        return self.data.shape[0]


# --------------------------------------------------------------------------
# synthesis

@dataclass
class _Component:
    kind: str
    eta: float
    basis: Optional[np.ndarray]        # (n_mode_ext, n_ext) real, None = identity
    carriers: int = 0
    t_amp: float = 1.0
    r_amp: float = 0.0
    alpha: complex = 0.0
    overlaps: Optional[np.ndarray] = None


@dataclass
class _Plan:
    n_samp: int
    n_ext: int
    guard: int
    n_mode: int
    components: list
    weights: np.ndarray
    taps: Optional[np.ndarray]


def _embed(mode: TemporalMode, grid_ext: TimeGrid, guard: int) -> TemporalMode:
    s = np.zeros(grid_ext.n_samp, dtype=complex)
    s[guard:guard + mode.grid.n_samp] = mode.samples
    return normalize(s, grid_ext)


def _plan(config: SimulationConfig) -> _Plan:
    n_samp = config.grid.n_samp
    guard = 0 if config.filter is None else config.filter.guard
    n_ext = n_samp + 2 * guard
    grid_ext = TimeGrid(n_ext, config.grid.dt)
    if config.n_mode == n_samp:
        n_mode = n_ext
    else:
        n_mode = max(1, round(config.n_mode * n_ext / n_samp))

    state = config.state
    comps = state.components if state.kind == "mixture" else (state,)
    weights = np.array(state.weights if state.kind == "mixture" else (1.0,))
    built = []
    for c in comps:
        if c.kind == "vacuum":
            basis = None
            if n_mode < n_ext:
                basis = orthonormal_completion(np.empty((0, n_ext)), n_mode, config.basis_seed)
            built.append(_Component("vacuum", 0.0, basis))
            continue
        f = _embed(c.mode, grid_ext, guard) if guard else c.mode
        mb = extend_basis(f, n_mode, seed=config.basis_seed)
        comp = _Component(c.kind, c.mean_photons, np.asarray(mb.vectors, dtype=float),
                          carriers=mb.n_carriers, t_amp=mb.carrier_amplitudes[0],
                          r_amp=mb.carrier_amplitudes[1])
        if c.kind == "coherent":
            comp.alpha = math.sqrt(c.mean_photons)
            comp.overlaps = mb.vectors[:mb.n_carriers] @ f.samples
        built.append(comp)
    taps = None if config.filter is None else config.filter.taps(config.grid.dt)
    return _Plan(n_samp, n_ext, guard, n_mode, built, weights, taps)


def _apply_component(comp: _Component, rng, x: np.ndarray) -> np.ndarray:
    rows = x.shape[0]
    if comp.kind == "single_photon":
        if comp.carriers == 1:
            photon = rng.random(rows) < comp.eta
            p1 = sample_single_photon(rng, rows)
            x[:, 0] = np.where(photon, p1, x[:, 0])
        else:
            x[:, 0], x[:, 1] = sample_complex_photon_pair(rng, comp.t_amp, comp.r_amp, comp.eta, rows)
    elif comp.kind == "coherent":
        theta = rng.uniform(0.0, 2 * np.pi, rows)
        # vacuum part of the carriers is already in x; add the displacement only
        alpha_j = comp.alpha * comp.overlaps
        x[:, :comp.carriers] += 2.0 * np.multiply.outer(np.exp(-1j * theta), alpha_j).real
    return x


def _project(comp: _Component, x: np.ndarray) -> np.ndarray:
    return x.copy() if comp.basis is None else x @ comp.basis


def _synth_block(plan: _Plan, seed: int, block: int, rows: int) -> np.ndarray:
    rng = block_generator(seed, block)
    x0 = sample_vacuum(rng, (rows, plan.n_mode))
    if len(plan.components) == 1:
        w = _project(plan.components[0], _apply_component(plan.components[0], rng, x0))
    else:
        which = np.searchsorted(np.cumsum(plan.weights)[:-1], rng.random(rows), side="right")
        w = np.empty((rows, plan.n_ext))
        for ci, comp in enumerate(plan.components):
            xc = _apply_component(comp, rng, x0.copy())
            sel = which == ci
            if np.any(sel):
                w[sel] = _project(comp, xc[sel])
    if plan.taps is not None:
        w = signal.oaconvolve(w, plan.taps[None, :], mode="same", axes=1)
        w = np.ascontiguousarray(w[:, plan.guard:plan.guard + plan.n_samp])
    return w


def synthesize_blocks(config: SimulationConfig, fn=None, threads: Optional[int] = None) -> list:
    """Synthesize the batch block by block and return ``[fn(block) ...]`` in
    block order (``fn`` defaults to the identity)."""
    plan = _plan(config)

    def work(item):
        b, start, stop = item
        w = _synth_block(plan, config.seed, b, stop - start)
        return w if fn is None else fn(w)

    return ordered_map(work, block_ranges(config.n_wf, BLOCK_SIZE), threads)


def synthesize_batch(config: SimulationConfig, threads: Optional[int] = None) -> WaveformBatch:
    """Generate ``config.n_wf`` waveforms; bit-identical for any ``threads``."""
    blocks = synthesize_blocks(config, threads=threads)
    data = blocks[0] if len(blocks) == 1 else np.vstack(blocks)
    return WaveformBatch(config.grid, data, config.describe())


# --------------------------------------------------------------------------
# file formats

TMRW_MAGIC = b"TMRW"
TMRW_VERSION = 1
_TMRW_HEADER = struct.Struct("<4sIQId")


def write_batch(batch: WaveformBatch, path, format: Optional[str] = None) -> None:
    fmt = _format_for(path, format)
    path = Path(path)
    if fmt == "tmrw":
        header = _TMRW_HEADER.pack(TMRW_MAGIC, TMRW_VERSION, batch.n_wf, batch.grid.n_samp, batch.grid.dt)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(batch.data.astype("<f8", copy=False).tobytes(order="C"))
    else:
        with open(path, "w") as fh:
            for row in batch.data.tolist():
                fh.write(",".join(repr(v) for v in row) + "\n")


def ingest_batch(path, format: Optional[str] = None, calibration=None, dt: float = 1.0) -> WaveformBatch:
    """Read a recorded (or previously written) batch.

    ``calibration`` is an optional path to a JSON sidecar
    ``{"sigma0_sq_raw": <vacuum variance in file units>}``.  ``dt`` is only used
    for CSV files, which carry no grid metadata.
    """
    fmt = _format_for(path, format)
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if fmt == "tmrw":
        if len(raw) < _TMRW_HEADER.size:
            raise FormatError("truncated TMRW header")
        magic, version, n_wf, n_samp, dt = _TMRW_HEADER.unpack_from(raw)
        if magic != TMRW_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {TMRW_MAGIC!r}")
        if version != TMRW_VERSION:
            raise FormatError(f"unsupported TMRW version {version}")
        payload = raw[_TMRW_HEADER.size:]
        if len(payload) != n_wf * n_samp * 8:
            raise FormatError(
                f"payload holds {len(payload)} bytes, header announces {n_wf} x {n_samp} samples")
        data = np.frombuffer(payload, dtype="<f8").reshape(n_wf, n_samp).astype(np.float64)
    else:
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"invalid CSV waveform file: {exc}") from exc
        n_wf, n_samp = data.shape
    sigma0_sq = SIGMA0_SQ
    if calibration is not None:
        sigma0_sq = load_calibration(calibration)
    prov = {"source": "ingested", "path": str(path), "format": fmt, "n_wf": int(n_wf),
            "n_samp": int(n_samp), "sigma0_sq": sigma0_sq}
    return WaveformBatch(TimeGrid(int(n_samp), float(dt)), data, prov, sigma0_sq)


def load_calibration(path) -> float:
    try:
        d = json.loads(Path(path).read_text())
        value = float(d["sigma0_sq_raw"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid calibration sidecar {path}: {exc}") from exc
    if not (value > 0 and math.isfinite(value)):
        raise FormatError("sigma0_sq_raw must be positive")
    return value


def _format_for(path, format: Optional[str]) -> str:
    if format is None:
        suffix = Path(path).suffix.lower()
        format = {".tmrw": "tmrw", ".csv": "csv"}.get(suffix)
        if format is None:
            raise FormatError(f"cannot infer waveform format from {path!r}; pass format=")
    if format not in ("tmrw", "csv"):
        raise FormatError(f"unknown waveform format {format!r}")
    return format
