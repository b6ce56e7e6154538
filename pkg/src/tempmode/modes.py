"""Sampled complex temporal modes, orthonormal bases and the fidelity metric.

Modes use the discrete normalization ``sum(|f_k|**2) == 1``: the time step is
absorbed into the samples so that eigenvectors of the sample-space kernel are
directly comparable with modes.  A continuous-time mode ``g(t)`` with
``integral |g|^2 dt = 1`` maps onto this convention as ``f_k = g(t_k) * sqrt(dt)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import eval_hermite

from .errors import DegenerateModeError, DimensionError, FormatError

NORM_TOL = 1e-12
ORTHO_TOL = 1e-10
# Candidate vectors whose residual after re-orthogonalization falls below this
# are rejected and redrawn.
RESIDUAL_REJECT = 1e-8


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_k = k * dt`` for ``k = 0 .. n_samp - 1``."""

    n_samp: int
    dt: float = 1.0

    def __post_init__(self):
        if int(self.n_samp) != self.n_samp or self.n_samp < 2:
            raise DimensionError(f"n_samp must be an integer >= 2, got {self.n_samp}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DimensionError(f"dt must be positive and finite, got {self.dt}")
        object.__setattr__(self, "n_samp", int(self.n_samp))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samp) * self.dt

    @property
    def duration(self) -> float:
        return self.n_samp * self.dt


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TemporalMode:
    """A unit-norm complex mode function sampled on a :class:`TimeGrid`."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (self.grid.n_samp,):
            raise DimensionError(
                f"expected {self.grid.n_samp} samples, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise FormatError("mode samples must be finite")
        norm2 = float(np.vdot(s, s).real)
        if abs(norm2 - 1.0) > NORM_TOL + 4 * s.size * np.finfo(float).eps:
            raise DegenerateModeError(
                f"mode is not unit norm (sum |f|^2 = {norm2!r}); use normalize()")
        object.__setattr__(self, "samples", _frozen(s))

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.samples)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.samples)

    @property
    def real(self) -> np.ndarray:
        return self.samples.real.copy()

    @property
    def imag(self) -> np.ndarray:
        return self.samples.imag.copy()

    def conj(self) -> "TemporalMode":
        return TemporalMode(self.grid, np.conj(self.samples))

    def imbalance(self) -> float:
        """``|sum f_k^2|``: 1 for a mode that is real up to a global phase,
        0 for a mode whose real and imaginary carriers hold equal weight."""
        return float(abs(np.sum(self.samples * self.samples)))

    def is_real(self, tol: float = 1e-12) -> bool:
        """True when the mode is real up to a global phase."""
        return 1.0 - self.imbalance() <= tol

    def with_phase(self, phase: np.ndarray) -> "TemporalMode":
        """Return ``f(t) * exp(i * phase(t))`` renormalized."""
        return normalize(self.samples * np.exp(1j * np.asarray(phase)), self.grid)


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """Ordered orthonormal set of modes stored row-wise in ``vectors``.

    ``carrier_amplitudes`` holds ``(t, r)`` with ``t**2 + r**2 == 1`` when the
    basis was built by :func:`extend_basis`: the seed mode is
    ``exp(-i phi0) * (t * vectors[0] + i * r * vectors[1])`` (``r == 0`` and a
    single carrier for a real mode).
    """

    grid: TimeGrid
    vectors: np.ndarray
    carrier_amplitudes: Optional[tuple] = None
    carrier_phase: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.vectors)
        if v.ndim != 2 or v.shape[1] != self.grid.n_samp:
            raise DimensionError(f"basis vectors must have shape (k, {self.grid.n_samp})")
        gram = v.conj() @ v.T
        if np.max(np.abs(gram - np.eye(len(v))), initial=0.0) > ORTHO_TOL:
            raise DimensionError("basis vectors are not orthonormal")
        object.__setattr__(self, "vectors", _frozen(v))

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def modes(self) -> tuple:
        return tuple(TemporalMode(self.grid, v.astype(complex)) for v in self.vectors)

    @property
    def n_carriers(self) -> int:
        if self.carrier_amplitudes is None:
            return 0
        return 1 if self.carrier_amplitudes[1] == 0 else 2

    def is_real(self) -> bool:
        return not np.iscomplexobj(self.vectors) or not np.any(self.vectors.imag)

    def gram(self) -> np.ndarray:
        return self.vectors.conj() @ self.vectors.T


def normalize(samples: Sequence[complex], grid: TimeGrid) -> TemporalMode:
    """Scale ``samples`` to unit norm without changing their direction."""
    s = np.asarray(samples, dtype=complex)
    if s.shape != (grid.n_samp,):
        raise DimensionError(f"expected {grid.n_samp} samples, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise FormatError("mode samples must be finite")
    norm = np.linalg.norm(s)
    if norm == 0 or not np.isfinite(norm):
        raise DegenerateModeError("cannot normalize an all-zero mode")
    s = s / norm
    # one correction pass brings the norm to within a few ulp of 1
    s = s / math.sqrt(float(np.vdot(s, s).real))
    return TemporalMode(grid, s)


def _check_same_grid(g: TemporalMode, h: TemporalMode):
    if g.grid.n_samp != h.grid.n_samp:
        raise DimensionError(
            f"grid mismatch: {g.grid.n_samp} vs {h.grid.n_samp} samples")


def overlap(g: TemporalMode, h: TemporalMode) -> complex:
    """Discrete inner product ``sum(conj(g_k) * h_k)``."""
    _check_same_grid(g, h)
    return complex(np.vdot(g.samples, h.samples))


def fidelity(target: TemporalMode, measured: TemporalMode) -> float:
    """Mode fidelity ``|<target, measured>|^2``, insensitive to global phase."""
    _check_same_grid(target, measured)
    a = np.vdot(target.samples, measured.samples)
    return min(1.0, float(a.real * a.real + a.imag * a.imag))


# --------------------------------------------------------------------------
# shape library

SHAPE_KINDS = ("gaussian", "chirped_gaussian", "exp_decay", "hermite_gauss", "from_file")


@dataclass(frozen=True)
class ShapeSpec:
    """Parameters of a test shape; times are in the grid's units.

    ``center`` and ``width`` default to the middle of the window and an eighth
    of its duration.  ``chirp_rate`` is the quadratic phase coefficient
    (rad / time^2) and ``detuning`` an optional linear phase (rad / time),
    both taken about ``center``.
    """

    kind: str
    center: Optional[float] = None
    width: Optional[float] = None
    chirp_rate: float = 0.0
    detuning: float = 0.0
    rate: Optional[float] = None
    order: int = 0
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise FormatError(f"unknown shape kind {self.kind!r}; expected one of {SHAPE_KINDS}")

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeSpec":
        return cls(**d)


def make_shape(spec: ShapeSpec, grid: TimeGrid) -> TemporalMode:
    """Sample a shape from the library on ``grid`` and normalize it."""
    if spec.kind == "from_file":
        if spec.path is None:
            raise FormatError("from_file shape needs a path")
        mode = load_mode(spec.path)
        if mode.grid.n_samp != grid.n_samp:
            raise DimensionError(
                f"shape file has {mode.grid.n_samp} samples, grid has {grid.n_samp}")
        return normalize(mode.samples, grid)

    t = grid.times
    center = grid.duration / 2 if spec.center is None else spec.center
    width = grid.duration / 8 if spec.width is None else spec.width
    if spec.kind in ("gaussian", "chirped_gaussian", "hermite_gauss") and not width > 0:
        raise DegenerateModeError(f"width must be positive, got {width}")
    u = t - center
    if spec.kind == "gaussian":
        f = np.exp(-u**2 / (2 * width**2)).astype(complex)
    elif spec.kind == "chirped_gaussian":
        f = np.exp(-u**2 / (2 * width**2)) * np.exp(1j * (spec.chirp_rate * u**2 + spec.detuning * u))
    elif spec.kind == "exp_decay":
        if spec.rate is None or not spec.rate > 0:
            raise DegenerateModeError("exp_decay needs a positive rate")
        start = 0.0 if spec.center is None else spec.center
        f = np.where(t >= start, np.exp(-spec.rate * np.clip(t - start, 0, None)), 0.0).astype(complex)
    else:  # hermite_gauss
        x = u / width
        f = (eval_hermite(int(spec.order), x) * np.exp(-x**2 / 2)).astype(complex)
    # underflowed envelopes (window far from the pulse) end up here
    return normalize(f, grid)


# --------------------------------------------------------------------------
# basis completion

def carrier_split(f: TemporalMode):
    """Split ``f`` into orthogonal real carriers.

    Returns ``(t, r, u_r, u_i, phi0)`` with ``f * exp(i phi0) == t u_r + i r u_i``,
    ``t >= r >= 0``, ``t**2 + r**2 == 1`` and ``u_r``, ``u_i`` orthonormal real
    vectors.  ``u_i`` is None when the mode is real up to a global phase.
    """
    ab = np.column_stack([f.samples.real, f.samples.imag])
    u, s, vt = np.linalg.svd(ab, full_matrices=False)
    # f = U S Vt [1, i]^T
    c = vt @ np.array([1.0, 1.0j])
    phi0 = -float(np.angle(c[0]))
    t_amp, r_amp = float(s[0]), float(s[1])
    u_r = u[:, 0].copy()
    if r_amp <= 1e-12:
        # real up to a global phase; fix the sign so <u_r, f e^{i phi0}> > 0
        return 1.0, 0.0, u_r, None, phi0
    rel = c[1] * np.conj(c[0])
    u_i = u[:, 1].copy()
    if rel.imag < 0:
        u_i = -u_i
    norm = math.hypot(t_amp, r_amp)
    return t_amp / norm, r_amp / norm, u_r, u_i, phi0


def extend_basis(f: TemporalMode, n_total: int, seed: int = 0) -> ModeBasis:
    """Complete ``f`` to an orthonormal real basis of ``n_total`` modes.

    A real mode occupies the first basis vector; a complex mode is split into
    its real and imaginary carriers, which occupy the first two.  The rest is
    filled with random candidates re-orthogonalized against the accepted
    vectors (twice, classical Gram-Schmidt), redrawn on near-linear dependence.
    """
    n = f.grid.n_samp
    if n_total > n:
        raise DimensionError(f"cannot build {n_total} orthonormal modes in {n} samples")
    t_amp, r_amp, u_r, u_i, phi0 = carrier_split(f)
    carriers = [u_r] if u_i is None else [u_r, u_i]
    if n_total < len(carriers):
        raise DimensionError("a complex mode needs two real carriers (n_total >= 2)")
    if u_i is None:
        # exactly f for real input: align sign with Re(f e^{i phi0})
        ref = (f.samples * np.exp(1j * phi0)).real
        if np.dot(u_r, ref) < 0:
            u_r = -u_r
        carriers = [u_r]

    vecs = orthonormal_completion(np.array(carriers), n_total, seed)
    return ModeBasis(f.grid, vecs, carrier_amplitudes=(t_amp, r_amp), carrier_phase=phi0)


def orthonormal_completion(initial: np.ndarray, n_total: int, seed: int = 0) -> np.ndarray:
    """Extend orthonormal real rows ``initial`` to ``n_total`` orthonormal rows."""
    initial = np.atleast_2d(np.asarray(initial, dtype=float))
    n = initial.shape[1]
    if n_total > n:
        raise DimensionError(f"cannot build {n_total} orthonormal vectors in {n} dimensions")
    vecs = np.zeros((n_total, n))
    k = len(initial) if initial.size else 0
    vecs[:k] = initial
    rng = np.random.default_rng(seed)
    while k < n_total:
        cand = rng.standard_normal(n)
        cand /= np.linalg.norm(cand)
        for _ in range(2):
            cand -= vecs[:k].T @ (vecs[:k] @ cand)
        res = np.linalg.norm(cand)
        if res < RESIDUAL_REJECT:
            continue
        vecs[k] = cand / res
        k += 1
    return vecs


# --------------------------------------------------------------------------
# mode JSON

def mode_to_dict(mode: TemporalMode) -> dict:
    return {"dt": mode.grid.dt,
            "samples": [[float(z.real), float(z.imag)] for z in mode.samples]}


def mode_from_dict(d: dict) -> TemporalMode:
    try:
        dt = float(d.get("dt", 1.0))
        pairs = np.asarray(d["samples"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid mode JSON: {exc}") from exc
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise FormatError("mode samples must be a list of [re, im] pairs")
    samples = pairs[:, 0] + 1j * pairs[:, 1]
    grid = TimeGrid(len(pairs), dt)
    if abs(float(np.vdot(samples, samples).real) - 1.0) <= NORM_TOL:
        # already unit norm: keep the bits so files round-trip exactly
        return TemporalMode(grid, samples)
    return normalize(samples, grid)


def save_mode(mode: TemporalMode, path) -> None:
    # json writes floats with repr, i.e. shortest round-trip decimal
    Path(path).write_text(json.dumps(mode_to_dict(mode)) + "\n")


def load_mode(path) -> TemporalMode:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read mode file {path}: {exc}") from exc
    return mode_from_dict(d)
