from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import direct_overlap
from tempmode.errors import DegenerateModeError, DimensionError, FormatError
from tempmode.modes import (ModeBasis, ShapeSpec, TemporalMode, TimeGrid, carrier_split,
                            extend_basis, fidelity, load_mode, make_shape, mode_from_dict,
                            mode_to_dict, normalize, overlap, save_mode)

G2 = TimeGrid(2)
F = normalize([math.sqrt(2 / 3), 1j / math.sqrt(3)], G2)


def random_mode(seed: int, n: int = 16, real: bool = False) -> TemporalMode:
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(n) + (0 if real else 1j * rng.standard_normal(n))
    return normalize(s, TimeGrid(n))


complex_modes = st.integers(0, 2**32 - 1).map(random_mode)


# --------------------------------------------------------------------------
# grid and normalization

def test_grid_points_and_validation():
    g = TimeGrid(4, 0.5)
    np.testing.assert_array_equal(g.times, [0.0, 0.5, 1.0, 1.5])
    assert g.duration == 2.0
    with pytest.raises(DimensionError):
        TimeGrid(1)
    with pytest.raises(DimensionError):
        TimeGrid(4, 0.0)


@pytest.mark.parametrize("raw, expected", [
    ([2, 0], [1, 0]),
    ([1, 1j], [1 / math.sqrt(2), 1j / math.sqrt(2)]),
    ([3, 4j], [0.6, 0.8j]),
])
def test_normalize_examples(raw, expected):
    np.testing.assert_allclose(normalize(raw, G2).samples, expected, atol=1e-15)


def test_normalize_rejects_zero():
    with pytest.raises(DegenerateModeError):
        normalize([0, 0], G2)


def test_mode_requires_unit_norm():
    with pytest.raises(DegenerateModeError):
        TemporalMode(G2, np.array([1.0, 1.0]))


def test_mode_samples_are_read_only():
    with pytest.raises(ValueError):
        F.samples[0] = 0


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                min_size=2, max_size=30))
def test_normalize_keeps_direction(values):
    s = np.array(values)
    if np.linalg.norm(s) < 1e-6:
        return
    m = normalize(s, TimeGrid(len(s)))
    assert abs(np.vdot(m.samples, m.samples).real - 1) <= 1e-12
    # parallel: |<s, m>| = |s|
    assert abs(abs(np.vdot(s, m.samples)) - np.linalg.norm(s)) <= 1e-9 * np.linalg.norm(s)


def test_amplitude_and_phase():
    np.testing.assert_allclose(F.amplitude * np.exp(1j * F.phase), F.samples, atol=1e-15)


# --------------------------------------------------------------------------
# overlap and fidelity

def test_overlap_examples():
    e0, e1 = normalize([1, 0], G2), normalize([0, 1], G2)
    assert overlap(F, F) == pytest.approx(1.0, abs=1e-15)
    assert overlap(e0, e1) == 0
    assert overlap(F, F.conj()) == pytest.approx(1 / 3, abs=1e-15)
    assert overlap(F, F.conj()) == pytest.approx(direct_overlap(F.samples, np.conj(F.samples)), abs=1e-15)


def test_fidelity_examples():
    e0, e1 = normalize([1, 0], G2), normalize([0, 1], G2)
    assert fidelity(F, F) == pytest.approx(1.0, abs=1e-15)
    assert fidelity(e0, e1) == 0.0
    assert fidelity(F, F.conj()) == pytest.approx(1 / 9, abs=1e-15)


def test_overlap_grid_mismatch():
    with pytest.raises(DimensionError):
        overlap(F, random_mode(0, 3))


@given(complex_modes, st.integers(0, 2**32 - 1))
def test_fidelity_symmetric_and_bounded(g, seed):
    h = random_mode(seed)
    assert fidelity(g, h) == fidelity(h, g)
    assert 0.0 <= fidelity(g, h) <= 1.0


@given(complex_modes, st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi))
def test_fidelity_global_phase_invariant(g, seed, alpha):
    h = random_mode(seed)
    rot = TemporalMode(h.grid, h.samples * np.exp(1j * alpha))
    assert abs(fidelity(g, rot) - fidelity(g, h)) <= 1e-12


# --------------------------------------------------------------------------
# shapes

GRID = TimeGrid(200, 0.5)
ALL_SPECS = [ShapeSpec("gaussian"), ShapeSpec("gaussian", center=30.0, width=5.0),
             ShapeSpec("chirped_gaussian", width=10.0, chirp_rate=0.02),
             ShapeSpec("chirped_gaussian", width=10.0, chirp_rate=0.01, detuning=0.3),
             ShapeSpec("exp_decay", rate=0.1), ShapeSpec("exp_decay", center=20.0, rate=0.5),
             ShapeSpec("hermite_gauss", order=0), ShapeSpec("hermite_gauss", order=3, width=8.0)]


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
def test_shapes_unit_norm(spec):
    m = make_shape(spec, GRID)
    assert abs(np.sum(np.abs(m.samples) ** 2) - 1.0) <= 1e-12


def test_wide_gaussian_is_flat():
    m = make_shape(ShapeSpec("gaussian", width=1e6), GRID)
    np.testing.assert_allclose(m.amplitude, 1 / math.sqrt(GRID.n_samp), rtol=1e-6)
    assert np.ptp(m.phase) == 0.0


def test_zero_chirp_equals_gaussian():
    a = make_shape(ShapeSpec("chirped_gaussian", width=7.0, chirp_rate=0.0), GRID)
    b = make_shape(ShapeSpec("gaussian", width=7.0), GRID)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_chirp_phase_follows_quadratic():
    c, width = 0.003, 12.0
    m = make_shape(ShapeSpec("chirped_gaussian", width=width, chirp_rate=c), GRID)
    t = GRID.times
    tc = GRID.duration / 2
    # the quadratic phase measured relative to the first sample; unwrap for large excursions
    measured = np.unwrap(m.phase) - np.unwrap(m.phase)[0]
    expected = c * (t - tc) ** 2 - c * (t[0] - tc) ** 2
    np.testing.assert_allclose(measured, expected, atol=1e-9)


def test_hermite_orders_orthogonal():
    g = TimeGrid(400, 0.25)
    h = [make_shape(ShapeSpec("hermite_gauss", order=k, width=5.0), g) for k in range(4)]
    for i in range(4):
        for j in range(i + 1, 4):
            assert abs(overlap(h[i], h[j])) < 1e-10


def test_exp_decay_needs_rate():
    with pytest.raises(DegenerateModeError):
        make_shape(ShapeSpec("exp_decay"), GRID)


def test_unknown_shape_kind():
    with pytest.raises(FormatError):
        ShapeSpec("sawtooth")


def test_from_file_shape(tmp_path):
    m = random_mode(3, 200)
    save_mode(m, tmp_path / "m.json")
    loaded = make_shape(ShapeSpec("from_file", path=str(tmp_path / "m.json")), TimeGrid(200))
    np.testing.assert_allclose(loaded.samples, m.samples, atol=1e-15)
    with pytest.raises(DimensionError):
        make_shape(ShapeSpec("from_file", path=str(tmp_path / "m.json")), TimeGrid(100))


def test_shape_spec_dict_round_trip():
    s = ShapeSpec("chirped_gaussian", width=3.0, chirp_rate=0.1, detuning=0.2)
    assert ShapeSpec.from_dict(s.to_dict()) == s


# --------------------------------------------------------------------------
# carriers and basis completion

@given(complex_modes)
def test_carrier_split_reconstructs_mode(f):
    t, r, u_r, u_i, phi0 = carrier_split(f)
    rebuilt = t * u_r + 1j * r * (0 if u_i is None else u_i)
    np.testing.assert_allclose(f.samples * np.exp(1j * phi0), rebuilt, atol=1e-12)
    assert t >= r >= 0
    assert abs(t * t + r * r - 1) < 1e-12


def test_extend_basis_real_full():
    f = random_mode(5, 30, real=True)
    b = extend_basis(f, 30, seed=1)
    np.testing.assert_allclose(b.vectors[0], f.samples.real, atol=1e-12)
    np.testing.assert_allclose(b.gram(), np.eye(30), atol=1e-10)


def test_extend_basis_two_point_complex_spans_axes():
    b = extend_basis(F, 2)
    # column space of the basis is the whole plane spanned by [1,0] and [0,1]
    assert np.linalg.matrix_rank(b.vectors, tol=1e-10) == 2
    np.testing.assert_allclose(np.abs(b.vectors), np.eye(2), atol=1e-12)


def test_extend_basis_complex_needs_two_carriers():
    with pytest.raises(DimensionError):
        extend_basis(F, 1)


def test_extend_basis_too_many():
    with pytest.raises(DimensionError):
        extend_basis(F, 3)


@given(complex_modes, st.integers(2, 16), st.integers(0, 1000))
def test_basis_completeness(f, n_total, seed):
    b = extend_basis(f, n_total, seed=seed)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n_total) @ b.vectors
    coeffs = b.vectors @ v
    assert abs(np.sum(coeffs**2) - v @ v) <= 1e-9 * max(1.0, v @ v)
    # the seed mode lives in the span of the first carriers
    k = b.n_carriers
    proj = b.vectors[:k].T @ (b.vectors[:k] @ f.samples)
    np.testing.assert_allclose(proj, f.samples, atol=1e-10)


def test_mode_basis_rejects_non_orthonormal():
    with pytest.raises(DimensionError):
        ModeBasis(G2, np.array([[1.0, 0.0], [1.0, 1e-3]]))


# --------------------------------------------------------------------------
# mode JSON

@given(complex_modes)
def test_mode_json_round_trip_bitwise(f):
    back = mode_from_dict(json.loads(json.dumps(mode_to_dict(f))))
    np.testing.assert_array_equal(back.samples, f.samples)


def test_mode_json_file_round_trip(tmp_path):
    f = TemporalMode(TimeGrid(16, 0.125), random_mode(9).samples)
    save_mode(f, tmp_path / "f.json")
    back = load_mode(tmp_path / "f.json")
    np.testing.assert_array_equal(back.samples, f.samples)
    assert back.grid == f.grid


def test_mode_json_normalizes_on_load():
    m = mode_from_dict({"dt": 1.0, "samples": [[3, 0], [0, 4]]})
    np.testing.assert_allclose(m.samples, [0.6, 0.8j], atol=1e-15)


@pytest.mark.parametrize("bad", [{}, {"samples": [1, 2]}, {"samples": [[1, 2, 3]]}, {"samples": "x"}])
def test_mode_json_rejects_malformed(bad):
    with pytest.raises((FormatError, DimensionError)):
        mode_from_dict(bad)
