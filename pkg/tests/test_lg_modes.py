import io
from math import factorial, pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oamthermal.errors import GridError, ParameterError, TruncationError
from oamthermal.lg_modes import (GridSpec, TransverseField, apply_phase, azimuthal_decompose,
                                 default_grid, evaluate_lg, overlap, spiral_phase)


def analytic_lg(ell, w, grid):
    """Independent polar-form LG_{ell,0} for quadrature checks."""
    r, theta = grid.polar()
    n = abs(ell)
    amp = np.sqrt(2 / (pi * factorial(n))) / w * (np.sqrt(2) * r / w) ** n * np.exp(-r ** 2 / w ** 2)
    return amp * np.exp(1j * ell * theta)


def test_grid_validation():
    with pytest.raises(ParameterError):
        GridSpec(32, 1.0)
    with pytest.raises(ParameterError):
        GridSpec(128, 0.0)
    g = GridSpec(128, 1.0)
    assert g.cell_area == pytest.approx((1 / 128) ** 2)
    x, y = g.coordinates()
    assert x[g.center_index, g.center_index] == 0 and y[g.center_index, g.center_index] == 0


def test_gaussian_is_real_and_peaked(grid, waist):
    u = evaluate_lg(0, waist, grid).amplitudes
    c = grid.center_index
    assert np.max(np.abs(u.imag)) == 0.0
    assert np.unravel_index(np.argmax(np.abs(u)), u.shape) == (c, c)


def test_vortex_core_is_exactly_zero(grid, waist):
    u = evaluate_lg(3, waist, grid).amplitudes
    c = grid.center_index
    assert u[c, c] == 0


@pytest.mark.parametrize("ell", [0, 1, -2, 5, -12])
def test_normalization_against_doubled_resolution_quadrature(grid, waist, ell):
    fine = grid.refined(2)
    raw = analytic_lg(ell, waist, fine)
    assert np.sum(np.abs(raw) ** 2) * fine.cell_area == pytest.approx(1.0, abs=1e-6)
    assert evaluate_lg(ell, waist, grid).norm() == pytest.approx(1.0, abs=1e-6)


def test_matches_polar_form(grid, waist):
    for ell in (-4, 0, 3):
        u = evaluate_lg(ell, waist, grid).amplitudes
        assert np.max(np.abs(u - analytic_lg(ell, waist, grid))) < 1e-6 * np.max(np.abs(u))


def test_truncation_error():
    g = GridSpec(256, 6.5e-3)
    evaluate_lg(0, 1e-3, g)
    with pytest.raises(TruncationError):
        evaluate_lg(20, 1e-3, g)
    with pytest.raises(TruncationError):
        evaluate_lg(0, 1e-3, GridSpec(256, 5e-3))


def test_orthonormality(grid, waist):
    ells = range(-12, 13)
    fields = [evaluate_lg(l, waist, grid) for l in ells]
    gram = np.array([[overlap(a, b) for b in fields] for a in fields])
    assert np.max(np.abs(gram - np.eye(len(fields)))) < 1e-6


def test_overlap_conjugate_symmetric(grid, waist):
    a = evaluate_lg(1, waist, grid) + evaluate_lg(-2, waist, grid) * 0.3j
    b = evaluate_lg(2, waist, grid) * (0.5 - 0.2j) + evaluate_lg(1, waist, grid)
    assert overlap(a, b) == pytest.approx(np.conj(overlap(b, a)), abs=1e-12)


def test_gaussian_waist_mismatch_overlap(waist):
    # Closed form 2 w1 w2 / (w1^2 + w2^2) = 0.8 for w2 = 2 w1.
    g = GridSpec(512, 16 * waist)
    val = overlap(evaluate_lg(0, waist, g), evaluate_lg(0, 2 * waist, g))
    assert abs(val) == pytest.approx(0.8, abs=1e-6)
    # Independent radial quadrature of the same integral.
    r = np.linspace(0, 20 * waist, 200001)
    g1 = np.sqrt(2 / pi) / waist * np.exp(-r ** 2 / waist ** 2)
    g2 = np.sqrt(2 / pi) / (2 * waist) * np.exp(-r ** 2 / (2 * waist) ** 2)
    assert np.trapezoid(g1 * g2 * 2 * pi * r, r) == pytest.approx(0.8, abs=1e-8)


def test_mismatched_grids_raise(waist):
    a = evaluate_lg(0, waist, GridSpec(128, 8 * waist))
    b = evaluate_lg(0, waist, GridSpec(256, 8 * waist))
    with pytest.raises(GridError):
        overlap(a, b)
    with pytest.raises(GridError):
        apply_phase(a, np.zeros((256, 256)))


def test_apply_phase_identity_and_norm(grid, waist):
    u = evaluate_lg(2, waist, grid)
    assert np.array_equal(apply_phase(u, np.zeros(u.amplitudes.shape)).amplitudes, u.amplitudes)
    rng = np.random.default_rng(0)
    out = apply_phase(u, rng.uniform(-10, 10, u.amplitudes.shape))
    assert out.norm() == pytest.approx(u.norm(), rel=1e-13)


def test_spiral_phase_lowers_to_zero_order(grid, waist):
    u = evaluate_lg(3, waist, grid)
    coeff = azimuthal_decompose(apply_phase(u, spiral_phase(-3, grid)), waist, 6)
    power = np.abs(coeff) ** 2
    assert np.argmax(power) == 6
    off = np.delete(power, 6)
    assert off.max() < 1e-6


def test_decompose_one_hot(grid, waist):
    coeff = azimuthal_decompose(evaluate_lg(2, waist, grid), waist, 10)
    expected = np.zeros(21)
    expected[12] = 1
    assert np.max(np.abs(coeff - expected)) < 1e-6


def test_decompose_superposition(grid, waist):
    f = (evaluate_lg(1, waist, grid) + evaluate_lg(-1, waist, grid)) * (1 / np.sqrt(2))
    power = np.abs(azimuthal_decompose(f, waist, 5)) ** 2
    assert power[6] == pytest.approx(0.5, abs=1e-6)
    assert power[4] == pytest.approx(0.5, abs=1e-6)


def test_decompose_after_strong_screen_spreads(grid, waist):
    from oamthermal.turbulence import TurbulenceParams, generate_phase_screen
    screen = generate_phase_screen(TurbulenceParams.from_strength(1.0, waist, grid, seed=5))
    f = apply_phase(evaluate_lg(0, waist, grid), screen.phase)
    power = np.abs(azimuthal_decompose(f, waist, 20)) ** 2
    assert power.sum() < 1.0
    assert np.sum(power > 0.01) >= 3


@settings(max_examples=15, deadline=None)
@given(st.integers(-8, 8), st.integers(-8, 8))
def test_discretization_convergence(l1, l2):
    w = 1e-3
    coarse = default_grid(1.3 * w, 8, 128)
    fine = coarse.refined(2)
    a = overlap(evaluate_lg(l1, w, coarse), evaluate_lg(l2, 1.3 * w, coarse))
    b = overlap(evaluate_lg(l1, w, fine), evaluate_lg(l2, 1.3 * w, fine))
    assert abs(a - b) < 1e-4


def test_field_table_export(waist):
    g = GridSpec(64, 8 * waist)
    buf = io.StringIO()
    evaluate_lg(1, waist, g).write_table(buf)
    lines = buf.getvalue().splitlines()
    assert lines[2] == "row,col,re,im"
    assert len(lines) == 3 + 64 * 64


def test_field_rejects_nonfinite(small_grid):
    a = np.zeros((256, 256), dtype=complex)
    a[0, 0] = np.nan
    with pytest.raises(ParameterError):
        TransverseField(a, small_grid)
