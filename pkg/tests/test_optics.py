import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from spade_sense import ParameterError
from spade_sense.optics import (
    ModeBasis,
    OpticsParams,
    Quadrature,
    a_coeff,
    a_coeff_numeric,
    choose_cutoff,
    g_coeff,
    g_coeff_deriv,
    g_coeffs,
    hg_mode,
    overlap_p,
    psf,
)


def grid_integral(f, omega, half_width=10.0, n=801):
    x = np.linspace(-half_width * omega, half_width * omega, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.trapezoid(np.trapezoid(f(X, Y), x, axis=1), x)


def poisson_tail(gamma, cutoff, extra=400):
    # direct sum of the neglected terms, no 1 - cdf cancellation
    mu = gamma**2
    return math.fsum(
        math.exp(m * math.log(mu) - mu - math.lgamma(m + 1)) for m in range(cutoff + 1, cutoff + extra)
    ) if mu > 0 else 0.0


def test_psf_peak_and_decay():
    assert psf(0.0, 0.0, 1.0) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    assert psf(50.0, 0.0, 1.0) == 0.0


def test_psf_normalized():
    val, _ = integrate.dblquad(lambda y, x: psf(x, y, 0.7) ** 2, -8, 8, -8, 8, epsabs=1e-13)
    assert val == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("omega", [0.0, -1.0])
def test_psf_rejects_bad_omega(omega):
    with pytest.raises(ParameterError):
        psf(0, 0, omega)


def test_hg_mode_zero_is_psf():
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(hg_mode(0, x, 0.3, 1.3), psf(x, 0.3, 1.3), rtol=0, atol=0)


def test_hg_mode_matches_hermite_definition():
    from scipy.special import eval_hermite

    x = np.linspace(-2, 2, 9)
    for m in range(8):
        ref = eval_hermite(m, math.sqrt(2) * x / 1.5) / math.sqrt(2.0**m * math.factorial(m)) * psf(x, 0.2, 1.5)
        np.testing.assert_allclose(hg_mode(m, x, 0.2, 1.5), ref, rtol=1e-12, atol=1e-15)


def test_hg_orthonormal():
    gram = np.array(
        [[grid_integral(lambda X, Y: hg_mode(m, X, Y, 1.0) * hg_mode(n, X, Y, 1.0), 1.0) for n in range(11)]
         for m in range(11)]
    )
    np.testing.assert_allclose(gram, np.eye(11), atol=1e-10)


def test_g_coeff_values():
    assert g_coeff(0, 0.0) == 1.0
    assert g_coeff(3, 0.0) == 0.0
    assert g_coeff(1, 0.5) == pytest.approx(0.441248451292, rel=1e-11)


def test_g_coeff_1_matches_overlap_quadrature():
    # d = 2 omega gamma with gamma = 0.5 -> sources at -/+ 0.5
    val = grid_integral(lambda X, Y: hg_mode(1, X, Y, 1.0) * psf(X - 0.5, Y, 1.0), 1.0)
    assert val == pytest.approx(g_coeff(1, 0.5), rel=1e-10)


def test_g_coeff_log_space_continuity():
    for gamma in (0.3, 2.0, 6.0):
        direct = gamma**31 * math.exp(-gamma**2 / 2) / math.sqrt(math.factorial(31))
        assert g_coeff(31, gamma) == pytest.approx(direct, rel=1e-12)
    assert g_coeff(500, 20.0) > 0
    assert g_coeff(500, 0.1) == 0.0 or g_coeff(500, 0.1) < 1e-300


def test_g_coeff_negative_gamma():
    with pytest.raises(ParameterError):
        g_coeff(1, -0.1)


def test_g_coeff_deriv_examples():
    assert g_coeff_deriv(1, 0.0) == 1.0
    assert g_coeff_deriv(3, 0.0) == 0.0
    g = 0.7
    assert g_coeff_deriv(0, g) == pytest.approx(-g * math.exp(-g * g / 2), rel=1e-14)
    h = 1e-5
    fd = (g_coeff(2, 0.5 + h) - g_coeff(2, 0.5 - h)) / (2 * h)
    assert g_coeff_deriv(2, 0.5) == pytest.approx(fd, abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 20), st.floats(1e-3, 3.0))
def test_g_coeff_deriv_finite_difference(m, gamma):
    h = 1e-5
    fd = (g_coeff(m, gamma + h) - g_coeff(m, gamma - h)) / (2 * h)
    assert abs(g_coeff_deriv(m, gamma) - fd) < 1e-7


def test_overlap_p():
    assert overlap_p(0.0, 2.0) == 1.0
    assert overlap_p(1.0, 1.0) == pytest.approx(0.606530659713, rel=1e-12)
    assert overlap_p(100.0, 1.0) == 0.0


def test_overlap_p_quadrature():
    val = grid_integral(lambda X, Y: psf(X - 0.5, Y, 1.0) * psf(X + 0.5, Y, 1.0), 1.0)
    assert val == pytest.approx(overlap_p(1.0, 1.0), rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 4.0))
def test_mode_mass_normalization_and_parity(gamma):
    basis = ModeBasis.for_gamma(gamma, 1e-14)
    g2 = g_coeffs(basis.cutoff, gamma) ** 2
    assert abs(math.fsum(g2) - 1.0) < 1e-13
    signs = (-1.0) ** np.arange(basis.cutoff + 1)
    parity = math.fsum(signs * g2)
    assert parity == pytest.approx(overlap_p(2 * gamma, 1.0), abs=1e-13)


def test_a_coeff_examples(unit_optics):
    for m in range(6):
        assert a_coeff(m, 1.0, unit_optics, 0.0, 0.0) == pytest.approx((-1) ** m * g_coeff(m, 0.5), abs=1e-15)
    assert a_coeff(0, 0.0, unit_optics, 0.5, 0.0) == pytest.approx(math.exp(-0.5), rel=1e-14)


def test_a_coeff_numeric_examples(unit_optics):
    assert a_coeff_numeric(0, 0.0, unit_optics, 0.0, 0.0) == pytest.approx(1.0, abs=1e-13)
    optics = OpticsParams(kappa=0.8, omega=1.0)
    num = a_coeff_numeric(3, 1.0, optics, 0.5, math.pi / 3)
    closed = a_coeff(3, 1.0, optics, 0.5, math.pi / 3)
    assert abs(num - closed) / abs(closed) < 1e-8


def test_a_coeff_numeric_converged(unit_optics):
    q = Quadrature()
    coarse = a_coeff_numeric(4, 1.4, unit_optics, 0.3, 1.0, q)
    fine = a_coeff_numeric(4, 1.4, unit_optics, 0.3, 1.0, Quadrature(q.half_width, 2 * q.points))
    assert abs(coarse - fine) < 1e-10


def test_quadrature_limits():
    with pytest.raises(ParameterError):
        Quadrature(half_width=5)
    with pytest.raises(ParameterError):
        Quadrature(points=32)


def test_choose_cutoff_examples():
    assert choose_cutoff(0.0, 0.5) == 0
    assert choose_cutoff(0.0, 1e-15) == 0
    m = choose_cutoff(0.5, 1e-12)
    assert poisson_tail(0.5, m) < 1e-12 <= poisson_tail(0.5, m - 1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 3.0), st.sampled_from([1e-3, 1e-8, 1e-12, 1e-14]))
def test_choose_cutoff_is_minimal(gamma, tol):
    m = choose_cutoff(gamma, tol)
    # tiny slack where the incomplete-gamma tail and the direct sum round differently
    assert poisson_tail(gamma, m) < tol * (1 + 1e-9)
    if m > 0:
        assert poisson_tail(gamma, m - 1) >= tol * (1 - 1e-9)


def test_mode_basis_floor():
    assert ModeBasis.for_gamma(0.0).cutoff == 16
    assert ModeBasis.for_gamma(3.0, 1e-13).cutoff == choose_cutoff(3.0, 1e-13)
    with pytest.raises(ParameterError):
        ModeBasis(-1)
    with pytest.raises(ParameterError):
        ModeBasis(3, tail_tol=1.0)


@pytest.mark.parametrize("kwargs", [dict(kappa=0.0), dict(kappa=1.2), dict(omega=0.0)])
def test_optics_params_ranges(kwargs):
    with pytest.raises(ParameterError):
        OpticsParams(**kwargs)
