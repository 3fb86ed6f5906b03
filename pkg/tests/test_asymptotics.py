import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import hermite as H
from scipy.special import roots_hermite

from shearmix.asymptotics import (MAX_DEGREE, HermiteExpansion, expansion_prediction,
                                  gauss_hermite, hermite_eval, hermite_functions,
                                  higher_order_expansion, inner_scale, multiply_by_X,
                                  multiply_by_X_power, rotated_eigenfunction, taylor_rescaled_Bk)
from shearmix.fourier import Grid, build_L
from shearmix.profiles import PolynomialProfile, ProfileError
from shearmix.spectral import asymptotic_seed, dense_spectrum


def hermite_oracle(beta, x):
    """G_beta from numpy's physicists' Hermite series and an explicit normalization."""
    c = np.zeros(beta + 1)
    c[beta] = 1.0
    norm = math.sqrt(2.0**beta * math.factorial(beta) * math.sqrt(math.pi))
    return H.hermval(x, c) * np.exp(-np.asarray(x) ** 2 / 2) / norm


@pytest.fixture
def cubic():
    # b = y^2/2 + y^3/6; critical points at 0 and -2
    return PolynomialProfile([0.0, 0.0, 0.5, 1 / 6], domain=(-20, 20), name="cubic")


def test_hermite_values_at_origin():
    assert hermite_eval(0, 0.0) == pytest.approx(np.pi ** -0.25, abs=1e-15)
    assert hermite_eval(0, 0.0) == pytest.approx(0.7511255, abs=1e-7)
    assert hermite_eval(1, 0.0) == 0.0


def test_hermite_matches_polynomial_oracle():
    x = np.linspace(-6, 6, 41)
    G = hermite_functions(20, x)
    for beta in range(21):
        np.testing.assert_allclose(G[beta], hermite_oracle(beta, x), rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("beta_max", [20, 30])
def test_hermite_orthonormal_under_quadrature(beta_max):
    x, w = gauss_hermite(200)
    P = hermite_functions(beta_max, x, weighted=False)
    gram = (P * w) @ P.T
    assert np.max(np.abs(gram - np.eye(beta_max + 1))) < 1e-10


def test_hermite_stable_far_out():
    x = np.array([0.0, 20.0, 40.0, 80.0])
    G = hermite_functions(MAX_DEGREE, x)
    assert np.all(np.isfinite(G))
    assert np.max(np.abs(G[:, -1])) < 1e-300 * 1e10


def test_hermite_degree_guard():
    with pytest.raises(ValueError, match="guard"):
        hermite_functions(MAX_DEGREE + 1, 0.0)


@pytest.mark.parametrize("alpha", [0, 1, 4])
def test_rotated_reduces_to_hermite_at_zero_angle(alpha):
    Y = np.linspace(-5, 5, 31)
    assert np.array_equal(rotated_eigenfunction(alpha, 0.0, Y), hermite_eval(alpha, Y + 0j))


@pytest.mark.parametrize("alpha", [0, 1, 2, 3])
def test_rotated_bilinear_normalization(alpha):
    Y = np.linspace(-30, 30, 60001)
    phi = rotated_eigenfunction(alpha, np.pi / 4, Y)
    assert abs(np.sum(phi**2) * (Y[1] - Y[0]) - 1) < 1e-8


@pytest.mark.parametrize("alpha,zeta", [(0, np.pi / 4), (1, np.pi / 4), (2, -np.pi / 4), (1, 0.3)])
def test_rotated_eigen_equation(alpha, zeta):
    h = 2e-3
    Y = np.arange(-8, 8, h)
    phi = rotated_eigenfunction(alpha, zeta, Y)
    d2 = (-phi[4:] + 16 * phi[3:-1] - 30 * phi[2:-2] + 16 * phi[1:-3] - phi[:-4]) / (12 * h * h)
    lam = -np.exp(1j * zeta) * (2 * alpha + 1)
    res = (lam + np.exp(2j * zeta) * Y[2:-2] ** 2) * phi[2:-2] - d2
    assert np.sqrt(np.sum(np.abs(res) ** 2) * h) < 1e-7


def test_rotated_angle_range():
    with pytest.raises(ValueError):
        rotated_eigenfunction(0, np.pi / 2, 0.0)


def test_rotation_consistency():
    Y = np.linspace(-4, 4, 17)
    z = np.pi / 4
    a = rotated_eigenfunction(0, z, Y)
    b = np.exp(1j * z / 4) * hermite_eval(0, np.exp(1j * z / 2) * Y)
    assert np.max(np.abs(a - b)) < 1e-12


def test_ladder_on_ground_state():
    out = multiply_by_X(HermiteExpansion.basis(0)).coeffs
    np.testing.assert_allclose(out, [0, 2**-0.5], atol=1e-15)


def test_ladder_on_first_state_against_quadrature():
    x, w = roots_hermite(400)
    P = hermite_functions(3, x, weighted=False)
    oracle = (P * w) @ (x * P[1])
    out = multiply_by_X(HermiteExpansion.basis(1)).padded(4)
    np.testing.assert_allclose(out, oracle, atol=1e-12)
    np.testing.assert_allclose(out[:3], [2**-0.5, 0, 1.0], atol=1e-15)


def test_second_moment():
    x, w = roots_hermite(400)
    P0 = hermite_functions(0, x, weighted=False)[0]
    oracle = np.sum(w * x**2 * P0**2)
    val = multiply_by_X_power(HermiteExpansion.basis(0), 2).coefficient(0)
    assert val == pytest.approx(0.5, abs=1e-15)
    assert oracle == pytest.approx(0.5, abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(coeffs=st.lists(st.floats(-2, 2), min_size=1, max_size=12),
       x=st.floats(-4, 4))
def test_ladder_is_multiplication(coeffs, x):
    e = HermiteExpansion(np.array(coeffs))
    assert multiply_by_X(e)(x) == pytest.approx(x * e(x), abs=1e-12)


def test_projection_recovers_basis_function():
    e = HermiteExpansion.from_function(lambda x: hermite_eval(3, x), 8)
    np.testing.assert_allclose(e.coeffs, np.eye(9)[3], atol=1e-12)


def test_expansion_arithmetic():
    a = HermiteExpansion.basis(0)
    b = HermiteExpansion.basis(2)
    np.testing.assert_allclose((a + 2 * b).coeffs, [1, 0, 2])


def test_inner_scale(sin_profile, deg2_profile):
    a, ell = inner_scale(sin_profile.critical_points()[0])
    assert (a, ell) == pytest.approx((0.5, 0.5 ** -0.25))
    with pytest.raises(ProfileError):
        inner_scale(deg2_profile.critical_points()[0])


def test_taylor_terms_sinusoidal(sin_profile):
    cp = sin_profile.critical_points()[0]
    assert np.max(np.abs(taylor_rescaled_Bk(sin_profile, cp, 1))) < 1e-15
    B2 = taylor_rescaled_Bk(sin_profile, cp, 2)
    # b''''(pi/2) = 1 and a = 1/2
    assert abs(B2[4] - 1 / (24 * 0.5)) < 1e-12
    assert np.count_nonzero(B2[:4]) == 0


def test_taylor_terms_cubic(cubic):
    cp = [c for c in cubic.critical_points() if abs(c.gamma) < 1e-9][0]
    B1 = taylor_rescaled_Bk(cubic, cp, 1)
    assert B1[3] == pytest.approx(1 / 3, abs=1e-14)


def test_taylor_order_checks(sin_profile):
    cp = sin_profile.critical_points()[0]
    with pytest.raises(ValueError):
        taylor_rescaled_Bk(sin_profile, cp, 0)
    with pytest.raises(ValueError):
        taylor_rescaled_Bk(sin_profile, cp, 7)


@pytest.mark.parametrize("alpha", [0, 1, 3])
def test_leading_eigenvalue(sin_profile, alpha):
    for cp in sin_profile.critical_points():
        res = higher_order_expansion(sin_profile, cp, alpha, 0)
        expected = -(2 * alpha + 1) * np.exp(1j * cp.sign * np.pi / 4)
        assert res.Lambda[0] == pytest.approx(expected, abs=1e-14)
        np.testing.assert_allclose(res.psi[0].coeffs, np.eye(alpha + 1)[alpha])


@pytest.mark.parametrize("j", [0, 1])
def test_odd_orders_vanish_for_even_profile(sin_profile, j):
    cp = sin_profile.critical_points()[j]
    res = higher_order_expansion(sin_profile, cp, 0, 4)
    assert res.Lambda[1] == 0 and res.Lambda[3] == 0
    assert res.Lambda[2] == pytest.approx(1 / 16, abs=1e-14)


def test_second_order_quadrature_oracle(sin_profile):
    # Lhat_2 = -beta_2 int X^4 G_0^2 with beta_2 = sgn(b'') b''''/(4! a)
    x, w = roots_hermite(400)
    P0 = hermite_functions(0, x, weighted=False)[0]
    m4 = np.sum(w * x**4 * P0**2)
    beta2 = -1 * 1 / (24 * 0.5)
    res = higher_order_expansion(sin_profile, sin_profile.critical_points()[0], 0, 2)
    assert res.Lambda[2] == pytest.approx(-beta2 * m4, abs=1e-12)


@pytest.mark.parametrize("alpha", [0, 2])
def test_no_alpha_component_in_corrections(sin_profile, cubic, alpha):
    for prof in (sin_profile, cubic):
        for cp in prof.critical_points():
            res = higher_order_expansion(prof, cp, alpha, 5)
            for k in range(1, 6):
                assert res.psi[k].coeffs[alpha] == 0


def test_cubic_profile_against_quadrature(cubic):
    cp = [c for c in cubic.critical_points() if abs(c.gamma) < 1e-9][0]
    res = higher_order_expansion(cubic, cp, 0, 2)
    assert res.Lambda[1] == 0
    assert abs(res.Lambda[2]) > 1e-3
    # independent Rayleigh-Schroedinger step by 400-point quadrature
    beta1 = 1 / 3
    x, w = roots_hermite(400)
    nb = 12
    P = hermite_functions(nb, x, weighted=False)
    f1 = (P * w) @ (beta1 * x**3 * P[0])  # <beta1 X^3 G_0, G_b>
    c1 = np.zeros(nb + 1)
    c1[1:] = -f1[1:] / (2.0 * np.arange(1, nb + 1))  # operator acts as -2 beta
    psi1 = c1 @ P
    lam2_hat = -np.sum(w * beta1 * x**3 * psi1 * P[0])
    assert res.Lambda[2] == pytest.approx(lam2_hat, abs=1e-10)
    np.testing.assert_allclose(res.psi[1].padded(nb + 1), c1, atol=1e-12)


def test_cubic_profile_against_dense_eigenvalue(cubic):
    cp = [c for c in cubic.critical_points() if abs(c.gamma) < 1e-9][0]
    shifted = cubic.shifted(-np.pi)  # critical point moved to y = pi, inside the grid
    res = higher_order_expansion(cubic, cp, 0, 2)
    eps = 1e-4
    ev = dense_spectrum(build_L(shifted, eps, Grid(512)), vectors=False)
    e0 = np.min(np.abs(ev - expansion_prediction(res, eps, 0)))
    e2 = np.min(np.abs(ev - expansion_prediction(res, eps, 2)))
    assert e2 < e0 / 3


def test_prediction_order_zero_is_seed(sin_profile):
    for cp in sin_profile.critical_points():
        for alpha in (0, 1, 2):
            res = higher_order_expansion(sin_profile, cp, alpha, 3)
            for eps in (1e-2, 1e-5):
                assert expansion_prediction(res, eps, 0) == \
                    pytest.approx(asymptotic_seed(sin_profile, cp, alpha, eps), abs=1e-15)


def test_second_order_beats_leading_order(sin_profile):
    cp = sin_profile.critical_points()[0]
    res = higher_order_expansion(sin_profile, cp, 0, 2)
    eps = 1e-3
    ev = dense_spectrum(build_L(sin_profile, eps, Grid(512)), vectors=False)
    e0 = np.min(np.abs(ev - expansion_prediction(res, eps, 0)))
    e2 = np.min(np.abs(ev - expansion_prediction(res, eps, 2)))
    assert e0 / e2 >= 3


def test_physical_corrections_conjugate_between_branches(sin_profile):
    a, b = sin_profile.critical_points()
    ra = higher_order_expansion(sin_profile, a, 1, 3)
    rb = higher_order_expansion(sin_profile, b, 1, 3)
    # near 3pi/2 the profile is exactly minus its expansion near pi/2
    np.testing.assert_allclose(ra.Lambda, np.conj(rb.Lambda), atol=1e-14)
    Y = np.linspace(-3, 3, 13)
    for k in range(4):
        np.testing.assert_allclose(ra.phi(k, Y), np.conj(rb.phi(k, Y)), atol=1e-13)


def test_order_and_degree_guards(sin_profile):
    cp = sin_profile.critical_points()[0]
    with pytest.raises(ValueError):
        higher_order_expansion(sin_profile, cp, 0, 7)
    with pytest.raises(OverflowError):
        higher_order_expansion(sin_profile, cp, 50, 5)
    res = higher_order_expansion(sin_profile, cp, 0, 2)
    with pytest.raises(ValueError):
        expansion_prediction(res, 1e-3, 3)


def test_report_json(sin_profile):
    res = higher_order_expansion(sin_profile, sin_profile.critical_points()[0], 0, 4)
    d = json.loads(res.to_json())
    assert d["branch"] == "-" and d["alpha"] == 0
    assert len(d["Lambda"]) == 5
    assert d["Lambda"][1] == {"re": 0.0, "im": 0.0}
    assert len(d["coefficients"]) == 5
