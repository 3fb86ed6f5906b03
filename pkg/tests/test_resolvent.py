import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from scipy import integrate

from shearmix.evolution import strang_step
from shearmix.fourier import Grid, SpectralField, build_L
from shearmix.profiles import regularized_derivative, sinusoidal
from shearmix.resolvent import (QuadratureError, gap_ratio, kernel_envelope,
                                laplace_reconstruct, monotone_norms, monotone_resolvent_check,
                                screened_poisson_diagonal, solve_kernel, solve_kernels,
                                spectral_gap_check, verify_kernel_bounds)


def lattice_green_diagonal(eps, n):
    """K(z,z) of (-eps D2 + 1) K = e_z / h summed over the stencil symbol."""
    h = 2 * np.pi / n
    mu = 4 * np.sin(np.pi * np.arange(n) / n) ** 2 / h**2
    return float(np.sum(1.0 / (1.0 + eps * mu)) / (n * h))


@pytest.mark.parametrize("eps", [1e-1, 1e-2])
def test_kernel_matches_lattice_green_function(zero, eps):
    n = 512
    s = solve_kernel(zero, eps, 0.0, 1.0, 0.0, 0, 0.0, n=n)
    assert abs(s.K_zz - lattice_green_diagonal(eps, n)) < 1e-10 * abs(s.K_zz)
    # translation invariance: the whole kernel is the circular convolution profile
    s2 = solve_kernel(zero, eps, 0.0, 1.0, 0.0, 0, Grid(n).y[100], n=n)
    np.testing.assert_allclose(np.roll(s.K, 100), s2.K, atol=1e-12)


def test_kernel_second_order_to_closed_form(zero):
    eps = 0.01
    exact = screened_poisson_diagonal(eps)
    errs = [abs(solve_kernel(zero, eps, 0.0, 1.0, 0.0, 0, 0.0, n=n).K_zz - exact)
            for n in (256, 512)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_closed_form_limits():
    # large eps: the mean mode dominates
    assert screened_poisson_diagonal(1e4) == pytest.approx(1 / (2 * np.pi), rel=1e-3)
    assert screened_poisson_diagonal(1e-4) == pytest.approx(50.0, rel=1e-12)


def test_kernel_is_symmetric(sin_profile):
    grid = Grid(1024)
    za, zb = grid.y[200], grid.y[700]
    a, b = solve_kernels(sin_profile, 1e-3, 0.3, [za, zb], alpha=0.2, n=1024)
    assert abs(a.K[700] - b.K[200]) < 1e-10 * abs(a.K[700])


def test_kernel_conjugation_under_negation(sin_profile):
    z = Grid(1024).y[300]
    s = solve_kernel(sin_profile, 1e-3, 0.4, 0.0, 0.1, 1, z, n=1024)
    t = solve_kernel(sin_profile.negated(), 1e-3, -0.4, 0.0, 0.1, 1, z, n=1024)
    np.testing.assert_allclose(t.K, np.conj(s.K), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("lam,alpha", [(1.0, 0.0), (0.0, 0.5), (-0.7, 0.05)])
def test_kernel_energy_identity(sin_profile, lam, alpha):
    s = solve_kernel(sin_profile, 1e-3, lam, alpha, 0.1, 1, np.pi / 2, n=2048)
    grad, shift_mass, re_kzz = s.energy_terms()
    assert grad - shift_mass == pytest.approx(re_kzz, rel=1e-9)
    assert s.residual < 1e-10


@settings(max_examples=40, deadline=None)
@given(y=st.floats(0, 2 * np.pi), z=st.floats(0, 2 * np.pi), lam=st.floats(-2, 2),
       eps=st.floats(1e-5, 1e-1))
def test_envelope_length_is_symmetric(y, z, lam, eps):
    p = sinusoidal()
    _, a = kernel_envelope(p, [y], z, lam, eps)
    _, b = kernel_envelope(p, [z], y, lam, eps)
    assert a[0] == pytest.approx(b[0], rel=1e-12)


def test_kernel_diagonal_tracks_amplitude(sin_profile):
    ratios = []
    for eps in (1e-2, 1e-3, 1e-4):
        s = solve_kernel(sin_profile, eps, 1.0, 0.0, 0.1, 1, np.pi / 2, n=4096)
        ratios.append(abs(s.K_zz) / s.A_z)
    assert 0.2 < min(ratios) and max(ratios) < 2.0
    assert max(ratios) / min(ratios) < 1.1


@pytest.mark.parametrize("eps", [1e-2, 1e-3, 1e-4])
def test_far_field_decay_rate(sin_profile, eps):
    s = solve_kernel(sin_profile, eps, 1.0, 0.0, 0.1, 1, np.pi / 2, n=4096)
    literal = np.sqrt(sin_profile.sigma_sharp) / np.sqrt(eps)
    assert s.far_field_rate() >= 0.1 * literal


@pytest.mark.parametrize("eps", [1e-2, 1e-3])
def test_far_field_rate_without_shear(zero, eps):
    s = solve_kernel(zero, eps, 0.0, 1.0, 0.0, 0, np.pi, n=4096)
    assert s.far_field_rate() == pytest.approx(1 / np.sqrt(eps), rel=0.2)


def test_verify_kernel_bounds_small_sweep(sin_profile):
    fit = verify_kernel_bounds(sin_profile, n=1024)
    assert fit.passed
    assert fit.c0 >= 0.05
    assert fit.margins["max_residual"] < 1e-9
    assert 0 < fit.margins["median_ratio_over_C"] <= 1


def test_gap_ratio_small_away_from_layer(sin_profile):
    grid = Grid(1024)
    # a bump at y = pi/2 where b = 1, tested at lambda = -1
    f = SpectralField(grid, np.exp(-((grid.y - np.pi / 2) / 0.2) ** 2))
    assert gap_ratio(sin_profile, f, -1.0, 1e-4) < 0.1


def test_gap_ratio_against_quadrature(sin_profile):
    eps, lam, w = 1e-3, 0.0, 0.3
    grid = Grid(2048)
    g = lambda y: np.exp(-((y - np.pi) / w) ** 2)  # noqa: E731
    dg = lambda y: -2 * (y - np.pi) / w**2 * g(y)  # noqa: E731
    f = SpectralField(grid, g(grid.y))
    got = gap_ratio(sin_profile, f, lam, eps)

    def quad(fun):
        return integrate.quad(fun, 0, 2 * np.pi, points=[np.pi, np.pi / 2, 3 * np.pi / 2],
                              limit=400, epsabs=1e-14)[0]

    B = lambda y: float(regularized_derivative(sin_profile, y, eps))  # noqa: E731
    lhs = np.sqrt(quad(lambda y: eps ** (1 / 3) * B(y) ** (2 / 3) * g(y) ** 2))
    pot = np.sqrt(quad(lambda y: abs(np.sin(y) - lam) * g(y) ** 2))
    grad = np.sqrt(eps * quad(lambda y: dg(y) ** 2))
    # kinks of |b - lam| and of the B' branches make the grid sum second order
    assert got == pytest.approx(lhs / (pot + grad), rel=1e-4)
    assert 0.01 < got < 1


@settings(max_examples=20, deadline=None)
@given(c=st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3), lam=st.floats(-1.5, 1.5))
def test_gap_ratio_homogeneous(c, lam):
    p = sinusoidal()
    grid = Grid(256)
    f = SpectralField.from_function(grid, lambda y: np.exp(np.cos(y)) + 1j * np.sin(2 * y))
    assert gap_ratio(p, f * c, lam, 1e-3) == pytest.approx(gap_ratio(p, f, lam, 1e-3), rel=1e-10)


def test_gap_ratio_scales_as_cube_root_of_sigma0(sin_profile, rng):
    grid = Grid(512)
    f = SpectralField(grid, rng.standard_normal(512) + 0j)
    r1 = gap_ratio(sin_profile, f, 0.2, 1e-3, sigma0=0.1)
    r8 = gap_ratio(sin_profile, f, 0.2, 1e-3, sigma0=0.8)
    assert r8 / r1 == pytest.approx(2.0, rel=1e-12)


def test_spectral_gap_check(sin_profile):
    res = spectral_gap_check(sin_profile, 1e-3, trials=100, n=512)
    assert res.passed
    assert res.sigma0_max == pytest.approx(0.1 / res.max_ratio**3, rel=1e-12)
    with pytest.raises(ValueError):
        spectral_gap_check(sin_profile, 1e-3, trials=50)


def test_monotone_norms_shift_invariant():
    base = monotone_norms(1e-3, tau=0.0)
    shifted = monotone_norms(1e-3, tau=0.5, half_width=20.0)
    np.testing.assert_allclose(shifted[:4], base[:4], rtol=1e-3)


def test_monotone_exponents():
    res = monotone_resolvent_check(eps_values=(1e-3, 1e-4, 1e-5))
    assert res.slope_f == pytest.approx(-1 / 3, abs=0.03)
    assert res.slope_df == pytest.approx(-2 / 3, abs=0.03)
    assert np.all(res.boundary_mass < 0.01)


def test_laplace_heat_mode(zero):
    grid = Grid(64)
    f = SpectralField.from_function(grid, lambda y: np.exp(1j * y))
    out = laplace_reconstruct(zero, 0.1, f, 1.0, N=0)
    exact = np.exp(-0.1) * f.values
    assert np.max(np.abs(out.field.values - exact)) < 1e-4


def test_laplace_matches_expm_and_strang(sin_profile, grid128):
    eps, t = 1e-2, 1.0
    f = SpectralField.from_function(grid128, lambda y: np.exp(-4 * (y - 2.0) ** 2) + 0j)
    out = laplace_reconstruct(sin_profile, eps, f, t)
    ref = sla.expm(t * build_L(sin_profile, eps, grid128).matrix) @ f.values
    assert np.linalg.norm(out.field.values - ref) / np.linalg.norm(ref) < 1e-5
    g = f
    for _ in range(100):
        g = strang_step(g, sin_profile, eps, 1, t / 100)
    strang = g.values * math.exp(eps * t)
    assert np.linalg.norm(out.field.values - strang) / np.linalg.norm(strang) < 1e-2


def test_laplace_is_linear(sin_profile, grid128):
    a = SpectralField.from_function(grid128, lambda y: np.cos(y) + 0j)
    b = SpectralField.from_function(grid128, lambda y: np.sin(3 * y) + 0j)
    kw = dict(dlam=0.05, lam_max=200.0, check=False)
    fa = laplace_reconstruct(sin_profile, 1e-2, a, 1.0, **kw).field
    fb = laplace_reconstruct(sin_profile, 1e-2, b, 1.0, **kw).field
    fab = laplace_reconstruct(sin_profile, 1e-2, a * 2 + b * 1j, 1.0, **kw).field
    assert (fab - (fa * 2 + fb * 1j)).l2_norm() < 1e-12


def test_laplace_guards(sin_profile, zero, grid128):
    f = SpectralField.from_function(grid128, lambda y: np.cos(y) + 0j)
    with pytest.raises(ValueError):
        laplace_reconstruct(sin_profile, 1e-2, f, 0.1)
    with pytest.raises(ValueError):
        laplace_reconstruct(sin_profile, 1e-2, SpectralField(Grid(1024), np.ones(1024) + 0j), 1.0)
    with pytest.raises(ValueError, match="spacing"):
        laplace_reconstruct(sin_profile, 1e-2, f, 1.0, dlam=1.0, lam_max=100.0)
    const = SpectralField(grid128, np.ones(128) + 0j)
    with pytest.raises(ValueError, match="separate"):
        laplace_reconstruct(zero, 0.1, const, 1.0, N=0)
    with pytest.raises(QuadratureError):
        laplace_reconstruct(sin_profile, 1e-2, f, 1.0, max_nodes=10)
