import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from shearmix.profiles import (FourierProfile, PolynomialProfile, ProfileError,
                               couette_truncated, enhanced_dissipation_time,
                               find_critical_points, get_profile, local_scales,
                               profile_from_coefficients, profile_order,
                               regularized_derivative)


def test_sinusoidal_critical_points(sin_profile):
    cps = find_critical_points(sin_profile)
    assert [cp.order for cp in cps] == [1, 1]
    assert cps[0].gamma == pytest.approx(np.pi / 2, abs=1e-14)
    assert cps[1].gamma == pytest.approx(3 * np.pi / 2, abs=1e-14)
    assert cps[0].value == pytest.approx(1.0) and cps[0].curvature == pytest.approx(-1.0)
    assert cps[1].value == pytest.approx(-1.0) and cps[1].curvature == pytest.approx(1.0)
    assert (cps[0].sign, cps[1].sign) == (-1, 1)


def test_degenerate2_critical_points(deg2_profile):
    # b' = cos y - cos 2y vanishes where cos y = cos 2y: y = 0, 2pi/3, 4pi/3
    cps = find_critical_points(deg2_profile)
    gam = [cp.gamma for cp in cps]
    np.testing.assert_allclose(gam, [0.0, 2 * np.pi / 3, 4 * np.pi / 3], atol=1e-12)
    assert [cp.order for cp in cps] == [2, 1, 1]
    assert cps[0].leading == pytest.approx(3.0, abs=1e-12)
    assert deg2_profile.derivative(0.0, 1) == pytest.approx(0.0, abs=1e-15)
    assert deg2_profile.derivative(0.0, 2) == pytest.approx(0.0, abs=1e-15)
    assert cps[1].value == pytest.approx(3 * math.sqrt(3) / 4, abs=1e-12)
    assert profile_order(deg2_profile) == 2


def test_couette_has_no_critical_points():
    assert find_critical_points(couette_truncated()) == []


def test_constant_profile_has_no_critical_points(zero):
    assert zero.critical_points() == []
    assert profile_order(zero) == 0


def test_order_beyond_declared_bound_rejected():
    p = profile_from_coefficients([(1, 0.0, 1.0), (2, 0.0, -0.5)], max_order=1)
    with pytest.raises(ProfileError, match="declared order"):
        find_critical_points(p)


def test_separation_violation_rejected():
    with pytest.raises(ProfileError, match="closer than"):
        find_critical_points(FourierProfile([(8, 0.0, 1.0)]))


def test_tol_range_checked(sin_profile):
    with pytest.raises(ValueError):
        find_critical_points(sin_profile, tol=1e-3)


@settings(max_examples=25, deadline=None)
@given(delta=st.floats(-3.0, 3.0))
@example(delta=1e-9)  # b' vanishes exactly on a scan node next to a double root
def test_critical_points_shift_covariant(delta):
    base = get_profile("degenerate2")
    shifted = base.shifted(delta)
    a = base.critical_points()
    b = shifted.critical_points()
    assert len(a) == len(b)
    for cp in a:
        match = [c for c in b if base.distance(c.gamma, cp.gamma - delta) < 1e-9]
        assert len(match) == 1 and match[0].order == cp.order


def test_regularized_derivative_near_branch(sin_profile):
    # 2 sigma0 (|y - gamma| + eps^(1/4)) at the critical point
    val = regularized_derivative(sin_profile, np.pi / 2, 1e-4, 0.1)
    assert val == pytest.approx(0.02, abs=1e-15)


def test_regularized_derivative_far_branch(sin_profile):
    ss = sin_profile.sigma_sharp
    y = np.pi / 2 + 3 * ss
    for eps in (1e-2, 1e-6):
        assert regularized_derivative(sin_profile, y, eps, 0.1) == \
            pytest.approx(0.2 * abs(math.cos(y)), abs=1e-15)


def test_regularized_derivative_annulus_midpoint(sin_profile):
    ss = sin_profile.sigma_sharp
    eps = 1e-3
    near = 0.2 * (ss + eps**0.25)
    far = 0.2 * abs(math.cos(np.pi / 2 + 2 * ss))
    mid = regularized_derivative(sin_profile, np.pi / 2 + 1.5 * ss, eps, 0.1)
    assert mid == pytest.approx((near + far) / 2, abs=1e-14)


@pytest.mark.parametrize("name", ["sinusoidal", "degenerate2"])
def test_regularized_derivative_positive_and_continuous(name):
    p = get_profile(name)
    y = np.linspace(0, 2 * np.pi, 20001)
    for eps in (1e-2, 1e-5):
        assert np.all(regularized_derivative(p, y, eps, 0.1) > 0)
    ss = p.sigma_sharp
    for cp in p.critical_points():
        for edge in (ss, 2 * ss):
            for side in (1, -1):
                lo = regularized_derivative(p, cp.gamma + side * (edge - 1e-13), 1e-3, 0.1)
                hi = regularized_derivative(p, cp.gamma + side * (edge + 1e-13), 1e-3, 0.1)
                assert abs(hi - lo) < 1e-12


def test_regularized_derivative_vanishing_floor(deg2_profile, sin_profile):
    # as eps -> 0 the near branch reduces to 2 sigma0 |y - gamma|^m
    for p, d in ((sin_profile, 0.3), (deg2_profile, 0.15)):
        for cp in p.critical_points():
            if p.distance(cp.gamma + d, cp.gamma) > p.sigma_sharp:
                continue
            val = regularized_derivative(p, cp.gamma + d, 1e-12, 0.1)
            assert val / (0.2 * d**cp.order) == pytest.approx(1.0, abs=0.01)


def test_local_scales_couette():
    T, L = local_scales(couette_truncated(), 0.3, 1e-6, 1)
    assert T == pytest.approx(1e2, rel=1e-12)
    assert L == pytest.approx(1e-2, rel=1e-12)


def test_local_scales_at_critical_point(sin_profile):
    T, L = local_scales(sin_profile, np.pi / 2, 1e-4, 1)
    assert T == pytest.approx(100.0, rel=1e-12)
    assert L == pytest.approx(0.1, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(y=st.floats(-15, 15), kappa=st.floats(1e-8, 1e-2), k=st.integers(1, 5))
def test_local_length_is_diffusive_length(y, kappa, k):
    T, L = local_scales(couette_truncated(), y, kappa, k)
    assert L == pytest.approx(math.sqrt(kappa * T), rel=1e-12)


def test_local_scales_annulus_rejected(sin_profile):
    with pytest.raises(ValueError, match="annulus"):
        local_scales(sin_profile, np.pi / 2 + 1.5 * sin_profile.sigma_sharp, 1e-4)


def test_enhanced_dissipation_time():
    assert enhanced_dissipation_time(1e-4, 1) == pytest.approx(100.0)
    assert enhanced_dissipation_time(1e-5, 2) == pytest.approx(1e-5 ** -0.6)


def test_profile_catalog_and_aliases():
    assert get_profile("sin").name == "sinusoidal"
    assert get_profile("deg2").name == "degenerate2"
    with pytest.raises(ProfileError):
        get_profile("nope")


def test_negated_profile_mirrors_values(sin_profile):
    neg = sin_profile.negated()
    a, b = sin_profile.critical_points(), neg.critical_points()
    assert [c.gamma for c in a] == pytest.approx([c.gamma for c in b])
    assert [c.value for c in a] == pytest.approx([-c.value for c in b])


def test_polynomial_profile_derivatives():
    p = PolynomialProfile([1.0, 2.0, 3.0])
    assert p.derivative(2.0, 0) == pytest.approx(17.0)
    assert p.derivative(2.0, 1) == pytest.approx(14.0)
    assert p.derivative(2.0, 2) == pytest.approx(6.0)
    assert not p.periodic


@settings(max_examples=30, deadline=None)
@given(y=st.floats(0, 2 * np.pi), k=st.integers(0, 5))
def test_fourier_derivatives_match_closed_form(y, k):
    p = get_profile("degenerate2")
    # d^k sin(a y) = a^k sin(a y + k pi/2)
    expected = math.sin(y + k * np.pi / 2) - 0.5 * 2**k * math.sin(2 * y + k * np.pi / 2)
    assert p.derivative(y, k) == pytest.approx(expected, abs=1e-12)
