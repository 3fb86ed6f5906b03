"""Shear profiles b(y), critical-point inventory and derived scale functions.

Built-in periodic profiles are stored as truncated Fourier series so that every
derivative is evaluated termwise in closed form. Non-periodic test profiles
(Couette, quadratic, cubic) are plain polynomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * np.pi


class ProfileError(ValueError):
    """A profile violates the structural assumptions (order bound, separation)."""


@dataclass(frozen=True)
class CriticalPoint:
    """A zero of b' classified by its order of vanishing.

    ``ell`` and ``tau`` are the inner length and time factors of a non-degenerate
    point: the slow modes live on the length ``ell * eps**0.25`` and relax on the
    time ``tau / eps**0.5``. Both are ``None`` when ``order > 1``.
    """

    gamma: float
    order: int
    value: float
    leading: float
    curvature: float
    ell: float | None = None
    tau: float | None = None

    @property
    def sign(self) -> int:
        """Sign of b''(gamma); selects the rotation branch of the inner problem."""
        return 1 if self.curvature > 0 else -1


class ShearProfile:
    """Base class: subclasses implement :meth:`derivative`."""

    name: str = "profile"
    periodic: bool = True
    sigma_sharp: float = np.pi / 8
    max_order: int = 1

    def derivative(self, y, k: int = 0):
        raise NotImplementedError

    def __call__(self, y):
        return self.derivative(y, 0)

    def prime(self, y):
        return self.derivative(y, 1)

    def distance(self, y, gamma):
        """Distance between points, periodic for periodic profiles."""
        d = np.abs(np.asarray(y, dtype=float) - gamma)
        if self.periodic:
            d = np.mod(d, TWO_PI)
            d = np.minimum(d, TWO_PI - d)
        return d

    def shifted(self, delta: float) -> "ShearProfile":
        """Profile y -> b(y + delta)."""
        return _ShiftedProfile(self, delta)

    def negated(self) -> "ShearProfile":
        """Profile y -> -b(y); same critical points, mirrored critical values."""
        return _NegatedProfile(self)

    def critical_points(self, tol: float = 1e-8) -> list[CriticalPoint]:
        cache = self.__dict__.setdefault("_cp_cache", {})
        if tol not in cache:
            cache[tol] = find_critical_points(self, tol)
        return cache[tol]

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"


class FourierProfile(ShearProfile):
    """b(y) = a0 + sum_eta (a_eta cos(eta y) + b_eta sin(eta y)).

    ``terms`` is a sequence of ``(eta, a_eta, b_eta)`` with positive integer eta.
    """

    def __init__(self, terms: Sequence[tuple[int, float, float]], name="custom",
                 sigma_sharp=np.pi / 8, max_order=1, mean=0.0):
        self.terms = tuple((int(e), float(a), float(b)) for e, a, b in terms)
        for eta, _, _ in self.terms:
            if eta < 1:
                raise ProfileError("Fourier wavenumbers must be positive integers")
        self.name = name
        self.sigma_sharp = float(sigma_sharp)
        self.max_order = int(max_order)
        self.mean = float(mean)
        self.periodic = True

    def derivative(self, y, k: int = 0):
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape, self.mean if k == 0 else 0.0)
        for eta, a, b in self.terms:
            # d^k/dy^k of cos and sin is a phase shift by k*pi/2
            phase = eta * y + k * np.pi / 2
            out = out + eta**k * (a * np.cos(phase) + b * np.sin(phase))
        return out

    def to_dict(self):
        return {"kind": "fourier", "name": self.name, "mean": self.mean,
                "terms": [list(t) for t in self.terms],
                "sigma_sharp": self.sigma_sharp, "max_order": self.max_order}


class PolynomialProfile(ShearProfile):
    """Polynomial b(y) = sum_j c_j y^j on a bounded interval (non-periodic)."""

    def __init__(self, coeffs: Sequence[float], domain=(-20.0, 20.0), name="polynomial",
                 sigma_sharp=np.pi / 8, max_order=1):
        self.poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
        self.domain = (float(domain[0]), float(domain[1]))
        self.name = name
        self.sigma_sharp = float(sigma_sharp)
        self.max_order = int(max_order)
        self.periodic = False

    def derivative(self, y, k: int = 0):
        y = np.asarray(y, dtype=float)
        return self.poly.deriv(k)(y) if k else self.poly(y)

    def to_dict(self):
        return {"kind": "polynomial", "name": self.name,
                "coeffs": self.poly.coef.tolist(), "domain": list(self.domain)}


class _ShiftedProfile(ShearProfile):
    def __init__(self, base: ShearProfile, delta: float):
        self.base = base
        self.delta = float(delta)
        self.name = f"{base.name}+shift({delta:g})"
        self.periodic = base.periodic
        self.sigma_sharp = base.sigma_sharp
        self.max_order = base.max_order
        if not base.periodic:
            self.domain = tuple(d - delta for d in base.domain)

    def derivative(self, y, k: int = 0):
        return self.base.derivative(np.asarray(y, dtype=float) + self.delta, k)


class _NegatedProfile(ShearProfile):
    def __init__(self, base: ShearProfile):
        self.base = base
        self.name = f"-{base.name}"
        self.periodic = base.periodic
        self.sigma_sharp = base.sigma_sharp
        self.max_order = base.max_order
        if not base.periodic:
            self.domain = base.domain

    def derivative(self, y, k: int = 0):
        return -self.base.derivative(y, k)


def sinusoidal() -> FourierProfile:
    return FourierProfile([(1, 0.0, 1.0)], name="sinusoidal", sigma_sharp=np.pi / 8, max_order=1)


def degenerate2() -> FourierProfile:
    return FourierProfile([(1, 0.0, 1.0), (2, 0.0, -0.5)], name="degenerate2",
                          sigma_sharp=np.pi / 16, max_order=2)


def couette_truncated(half_width: float = 20.0) -> PolynomialProfile:
    return PolynomialProfile([0.0, 1.0], domain=(-half_width, half_width),
                             name="couette-truncated", max_order=0)


def zero_profile() -> FourierProfile:
    """b = 0; no critical-point structure, used for control cases."""
    return FourierProfile([], name="zero", max_order=0)


BUILTIN_PROFILES = {
    "sinusoidal": sinusoidal,
    "degenerate2": degenerate2,
    "couette-truncated": couette_truncated,
    "zero": zero_profile,
}
ALIASES = {"sin": "sinusoidal", "couette": "couette-truncated", "deg2": "degenerate2"}


def get_profile(name: str) -> ShearProfile:
    key = ALIASES.get(name, name)
    try:
        return BUILTIN_PROFILES[key]()
    except KeyError:
        raise ProfileError(f"unknown profile {name!r}; choose from {sorted(BUILTIN_PROFILES)}") from None


def profile_from_coefficients(coeffs, name="custom", sigma_sharp=np.pi / 8, max_order=1):
    """Custom periodic profile from ``[(eta, a_eta, b_eta), ...]``."""
    return FourierProfile(coeffs, name=name, sigma_sharp=sigma_sharp, max_order=max_order)


def _classify(profile: ShearProfile, gamma: float, tol: float) -> CriticalPoint:
    N = profile.max_order
    order = None
    for j in range(1, N + 1):
        if abs(profile.derivative(gamma, j + 1)) > tol:
            order = j
            break
    if order is None:
        raise ProfileError(
            f"critical point at y={gamma:.12g} vanishes beyond the declared order N={N}")
    leading = float(profile.derivative(gamma, order + 1))
    curvature = float(profile.derivative(gamma, 2))
    ell = tau = None
    if order == 1:
        half = abs(curvature) / 2
        ell = half ** -0.25
        tau = half ** -0.5
    return CriticalPoint(gamma=float(gamma), order=order, value=float(profile(gamma)),
                         leading=leading, curvature=curvature, ell=ell, tau=tau)


def find_critical_points(profile: ShearProfile, tol: float = 1e-8,
                         n_scan: int = 4096) -> list[CriticalPoint]:
    """All zeros of b' on the profile's domain, sorted by location.

    Odd-multiplicity zeros are bracketed by sign changes of b'; even-multiplicity
    zeros are extrema of b' and are bracketed by sign changes of b''. A constant
    profile has no isolated critical points and returns an empty list.
    """
    if not 0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    if profile.periodic:
        lo, hi = 0.0, TWO_PI
        ys = np.linspace(lo, hi, n_scan + 1)
    else:
        lo, hi = profile.domain
        ys = np.linspace(lo, hi, n_scan + 1)
    if all(np.max(np.abs(profile.derivative(ys, k))) < tol for k in (1, 2, 3)):
        return []  # constant profile: no isolated critical points

    candidates = []
    for order_fn in (1, 2):
        vals = profile.derivative(ys, order_fn)
        for i in range(n_scan):
            a, b = ys[i], ys[i + 1]
            fa, fb = vals[i], vals[i + 1]
            if fa == 0.0:
                root = a
            elif fa * fb < 0:
                root = brentq(lambda x: float(profile.derivative(x, order_fn)), a, b,
                              xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
            else:
                continue
            if order_fn == 1:
                # Newton polish where the root is simple
                d2 = profile.derivative(root, 2)
                # Newton polish: on b' where the root is simple, else on b''
                k = 1 if abs(d2) > 1e-3 else 2
                if k == 1 or abs(profile.derivative(root, 3)) > 1e-3:
                    for _ in range(3):
                        step = profile.derivative(root, k) / profile.derivative(root, k + 1)
                        root = root - float(step)
                        if abs(step) < 1e-15:
                            break
            if abs(profile.derivative(root, 1)) < tol:
                candidates.append(float(root))

    if profile.periodic:
        candidates = [float(np.mod(c, TWO_PI)) for c in candidates]
        candidates = [0.0 if abs(c - TWO_PI) < 1e-12 else c for c in candidates]
    candidates.sort()
    unique: list[float] = []
    for c in candidates:
        if not unique or profile.distance(c, unique[-1]) > 1e-7:
            unique.append(c)
    if profile.periodic and len(unique) > 1 and profile.distance(unique[0], unique[-1]) <= 1e-7:
        unique.pop()

    points = [_classify(profile, g, tol) for g in unique]
    sep = 4 * profile.sigma_sharp
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if profile.distance(points[i].gamma, points[j].gamma) < sep:
                raise ProfileError(
                    f"critical points {points[i].gamma:.6g} and {points[j].gamma:.6g} "
                    f"are closer than 4*sigma_sharp={sep:.6g}")
    return points


def profile_order(profile: ShearProfile) -> int:
    """Maximal order N of the critical points (0 for monotone profiles)."""
    cps = profile.critical_points()
    return max((cp.order for cp in cps), default=0)


def regularized_derivative(profile: ShearProfile, y, eps: float, sigma0: float = 0.1):
    """Strictly positive surrogate |B'(y)| for |b'(y)|.

    Near an order-m critical point (distance <= sigma_sharp) it is
    ``2 sigma0 (|y - gamma|^m + eps^(m/(m+3)))``; beyond ``2 sigma_sharp`` of every
    critical point it is ``2 sigma0 |b'(y)|``; in between the two branch values
    are interpolated linearly in the distance.
    """
    y = np.asarray(y, dtype=float)
    out = 2 * sigma0 * np.abs(profile.prime(y))
    ss = profile.sigma_sharp
    for cp in profile.critical_points():
        m = cp.order
        floor = eps ** (m / (m + 3))
        d = profile.distance(y, cp.gamma)
        near = d <= ss
        out = np.where(near, 2 * sigma0 * (d**m + floor), out)
        ann = (d > ss) & (d < 2 * ss)
        if np.any(ann):
            # side of the critical point, to pick the far-branch endpoint
            offset = y - cp.gamma
            if profile.periodic:
                offset = np.mod(offset + np.pi, TWO_PI) - np.pi
            side = np.where(offset >= 0, 1.0, -1.0)
            v_near = 2 * sigma0 * (ss**m + floor)
            v_far = 2 * sigma0 * np.abs(profile.prime(cp.gamma + side * 2 * ss))
            w = (d - ss) / ss
            out = np.where(ann, (1 - w) * v_near + w * v_far, out)
    return out if out.ndim else float(out)


def local_scales(profile: ShearProfile, y: float, kappa: float, k: int = 1):
    """Local enhanced-dissipation time and length ``(T_loc, L_loc)`` at y.

    Within sigma_sharp of a critical point of order m the critical-point scales
    are returned; beyond 2*sigma_sharp the monotone scales. The annulus between
    is ambiguous and rejected.
    """
    if kappa <= 0 or k < 1:
        raise ValueError("need kappa > 0 and k >= 1")
    ss = profile.sigma_sharp
    for cp in profile.critical_points():
        d = float(profile.distance(y, cp.gamma))
        if d <= ss:
            m = cp.order
            c = k * abs(cp.leading)
            return (c ** (-2 / (m + 3)) * kappa ** (-(m + 1) / (m + 3)),
                    c ** (-1 / (m + 3)) * kappa ** (1 / (m + 3)))
        if d < 2 * ss:
            raise ValueError(
                f"y={y:g} lies in the interpolation annulus of the critical point "
                f"{cp.gamma:g}; choose a branch explicitly")
    g = k * abs(float(profile.prime(y)))
    return g ** (-2 / 3) * kappa ** (-1 / 3), g ** (-1 / 3) * kappa ** (1 / 3)


def enhanced_dissipation_time(kappa: float, N: int) -> float:
    """Constant-free enhanced-dissipation time kappa^(-(N+1)/(N+3))."""
    return kappa ** (-(N + 1) / (N + 3))


def taylor_coefficient(profile: ShearProfile, gamma: float, k: int) -> float:
    """b^(k)(gamma) / k!"""
    return float(profile.derivative(gamma, k)) / math.factorial(k)
