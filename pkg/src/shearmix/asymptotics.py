"""Hermite functions and the high-order inner expansion of the slow eigenpairs.

Near a non-degenerate critical point ``gamma`` with ``a = |b''(gamma)/2|`` the
substitution ``y = gamma + l1 Y`` with ``l1 = ell * eps**(1/4)`` and
``ell = a**(-1/4)`` turns ``eps d_y^2 - i (b - b(gamma))`` into
``eps**(1/2) a**(1/2) (d_Y^2 - i sum_k l1**k B_k(Y))`` where
``B_k(Y) = b^(k+2)(gamma) / ((k+2)! a) Y^(k+2)``. The eigenvalue expands as
``lambda = -i b(gamma) + eps**(1/2) a**(1/2) sum_k l1**k Lambda_k``.

The corrections are computed in Hermite coefficient space after the complex
rotation ``Y = e^{-i zeta0/2} X`` with ``zeta0 = pi/4``, which turns the base
operator into the harmonic oscillator ``d_X^2 - X^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_hermite

from .profiles import CriticalPoint, ProfileError, ShearProfile

ZETA0 = np.pi / 4
MAX_ORDER = 6
MAX_DEGREE = 60


def _hermite_core(beta_max: int, x):
    """Normalized Hermite polynomials ``G_beta(x) e^{x^2/2}`` for beta <= beta_max.

    Returns ``(P, logscale)`` with ``G_beta e^{x^2/2} = P[beta] * exp(logscale)``;
    ``logscale`` keeps the recurrence finite at large |x| and degree.
    """
    x = np.asarray(x)
    dtype = complex if np.iscomplexobj(x) else float
    P = np.zeros((beta_max + 1,) + x.shape, dtype=dtype)
    logscale = np.zeros(x.shape)
    P[0] = np.pi ** -0.25
    if beta_max >= 1:
        P[1] = np.sqrt(2.0) * x * P[0]
    for b in range(1, beta_max):
        P[b + 1] = x * np.sqrt(2.0 / (b + 1)) * P[b] - np.sqrt(b / (b + 1)) * P[b - 1]
        big = np.abs(P[b + 1]) > 1e150
        if np.any(big):
            s = np.where(big, 1e-150, 1.0)
            P[: b + 2] *= s
            logscale = logscale + np.where(big, 150 * np.log(10.0), 0.0)
    return P, logscale


def hermite_functions(beta_max: int, x, weighted: bool = True) -> np.ndarray:
    """Array ``H[beta, ...] = G_beta(x)`` for ``0 <= beta <= beta_max``.

    ``G_beta(x) = (2^beta beta! sqrt(pi))^(-1/2) H_beta(x) e^{-x^2/2}``, evaluated by the
    normalized three-term recurrence. With ``weighted=False`` the Gaussian factor
    is omitted, which is what Gauss-Hermite quadrature needs.
    """
    if beta_max > MAX_DEGREE:
        raise ValueError(f"Hermite degree {beta_max} exceeds the guard {MAX_DEGREE}")
    x = np.asarray(x)
    P, logscale = _hermite_core(beta_max, x)
    expo = logscale - x * x / 2 if weighted else logscale + 0 * x
    return P * np.exp(expo)


def hermite_eval(alpha: int, x):
    """Normalized Hermite function G_alpha at real or complex x."""
    out = hermite_functions(alpha, x)[alpha]
    return out.item() if np.ndim(out) == 0 else out


def rotated_eigenfunction(alpha: int, zeta: float, Y):
    """``Phi_{alpha,zeta}(Y) = e^{i zeta/4} G_alpha(e^{i zeta/2} Y)``.

    Eigenfunction of ``d_Y^2 - e^{2 i zeta} Y^2`` with eigenvalue
    ``-e^{i zeta}(2 alpha + 1)``, normalized so that ``int Phi^2 dY = 1``.
    """
    if not -np.pi / 2 < zeta < np.pi / 2:
        raise ValueError("zeta must lie in (-pi/2, pi/2)")
    Y = np.asarray(Y)
    return np.exp(1j * zeta / 4) * hermite_eval(alpha, np.exp(1j * zeta / 2) * Y)


def gauss_hermite(n: int):
    """Gauss-Hermite nodes and weights for int e^{-x^2} g(x) dx."""
    return roots_hermite(n)


@dataclass
class HermiteExpansion:
    """Finite expansion ``sum_beta c_beta G_beta``."""

    coeffs: np.ndarray
    alpha: int = 0
    order: int = 0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.size - 1 > MAX_DEGREE:
            raise OverflowError("Hermite coefficient table exceeds the degree guard")

    @classmethod
    def basis(cls, alpha: int, size: int | None = None):
        c = np.zeros(max(alpha + 1, size or 0), dtype=complex)
        c[alpha] = 1.0
        return cls(c, alpha, 0)

    @classmethod
    def from_function(cls, fn, beta_max: int, n_quad: int = 200, alpha: int = 0):
        """Project ``fn`` on G_0..G_beta_max by Gauss-Hermite quadrature.

        ``fn`` must accept arrays and return ``g(x) e^{-x^2/2}``-type values;
        the product with G_beta is integrated exactly for polynomial ``g``.
        """
        x, w = gauss_hermite(n_quad)
        P = hermite_functions(beta_max, x, weighted=False)
        vals = fn(x) * np.exp(x * x / 2)
        return cls(P @ (w * vals), alpha, 0)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(max(size, self.coeffs.size), dtype=complex)
        out[: self.coeffs.size] = self.coeffs
        return out

    def __call__(self, x):
        return np.tensordot(self.coeffs, hermite_functions(self.degree, x), axes=1)

    def __add__(self, other: "HermiteExpansion"):
        n = max(self.coeffs.size, other.coeffs.size)
        return HermiteExpansion(self.padded(n) + other.padded(n), self.alpha, self.order)

    def __mul__(self, c):
        return HermiteExpansion(self.coeffs * c, self.alpha, self.order)

    __rmul__ = __mul__

    def coefficient(self, beta: int) -> complex:
        return complex(self.coeffs[beta]) if beta < self.coeffs.size else 0j


def multiply_by_X(expansion: HermiteExpansion) -> HermiteExpansion:
    """Ladder identity ``X G_beta = sqrt((beta+1)/2) G_{beta+1} + sqrt(beta/2) G_{beta-1}``."""
    c = expansion.coeffs
    out = np.zeros(c.size + 1, dtype=complex)
    beta = np.arange(c.size)
    out[1:] += np.sqrt((beta + 1) / 2) * c
    out[:-2] += np.sqrt(beta[1:] / 2) * c[1:]
    return HermiteExpansion(out, expansion.alpha, expansion.order)


def multiply_by_X_power(expansion: HermiteExpansion, p: int) -> HermiteExpansion:
    for _ in range(p):
        expansion = multiply_by_X(expansion)
    return expansion


def inner_scale(cp: CriticalPoint) -> tuple[float, float]:
    """``(a, ell)`` with ``a = |b''/2|`` and ``ell = a**(-1/4)``."""
    if cp.order != 1:
        raise ProfileError(f"critical point at {cp.gamma:g} is degenerate (order {cp.order})")
    a = abs(cp.curvature) / 2
    return a, a ** -0.25


def taylor_rescaled_Bk(profile: ShearProfile, cp: CriticalPoint, k: int) -> np.ndarray:
    """Power-series coefficients of ``B_k(Y)`` (index = power of Y).

    Only the ``Y^(k+2)`` entry is nonzero:
    ``b^(k+2)(gamma) / ((k+2)! |b''(gamma)/2|)``.
    """
    if k < 1:
        raise ValueError("k must be >= 1; the quadratic term is the base operator")
    if k > MAX_ORDER:
        raise ValueError(f"expansion order capped at {MAX_ORDER}")
    a, _ = inner_scale(cp)
    out = np.zeros(k + 3)
    out[k + 2] = float(profile.derivative(cp.gamma, k + 2)) / (math.factorial(k + 2) * a)
    return out


@dataclass
class ExpansionResult:
    """Coefficients of the inner expansion at one critical point and level.

    ``lambda_hat`` and ``psi`` are the rotated-variable quantities of the ``+``
    branch (``b'' > 0``); ``Lambda`` and :meth:`phi` return the physical ones
    for the actual branch ``sign``.
    """

    gamma: float
    value: float
    alpha: int
    sign: int
    a: float
    ell: float
    lambda_hat: list
    psi: list
    B: list = field(default_factory=list)
    zeta0: float = ZETA0

    @property
    def order(self) -> int:
        return len(self.lambda_hat) - 1

    @property
    def Lambda(self) -> list:
        out = []
        for k, lh in enumerate(self.lambda_hat):
            lam = np.exp(-1j * (k - 2) * self.zeta0 / 2) * lh
            out.append(lam if self.sign > 0 else np.conj(lam))
        return out

    def phi(self, k: int, Y):
        """Physical correction ``Phi_k(Y) = e^{i zeta0/4} e^{-i k zeta0/2} Psi_k(e^{i zeta0/2} Y)``."""
        Y = np.asarray(Y, dtype=float)
        val = (np.exp(1j * self.zeta0 / 4) * np.exp(-1j * k * self.zeta0 / 2)
               * self.psi[k](np.exp(1j * self.zeta0 / 2) * Y))
        return val if self.sign > 0 else np.conj(val)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "alpha": self.alpha,
            "branch": "+" if self.sign > 0 else "-",
            "Lambda": [{"re": float(np.real(v)), "im": float(np.imag(v))} for v in self.Lambda],
            "coefficients": [{"re": p.coeffs.real.tolist(), "im": p.coeffs.imag.tolist()}
                             for p in self.psi],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def higher_order_expansion(profile: ShearProfile, cp: CriticalPoint, alpha: int,
                           m: int) -> ExpansionResult:
    """Run the coefficient-space recursion up to order ``m``.

    In the rotated variable the k-th equation reads
    ``(d_X^2 - X^2 + 2 alpha + 1) Psi_k = sum_j Lhat_j Psi_{k-j} + sum_j beta_j X^(j+2) Psi_{k-j}``
    (sums over ``j >= 1``) with ``beta_j`` the ``B_j`` coefficient, sign-flipped on
    the ``-`` branch. Solvability fixes ``Lhat_k``; the operator on the left acts
    on G_beta as ``-2 (beta - alpha)``, which inverts the rest.
    """
    if not 0 <= m <= MAX_ORDER:
        raise ValueError(f"order must be in [0, {MAX_ORDER}]")
    if alpha + 3 * m > MAX_DEGREE:
        raise OverflowError("alpha + 3m exceeds the Hermite degree guard")
    a, ell = inner_scale(cp)
    s = cp.sign
    beta_eff = [0.0] + [s * taylor_rescaled_Bk(profile, cp, j)[j + 2] for j in range(1, m + 1)]
    lam_hat = [complex(-(2 * alpha + 1))]
    psi = [HermiteExpansion.basis(alpha)]
    for k in range(1, m + 1):
        size = alpha + 3 * k + 1
        forcing = np.zeros(size, dtype=complex)
        for j in range(1, k + 1):
            if beta_eff[j] != 0.0:
                forcing += beta_eff[j] * multiply_by_X_power(psi[k - j], j + 2).padded(size)[:size]
        lh = -forcing[alpha]
        rhs = -forcing
        for j in range(1, k):
            rhs -= lam_hat[j] * psi[k - j].padded(size)[:size]
        rhs[alpha] -= lh  # Lhat_k * Psi_0 removes the G_alpha component exactly
        coeffs = np.zeros(size, dtype=complex)
        beta = np.arange(size)
        off = beta != alpha
        coeffs[off] = rhs[off] / (2.0 * (beta[off] - alpha))
        if not np.all(np.isfinite(coeffs)):
            raise OverflowError("non-finite Hermite coefficients in the recursion")
        lam_hat.append(complex(lh))
        psi.append(HermiteExpansion(coeffs, alpha, k))
    B = [taylor_rescaled_Bk(profile, cp, j) for j in range(1, m + 1)]
    return ExpansionResult(cp.gamma, cp.value, alpha, s, a, ell, lam_hat, psi, B)


def expansion_prediction(result: ExpansionResult, eps: float, m: int | None = None) -> complex:
    """``-i b(gamma) + eps^(1/2) a^(1/2) sum_{k<=m} (ell eps^(1/4))^k Lambda_k``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = result.order if m is None else m
    if m > result.order:
        raise ValueError(f"result only holds terms up to order {result.order}")
    l1 = result.ell * eps**0.25
    total = sum(l1**k * lam for k, lam in enumerate(result.Lambda[: m + 1]))
    return complex(-1j * result.value + np.sqrt(eps * result.a) * total)


def inner_prediction(result: ExpansionResult, eps: float, y, distance_fn=None, m: int = 0):
    """Predicted eigenfunction ``sum_k l1^k Phi_k(Y)`` on physical points ``y``.

    ``distance_fn(y)`` must return the signed offset ``y - gamma`` (periodic
    wrapping is the caller's concern).
    """
    d = np.asarray(y, dtype=float) - result.gamma if distance_fn is None else distance_fn(y)
    l1 = result.ell * eps**0.25
    Y = d / l1
    return sum(l1**k * result.phi(k, Y) for k in range(m + 1))
