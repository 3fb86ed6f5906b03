"""Periodic grid, Fourier transforms, Sobolev norms and the discrete operators.

Coefficient convention: ``fhat[eta] = (1/n) sum_j f(y_j) exp(-i eta y_j)``, so
that ``||f||_{L2}^2 = 2 pi sum_eta |fhat[eta]|^2`` (discrete Parseval).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .profiles import ShearProfile

NORM_CONVENTION = ("fhat(eta) = (1/n) sum_j f(y_j) exp(-i eta y_j); "
                   "||f||_{H^s}^2 = 2pi sum_eta (1+eta^2)^s |fhat|^2")


class SingularOperatorWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 2pi) with n points (n a power of two, n >= 64)."""

    n: int

    def __post_init__(self):
        n = self.n
        if n < 64 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 64, got {n}")

    @cached_property
    def y(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n) / self.n

    @property
    def dy(self) -> float:
        return 2 * np.pi / self.n

    @cached_property
    def eta(self) -> np.ndarray:
        """Integer wavenumbers in FFT order; the set is {-n/2, ..., n/2 - 1}."""
        return np.fft.fftfreq(self.n, 1.0 / self.n)

    @cached_property
    def second_derivative(self) -> np.ndarray:
        """Dense Fourier second-derivative matrix (symmetric circulant)."""
        col = np.real(np.fft.ifft(-self.eta**2))
        return sla.circulant(col)

    def index_of(self, y: float) -> int:
        j = int(round((y % (2 * np.pi)) / self.dy)) % self.n
        if abs(((self.y[j] - y + np.pi) % (2 * np.pi)) - np.pi) > 1e-9:
            raise ValueError(f"y={y} is not a grid point")
        return j


class SpectralField:
    """Complex grid function for one x-Fourier mode."""

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n,):
            raise ValueError("field values must have shape (n,)")
        self.grid = grid
        self.values = values

    @classmethod
    def from_function(cls, grid: Grid, fn):
        return cls(grid, fn(grid.y))

    @classmethod
    def from_coefficients(cls, grid: Grid, coeffs):
        return cls(grid, np.fft.ifft(np.asarray(coeffs) * grid.n))

    @cached_property
    def coefficients(self) -> np.ndarray:
        return np.fft.fft(self.values) / self.grid.n

    def __add__(self, other):
        return SpectralField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return SpectralField(self.grid, self.values - _vals(other))

    def __mul__(self, c):
        return SpectralField(self.grid, self.values * c)

    __rmul__ = __mul__

    def inner(self, other) -> complex:
        """Sesquilinear L2 product <self, other> = int self * conj(other)."""
        return complex(np.sum(self.values * np.conj(_vals(other))) * self.grid.dy)

    def bilinear(self, other) -> complex:
        """int self * other (no conjugation)."""
        return complex(np.sum(self.values * _vals(other)) * self.grid.dy)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dy))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def derivative(self, order: int = 1) -> "SpectralField":
        eta = self.grid.eta.copy()
        if order % 2:
            eta[self.grid.n // 2] = 0.0
        return SpectralField.from_coefficients(self.grid, (1j * eta) ** order * self.coefficients)

    def shifted(self, steps: int) -> "SpectralField":
        """Translate by ``steps`` grid points: g(y) = f(y - steps*dy)."""
        return SpectralField(self.grid, np.roll(self.values, steps))

    def normalized(self) -> "SpectralField":
        return self * (1.0 / self.l2_norm())

    def sobolev_norm(self, s: float, homogeneous: bool = False, k: int = 0) -> float:
        return sobolev_norm(self, s, homogeneous, k)

    def to_csv(self, path):
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write("y,re,im\n")
            for yy, v in zip(self.grid.y, self.values):
                fh.write(f"{yy:.17g},{v.real:.17g},{v.imag:.17g}\n")

    def to_json(self) -> str:
        return json.dumps({"n": self.grid.n, "re": self.values.real.tolist(),
                           "im": self.values.imag.tolist()})

    @classmethod
    def from_json(cls, text: str):
        d = json.loads(text)
        return cls(Grid(d["n"]), np.asarray(d["re"]) + 1j * np.asarray(d["im"]))


def _vals(x):
    return x.values if isinstance(x, SpectralField) else np.asarray(x)


def sobolev_norm(f: SpectralField, s: float, homogeneous: bool = False, k: int = 0) -> float:
    """Fourier-multiplier Sobolev norm of a single x-mode.

    Inhomogeneous: ``(2pi sum (1 + eta^2)^s |fhat|^2)^(1/2)``. Homogeneous uses
    ``(k^2 + eta^2)^s`` instead, i.e. the (x, y) homogeneous norm restricted to
    the x-mode ``k``; for ``k = 0`` the eta = 0 term is dropped and negative s
    requires a mean-zero field.
    """
    c2 = np.abs(f.coefficients) ** 2
    eta2 = f.grid.eta**2
    if not homogeneous:
        w = (1.0 + eta2) ** s
    elif k != 0:
        w = (k * k + eta2) ** s
    else:
        if s < 0 and abs(f.coefficients[0]) >= 1e-10:
            raise ValueError("homogeneous negative-order norm needs a mean-zero field")
        w = np.zeros_like(eta2)
        nz = eta2 > 0
        w[nz] = eta2[nz] ** s
    return float(np.sqrt(2 * np.pi * np.sum(w * c2)))


@dataclass
class DiscreteOperator:
    """Dense matrix of L_eps or of the Airy-type operator, with metadata."""

    matrix: np.ndarray
    grid: Grid
    kind: str
    params: dict = field(default_factory=dict)
    near_singular: bool = False
    rcond: float | None = None

    def apply(self, f: SpectralField) -> SpectralField:
        return SpectralField(self.grid, self.matrix @ f.values)

    @cached_property
    def lu(self):
        return sla.lu_factor(self.matrix, check_finite=False)

    def solve(self, rhs):
        return sla.lu_solve(self.lu, _vals(rhs), check_finite=False)

    def reciprocal_condition(self) -> float:
        """LAPACK 1-norm reciprocal condition estimate from the LU factors."""
        lu, _ = self.lu
        anorm = np.linalg.norm(self.matrix, 1)
        rcond, info = lapack.zgecon(lu, anorm, norm="1")
        return float(rcond)


def build_L(profile: ShearProfile, eps: float, grid: Grid) -> DiscreteOperator:
    """Matrix of eps d^2/dy^2 - i b(y) with Fourier spectral differentiation."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    mat = eps * grid.second_derivative.astype(complex)
    mat[np.diag_indices(grid.n)] -= 1j * profile(grid.y)
    return DiscreteOperator(mat, grid, "L", {"eps": eps, "profile": profile.name})


def airy_shift(eps: float, sigma0: float, N: int) -> float:
    """The leftward spectral shift sigma0 * eps^((N+1)/(N+3))."""
    return sigma0 * eps ** ((N + 1) / (N + 3))


def build_A(profile: ShearProfile, eps: float, lam: float, alpha: float, sigma0: float,
            N: int, grid: Grid, check: bool = True) -> DiscreteOperator:
    """Matrix of -eps D^2 + (alpha - sigma0 eps^((N+1)/(N+3))) + i (b(y) - lam).

    With ``check`` the operator is flagged (and a warning emitted) when the
    reciprocal condition estimate falls below 1e-13.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    mat = -eps * grid.second_derivative.astype(complex)
    diag = alpha - airy_shift(eps, sigma0, N) + 1j * (profile(grid.y) - lam)
    mat[np.diag_indices(grid.n)] += diag
    op = DiscreteOperator(mat, grid, "A", {"eps": eps, "lam": lam, "alpha": alpha,
                                           "sigma0": sigma0, "N": N, "profile": profile.name})
    if check:
        op.rcond = op.reciprocal_condition()
        if op.rcond < 1e-13:
            op.near_singular = True
            warnings.warn(f"Airy operator nearly singular (rcond={op.rcond:.2e}) at "
                          f"lam={lam}, eps={eps}", SingularOperatorWarning, stacklevel=2)
    return op
