"""Time stepping of one x-mode of the advection-diffusion equation.

The mode equation is ``d_t f + i k b(y) f = kappa (d_y^2 - k^2) f``. Both Strang
substeps are exact: the advection substep is a pointwise phase and the diffusion
substep a Fourier multiplier.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import special, stats

from .fourier import Grid, SpectralField, sobolev_norm
from .profiles import ShearProfile, enhanced_dissipation_time, profile_order


class EvolutionError(RuntimeError):
    """Non-finite norms or an otherwise failed integration."""


class RegimeError(ValueError):
    """A fit window does not lie in the regime it was asked to measure."""


SERIES_COLUMNS = ("t", "L2", "H1dot", "Hm1", "Hm1dot", "ell", "ellbar", "sup")


@dataclass
class EvolveSpec:
    profile: ShearProfile
    kappa: float
    k: int
    initial: SpectralField
    t_end: float
    dt: float = 0.01
    cadence: int = 10
    scheme: str = "strang"
    snapshots: bool = False

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.dt <= 0 or self.dt > self.t_end:
            raise ValueError("need 0 < dt <= t_end")
        if self.scheme not in ("strang", "eigenprop"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.cadence < 1 or self.n_steps % self.cadence:
            raise ValueError(f"cadence {self.cadence} must divide the step count {self.n_steps}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self) -> dict:
        prof = self.profile.to_dict() if hasattr(self.profile, "to_dict") else {"name": self.profile.name}
        return {"profile": prof, "kappa": self.kappa, "k": self.k, "t_end": self.t_end,
                "dt": self.dt, "cadence": self.cadence, "scheme": self.scheme,
                "n": self.initial.grid.n}


@dataclass
class DiagnosticsSeries:
    """Norm diagnostics sampled along a run; one array per column."""

    t: np.ndarray
    L2: np.ndarray
    H1dot: np.ndarray
    Hm1: np.ndarray
    Hm1dot: np.ndarray
    sup: np.ndarray
    snapshots: list = field(default_factory=list)

    @property
    def ell(self) -> np.ndarray:
        """L2 / H1dot; infinite for a field constant in y."""
        pos = self.H1dot > 0
        return np.where(pos, self.L2 / np.where(pos, self.H1dot, 1.0), np.inf)

    @property
    def ellbar(self) -> np.ndarray:
        return self.Hm1dot / self.L2

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def window(self, t0: float, t1: float) -> np.ndarray:
        return (self.t >= t0 - 1e-12) & (self.t <= t1 + 1e-12)

    def to_csv(self, path, header_comment: str | None = None):
        cols = [self.column(c) for c in SERIES_COLUMNS]
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write(",".join(SERIES_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(f"{v:.12e}" for v in row) + "\n")


def mode_diagnostics(f: SpectralField, k: int) -> tuple[float, float, float, float, float]:
    """(L2, H1dot, Hm1, Hm1dot, sup) of a single x-mode.

    ``Hm1dot`` is the (x, y)-homogeneous dual norm with multiplier
    ``(k^2 + eta^2)^(-1/2)``; for k >= 1 it needs no mean-zero condition in y.
    """
    return (f.l2_norm(), sobolev_norm(f, 1, homogeneous=True),
            sobolev_norm(f, -1), sobolev_norm(f, -1, homogeneous=True, k=k), f.sup_norm())


def strang_step(f: SpectralField, profile: ShearProfile, kappa: float, k: int, dt: float) -> SpectralField:
    """One Strang step: half advection, full diffusion, half advection."""
    grid = f.grid
    half = np.exp(-1j * k * profile(grid.y) * dt / 2)
    heat = np.exp(-kappa * (grid.eta**2 + k * k) * dt)
    v = half * f.values
    v = np.fft.ifft(heat * np.fft.fft(v))
    return SpectralField(grid, half * v)


class EigenPropagator:
    """Exact propagator exp(tM) of M = kappa (D^2 - k^2) - i k diag(b) by dense
    eigendecomposition; an oracle for n <= 1024."""

    def __init__(self, profile: ShearProfile, kappa: float, k: int, grid: Grid):
        if grid.n > 1024:
            raise ValueError("eigen-propagator limited to n <= 1024")
        M = kappa * (grid.second_derivative - k * k * np.eye(grid.n)) + 0j
        M[np.diag_indices(grid.n)] -= 1j * k * profile(grid.y)
        self.grid = grid
        self.evals, self.evecs = sla.eig(M)
        self.lu = sla.lu_factor(self.evecs)

    def __call__(self, f: SpectralField, t: float) -> SpectralField:
        c = sla.lu_solve(self.lu, f.values)
        return SpectralField(self.grid, self.evecs @ (np.exp(self.evals * t) * c))


def evolve(spec: EvolveSpec) -> tuple[DiagnosticsSeries, SpectralField]:
    """Run the mode equation and sample diagnostics every ``cadence`` steps."""
    f0 = spec.initial
    grid = f0.grid
    k = spec.k
    n_samples = spec.n_steps // spec.cadence + 1
    out = np.empty((n_samples, 5))
    times = np.arange(n_samples) * spec.cadence * spec.dt
    snaps = []

    def record(i, fld):
        vals = mode_diagnostics(fld, k)
        if not all(math.isfinite(v) for v in vals):
            raise EvolutionError(f"non-finite norm at t={times[i]:g}")
        out[i] = vals
        if spec.snapshots:
            snaps.append(fld)

    record(0, f0)
    if spec.scheme == "eigenprop":
        prop = EigenPropagator(spec.profile, spec.kappa, k, grid)
        for i in range(1, n_samples):
            record(i, prop(f0, times[i]))
        final = prop(f0, spec.t_end)
    else:
        b = spec.profile(grid.y)
        half = np.exp(-1j * k * b * spec.dt / 2)
        full = half * half
        heat = np.exp(-spec.kappa * (grid.eta**2 + k * k) * spec.dt)
        fft, ifft = np.fft.fft, np.fft.ifft
        v = f0.values.copy()
        for i in range(1, n_samples):
            # consecutive half-advections merge into one full phase inside a block
            v = half * v
            for _ in range(spec.cadence - 1):
                v = full * ifft(heat * fft(v))
            v = half * ifft(heat * fft(v))
            record(i, SpectralField(grid, v))
        final = SpectralField(grid, v)

    series = DiagnosticsSeries(times, out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4],
                               snapshots=snaps)
    return series, final


def default_initial(grid: Grid, y_profile=None) -> SpectralField:
    """k = 1 coefficient of exp(-|x - pi|^2) times a y-profile (default 1)."""
    # int_0^{2pi} exp(-(x-pi)^2) e^{-ix} dx / 2pi in closed form
    amp = -np.exp(-0.25) / (2 * np.sqrt(np.pi)) * special.erf(np.pi + 0.5j).real
    prof = np.ones(grid.n) if y_profile is None else y_profile(grid.y)
    return SpectralField(grid, amp * prof)


def fit_decay_exponent(series: DiagnosticsSeries, norm: str = "Hm1",
                       t_window: tuple[float, float] = (10.0, None), T_e: float | None = None):
    """Least-squares slope of log ||f|| against log t over ``t_window``.

    Returns ``(slope, stderr)``. When ``T_e`` is given, windows reaching past it
    mix the algebraic and exponential regimes and are rejected.
    """
    t0, t1 = t_window
    if t1 is None:
        t1 = series.t[-1]
    if T_e is not None and t1 > T_e:
        raise RegimeError(f"window end {t1:g} crosses the enhanced-dissipation time {T_e:g}")
    mask = series.window(t0, t1) & (series.t > 0)
    if mask.sum() < 10:
        raise RegimeError("need at least 10 samples in the fit window")
    res = stats.linregress(np.log(series.t[mask]), np.log(series.column(norm)[mask]))
    return float(res.slope), float(res.stderr)


def fit_late_rate(series: DiagnosticsSeries, kappa: float, k: int = 1, N: int = 1,
                  window: tuple[float, float] | None = None,
                  slow_projection: float | None = None, max_residual: float = 0.05) -> float:
    """Exponential decay rate of ``||f||_{L2} exp(kappa k^2 t)`` at late times.

    The default window is ``[2 T_e, t_end]``. The rate is positive for decay and
    compares with ``-Re`` of the slowest eigenvalue of the mode operator.
    """
    if window is None:
        window = (2 * enhanced_dissipation_time(kappa, N), series.t[-1])
    mask = series.window(*window)
    if mask.sum() < 10:
        raise RegimeError("need at least 10 samples in the late window")
    if slow_projection is not None and slow_projection < 1e-8:
        warnings.warn("initial datum barely projects on the slow modes; "
                      "the fitted rate reflects a faster mode", RuntimeWarning, stacklevel=2)
    t = series.t[mask]
    logn = np.log(series.L2[mask]) + kappa * k * k * t
    res = stats.linregress(t, logn)
    resid = logn - (res.intercept + res.slope * t)
    if np.max(np.abs(np.expm1(resid))) > max_residual:
        raise RegimeError("late window is not log-linear; exponential regime not reached")
    return float(-res.slope)


def evolve_profile(profile: ShearProfile, kappa: float, t_end: float, n: int = 256,
                   k: int = 1, dt: float = 0.01, cadence: int = 10, y_profile=None,
                   initial: SpectralField | None = None):
    """Convenience wrapper: build the default datum and run Strang."""
    grid = Grid(n)
    f0 = initial if initial is not None else default_initial(grid, y_profile)
    spec = EvolveSpec(profile, kappa, k, f0, t_end, dt, cadence)
    return evolve(spec)


def profile_Te(profile: ShearProfile, kappa: float) -> float:
    return enhanced_dissipation_time(kappa, max(profile_order(profile), 1))
