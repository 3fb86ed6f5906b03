"""Numerical laboratory for passive-scalar mixing and enhanced dissipation in
shear flows ``u = (b(y), 0)`` on the periodic channel."""

__version__ = "0.1.0"

from .profiles import (CriticalPoint, ProfileError, ShearProfile, degenerate2,
                       find_critical_points, get_profile, profile_from_coefficients,
                       sinusoidal)
from .fourier import Grid, SpectralField, build_A, build_L, sobolev_norm
from .evolution import EvolveSpec, evolve, fit_decay_exponent, fit_late_rate
from .asymptotics import higher_order_expansion, expansion_prediction
from .spectral import dense_spectrum, shift_invert_eigen, window_spectrum
from .resolvent import (laplace_reconstruct, monotone_resolvent_check, solve_kernel,
                        spectral_gap_check, verify_kernel_bounds)

__all__ = [
    "CriticalPoint", "ProfileError", "ShearProfile", "degenerate2", "find_critical_points",
    "get_profile", "profile_from_coefficients", "sinusoidal", "Grid", "SpectralField",
    "build_A", "build_L", "sobolev_norm", "EvolveSpec", "evolve", "fit_decay_exponent",
    "fit_late_rate", "higher_order_expansion", "expansion_prediction", "dense_spectrum",
    "shift_invert_eigen", "window_spectrum", "laplace_reconstruct",
    "monotone_resolvent_check", "solve_kernel", "spectral_gap_check", "verify_kernel_bounds",
]
