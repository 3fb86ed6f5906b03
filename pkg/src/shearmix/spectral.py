"""Eigenpairs of the discrete L_eps, the slow spectral window and projections.

L_eps is complex symmetric (``L^T = L``), so the natural pairing of eigenvectors
is the bilinear form ``int f g`` without conjugation; slow projections use it.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .asymptotics import (ExpansionResult, higher_order_expansion, inner_prediction,
                          inner_scale)
from .fourier import DiscreteOperator, Grid, SpectralField, build_L
from .profiles import CriticalPoint, ProfileError, ShearProfile

RESIDUAL_TOL = 1e-9
DEDUPE_TOL = 1e-8


class ConvergenceError(RuntimeError):
    pass


@dataclass
class EigenPair:
    lam: complex
    vector: SpectralField
    residual: float
    method: str = "dense"
    j: int | None = None
    alpha: int | None = None
    iterations: int = 0
    efn_error: float | None = None

    @property
    def matched(self) -> bool:
        return self.j is not None

    def to_dict(self) -> dict:
        return {"re": self.lam.real, "im": self.lam.imag, "j": self.j, "alpha": self.alpha,
                "residual": self.residual, "method": self.method, "efn_error": self.efn_error}


@dataclass
class SpectralWindow:
    eps: float
    q: float
    pairs: list
    anomalies: list = field(default_factory=list)
    n: int | None = None

    @property
    def threshold(self) -> float:
        return -self.q * np.sqrt(self.eps)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def __len__(self):
        return len(self.pairs)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "q": self.q, "n": self.n,
                "pairs": [p.to_dict() for p in self.pairs], "anomalies": self.anomalies}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _residual(op: DiscreteOperator, lam: complex, v: np.ndarray) -> float:
    return float(np.linalg.norm(op.matrix @ v - lam * v) / np.linalg.norm(v))


def _make_pair(op: DiscreteOperator, lam: complex, v: np.ndarray, method: str, iters=0) -> EigenPair:
    f = SpectralField(op.grid, v).normalized()
    return EigenPair(complex(lam), f, _residual(op, lam, f.values), method, iterations=iters)


def dense_spectrum(op: DiscreteOperator, vectors: bool = True) -> list[EigenPair] | np.ndarray:
    """Full spectrum by LAPACK (Hessenberg reduction and shifted QR).

    Returns pairs sorted by real part, descending; with ``vectors=False`` just
    the sorted eigenvalues.
    """
    if op.grid.n > 1024:
        raise ValueError("dense spectrum limited to n <= 1024")
    if not vectors:
        ev = sla.eigvals(op.matrix)
        return ev[np.argsort(-ev.real, kind="stable")]
    try:
        ev, V = sla.eig(op.matrix)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"QR iteration failed: {exc}") from exc
    order = np.argsort(-ev.real, kind="stable")
    return [_make_pair(op, ev[i], V[:, i], "dense") for i in order]


def asymptotic_seed(profile: ShearProfile, cp: CriticalPoint, alpha: int, eps: float) -> complex:
    """Leading-order slow eigenvalue ``-i b(gamma) - (eps a)^(1/2) (2 alpha + 1) e^{+-i pi/4}``.

    The sign in the exponent is ``sgn b''(gamma)``; ``a = |b''(gamma)/2|``.
    """
    a, _ = inner_scale(cp)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    rot = np.exp(1j * cp.sign * np.pi / 4)
    return complex(-1j * cp.value - np.sqrt(eps * a) * (2 * alpha + 1) * rot)


def shift_invert_eigen(op: DiscreteOperator, shift: complex, tol: float = 1e-11,
                       max_iter: int = 40, fixed_steps: int = 3, retries: int = 3,
                       v0: np.ndarray | None = None) -> EigenPair:
    """Inverse iteration on ``L - shift`` followed by Rayleigh-quotient updates.

    The quotient is the bilinear one ``v^T L v / v^T v``, which converges
    quadratically for complex-symmetric L. If the residual fails to decrease over
    10 iterations the run restarts from a shift moved halfway back toward the
    seed, at most ``retries`` times.
    """
    n = op.grid.n
    eye = np.eye(n)
    if v0 is None:
        v0 = np.random.default_rng(12345).standard_normal(n) + 0j
    seed = complex(shift)
    target = seed
    for attempt in range(retries + 1):
        lu = sla.lu_factor(op.matrix - target * eye, check_finite=False)
        if np.min(np.abs(np.diag(lu[0]))) < 1e-14 * np.linalg.norm(op.matrix, 1):
            raise ValueError(f"shift {target} is numerically an eigenvalue")
        v = v0 / np.linalg.norm(v0)
        lam = target
        history = []
        for it in range(1, max_iter + 1):
            w = sla.lu_solve(lu, v, check_finite=False)
            v = w / np.linalg.norm(w)
            Lv = op.matrix @ v
            vv = v @ v
            lam = (v @ Lv) / vv if abs(vv) > 1e-12 else np.vdot(v, Lv)
            res = float(np.linalg.norm(Lv - lam * v))
            history.append(res)
            if res < tol:
                return _make_pair(op, lam, v, "shift-invert", it)
            if it >= fixed_steps:
                lu = sla.lu_factor(op.matrix - lam * eye, check_finite=False)
            if len(history) > 10 and history[-1] >= min(history[-11:-1]):
                break
        # restart halfway between the seed and the last estimate
        target = seed + (lam - seed) / 2
        warnings.warn(f"shift-invert stalled near {lam:.6g}; retry {attempt + 1}", RuntimeWarning,
                      stacklevel=2)
    raise ConvergenceError(f"shift-invert did not converge from seed {seed}")


def _validate_window_profile(profile: ShearProfile) -> list[CriticalPoint]:
    cps = profile.critical_points()
    if not cps:
        raise ProfileError("profile has no critical points")
    for cp in cps:
        if cp.order != 1:
            raise ProfileError(f"degenerate critical point at {cp.gamma:g}; the window "
                               "needs non-degenerate points")
    speeds = sorted(cp.value for cp in cps)
    if np.any(np.diff(speeds) < 1e-8):
        raise ProfileError("wave speeds b(gamma_j) must be pairwise distinct")
    return cps


def window_seeds(profile: ShearProfile, eps: float, q: float):
    """All ``(j, alpha, seed)`` with ``(2 alpha + 1) cos(pi/4) a_j^(1/2) <= q + 1``."""
    cps = _validate_window_profile(profile)
    seeds = []
    for j, cp in enumerate(cps):
        a, _ = inner_scale(cp)
        alpha = 0
        while (2 * alpha + 1) * np.cos(np.pi / 4) * np.sqrt(a) <= q + 1:
            seeds.append((j, alpha, asymptotic_seed(profile, cp, alpha, eps)))
            alpha += 1
    return cps, seeds


def match_pair(pair: EigenPair, profile: ShearProfile, eps: float, seeds=None) -> EigenPair:
    """Attach (j, alpha) of the nearest seed within half the level spacing."""
    if seeds is None:
        _, seeds = window_seeds(profile, eps, q=10.0)
    cps = profile.critical_points()
    best = min(seeds, key=lambda s: abs(pair.lam - s[2]))
    a, _ = inner_scale(cps[best[0]])
    if abs(pair.lam - best[2]) <= np.sqrt(eps * a):
        pair.j, pair.alpha = best[0], best[1]
    return pair


def window_spectrum(profile: ShearProfile, eps: float, q: float, n: int = 512,
                    method: str = "shift-invert", workers: int = 1,
                    compare: bool = False) -> SpectralWindow:
    """Slow eigenpairs with ``Re lambda >= -q eps^(1/2)``.

    ``method="dense"`` takes the window directly from the full spectrum;
    ``"shift-invert"`` converges one pair per asymptotic seed.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    cps, seeds = window_seeds(profile, eps, q)
    grid = Grid(n)
    op = build_L(profile, eps, grid)
    thr = -q * np.sqrt(eps)
    anomalies = []
    if method == "dense":
        raw = [p for p in dense_spectrum(op) if p.lam.real >= thr]
    elif method == "shift-invert":
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            raw = list(pool.map(lambda s: shift_invert_eigen(op, s[2]), seeds))
        for (j, alpha, seed), p in zip(seeds, raw):
            p.j, p.alpha = j, alpha
    else:
        raise ValueError(f"unknown method {method!r}")

    pairs = []
    for p in raw:
        dup = next((r for r in pairs if abs(r.lam - p.lam) <= DEDUPE_TOL), None)
        if dup is not None:
            anomalies.append({"kind": "duplicate", "re": p.lam.real, "im": p.lam.imag,
                              "seeds": [[dup.j, dup.alpha], [p.j, p.alpha]]})
            continue
        pairs.append(p)
    for p in pairs:
        if method == "dense" or p.j is None:
            p.j = p.alpha = None
            match_pair(p, profile, eps, seeds)
        elif abs(p.lam - seeds[[s[:2] for s in seeds].index((p.j, p.alpha))][2]) > np.sqrt(
                eps * inner_scale(cps[p.j])[0]):
            p.j = p.alpha = None
            match_pair(p, profile, eps, seeds)
        if p.residual >= RESIDUAL_TOL:
            anomalies.append({"kind": "residual", "re": p.lam.real, "im": p.lam.imag,
                              "residual": p.residual})
        if compare and p.matched:
            p.efn_error = compare_eigenfunction(p, profile, cps[p.j], p.alpha, eps)
    pairs = sorted((p for p in pairs if p.lam.real >= thr),
                   key=lambda p: (-round(p.lam.real, 10), p.lam.imag))
    return SpectralWindow(eps, q, pairs, anomalies, n)


def signed_offset(profile: ShearProfile, y, gamma: float):
    d = np.asarray(y, dtype=float) - gamma
    if profile.periodic:
        d = np.mod(d + np.pi, 2 * np.pi) - np.pi
    return d


def predicted_eigenfunction(profile: ShearProfile, cp: CriticalPoint, alpha: int, eps: float,
                            grid: Grid, m: int = 0, expansion: ExpansionResult | None = None
                            ) -> SpectralField:
    """Inner prediction ``sum_{k<=m} l1^k Phi_k((y - gamma)/l1)`` on the grid."""
    res = expansion or higher_order_expansion(profile, cp, alpha, m)
    vals = inner_prediction(res, eps, grid.y, lambda y: signed_offset(profile, y, cp.gamma), m)
    return SpectralField(grid, vals)


def compare_eigenfunction(pair: EigenPair, profile: ShearProfile, cp: CriticalPoint,
                          alpha: int, eps: float) -> float:
    """L2 distance between the normalized numeric and predicted eigenfunctions
    after aligning the phase of the numeric one."""
    grid = pair.vector.grid
    pred = predicted_eigenfunction(profile, cp, alpha, eps, grid).normalized()
    v = pair.vector.normalized()
    ip = pred.inner(v)
    phase = ip / abs(ip) if abs(ip) > 0 else 1.0
    return (v * phase - pred).l2_norm()


def reflect_conjugate(f: SpectralField) -> SpectralField:
    """``y -> conj f(2 pi - y)`` on the grid."""
    return SpectralField(f.grid, np.conj(np.roll(f.values[::-1], 1)))


def slow_projection(f: SpectralField, window: SpectralWindow | list):
    """Bilinear projection ``c_j = int f phi_j / int phi_j^2`` on the window pairs.

    Returns ``(coefficients, reconstruction)``.
    """
    pairs = window.pairs if isinstance(window, SpectralWindow) else list(window)
    coeffs = []
    recon = np.zeros(f.grid.n, dtype=complex)
    for p in pairs:
        norm2 = p.vector.bilinear(p.vector)
        if abs(norm2) <= 1e-6:
            raise ValueError(f"pair at {p.lam:.6g} has int phi^2 = {abs(norm2):.2e}; "
                             "projection undefined near a defective eigenvalue")
        c = f.bilinear(p.vector) / norm2
        coeffs.append(complex(c))
        recon += c * p.vector.values
    return coeffs, SpectralField(f.grid, recon)


def traveling_wave_readout(pair: EigenPair) -> tuple[float, float]:
    """``(speed, decay) = (-Im lambda, Re lambda)`` of the mode ``e^{i(x - ct)} phi``."""
    return -pair.lam.imag, pair.lam.real


def eigenfunction_csv(path, pair: EigenPair, prediction: SpectralField | None = None):
    f = pair.vector
    pred = prediction.values if prediction is not None else np.full(f.grid.n, np.nan + 0j)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("y,re_phi,im_phi,re_pred,im_pred\n")
        for row in zip(f.grid.y, f.values.real, f.values.imag, pred.real, pred.imag):
            fh.write(",".join(f"{v:.12e}" for v in row) + "\n")
