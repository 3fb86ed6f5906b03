"""Command-line driver: ``shearmix {evolve,spectrum,asymptotics,kernel,verify}``.

Settings come from built-in defaults, then an optional sectioned key=value
config file (``[run]`` plus a section named after the subcommand), then
explicit flags. The merged settings are hashed; outputs go to
``<out>/<subcommand>/<hash>/`` and every file name carries the short hash.

Exit codes: 0 success, 1 acceptance failure, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import datetime as _dt
import hashlib
import json
import logging
import math
import operator
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import CRITERIA, run_suite
from .asymptotics import higher_order_expansion
from .evolution import EvolutionError, EvolveSpec, RegimeError, default_initial, evolve
from .fourier import Grid, NORM_CONVENTION
from .profiles import (ProfileError, enhanced_dissipation_time, get_profile,
                       profile_from_coefficients, profile_order)
from .resolvent import QuadratureError, SingularSolveError, default_sweep, verify_kernel_bounds
from .spectral import (ConvergenceError, eigenfunction_csv, predicted_eigenfunction,
                       window_spectrum)

log = logging.getLogger("shearmix")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (EvolutionError, RegimeError, ConvergenceError, SingularSolveError,
                  QuadratureError, np.linalg.LinAlgError, FloatingPointError, OverflowError)


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ parsing

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow, ast.USub: operator.neg,
        ast.UAdd: operator.pos}


def parse_number(text: str) -> float:
    """Arithmetic expression in numbers and ``pi`` (e.g. ``3*pi/2``)."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported expression {text!r}")
    try:
        return ev(ast.parse(str(text).strip(), mode="eval"))
    except SyntaxError:
        raise ValueError(f"cannot parse {text!r}") from None


def parse_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [parse_number(x) for x in str(text).split(",") if x.strip()]


def parse_coeffs(text: str):
    """``"eta:a:b,eta:a:b"`` -> Fourier terms."""
    terms = []
    for item in str(text).split(","):
        parts = item.strip().split(":")
        if len(parts) != 3:
            raise ValueError(f"coefficient term {item!r} must be eta:a:b")
        terms.append((int(parts[0]), parse_number(parts[1]), parse_number(parts[2])))
    return terms


DEFAULTS = {
    "run": {"profile": None, "coeffs": None, "max_order": 1, "n": None, "out": "out",
            "workers": None, "seed": 0},
    "evolve": {"kappa": 1e-4, "k": 1, "tend": None, "dt": 0.01, "cadence": 10,
               "scheme": "strang", "y_profile": "const"},
    "spectrum": {"eps": 0.01, "q": 3.0, "method": "shift-invert"},
    "asymptotics": {"gamma": None, "alpha": 0, "order": 4},
    "kernel": {"eps": "1e-2,1e-3,1e-4", "alpha": 0.0, "sigma0": 0.1, "dump": False},
    "verify": {"suite": "quick", "only": None},
}
DEFAULT_N = {"evolve": 256, "spectrum": 512, "asymptotics": 256, "kernel": 4096, "verify": 256}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shearmix", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"shearmix {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p, needs_profile=True):
        p.add_argument("--config", help="sectioned key=value file")
        p.add_argument("--out", default=S, help="output root (default: out)")
        p.add_argument("--workers", type=int, default=S, help="worker pool size")
        p.add_argument("--seed", type=int, default=S)
        p.add_argument("--n", type=int, default=S, help="grid size (power of two)")
        p.add_argument("-v", "--verbose", action="store_true")
        if needs_profile:
            p.add_argument("--profile", default=S,
                           help="sinusoidal|sin, degenerate2|deg2, zero, or custom")
            p.add_argument("--coeffs", default=S, help="custom profile terms eta:a:b,...")
            p.add_argument("--max-order", dest="max_order", type=int, default=S)

    p = sub.add_parser("evolve", help="time-step one x-mode and write diagnostics")
    common(p)
    p.add_argument("--kappa", type=float, default=S)
    p.add_argument("--k", type=int, default=S)
    p.add_argument("--tend", type=float, default=S, help="final time (default: T_e)")
    p.add_argument("--dt", type=float, default=S)
    p.add_argument("--cadence", type=int, default=S)
    p.add_argument("--scheme", choices=["strang", "eigenprop"], default=S)
    p.add_argument("--y-profile", dest="y_profile", choices=["const", "eiy"], default=S)

    p = sub.add_parser("spectrum", help="slow spectral window of L_eps")
    common(p)
    p.add_argument("--eps", type=float, default=S)
    p.add_argument("--q", type=float, default=S)
    p.add_argument("--method", choices=["shift-invert", "dense"], default=S)

    p = sub.add_parser("asymptotics", help="high-order inner expansion at a critical point")
    common(p)
    p.add_argument("--gamma", default=S, help="critical point, e.g. pi/2")
    p.add_argument("--alpha", type=int, default=S)
    p.add_argument("--order", type=int, default=S)

    p = sub.add_parser("kernel", help="fit the pointwise Airy kernel bounds")
    common(p)
    p.add_argument("--eps", default=S, help="comma-separated eps values")
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--sigma0", type=float, default=S)
    p.add_argument("--dump", action="store_true", default=S, help="write per-slice kernel CSVs")

    p = sub.add_parser("verify", help="run the acceptance suite")
    common(p, needs_profile=False)
    p.add_argument("--suite", choices=["quick", "full"], default=S)
    p.add_argument("--only", default=S, help="comma-separated criterion ids, e.g. AC-1,AC-9")
    return ap


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config file sections and explicit flags."""
    cmd = args.command
    cfg = dict(DEFAULTS["run"])
    cfg.update(DEFAULTS[cmd])
    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        if not cp.read(args.config, encoding="utf-8"):
            raise UsageError(f"cannot read config file {args.config}")
        for section in ("run", cmd):
            if cp.has_section(section):
                for key, val in cp.items(section):
                    key = key.replace("-", "_")
                    if key not in cfg:
                        raise UsageError(f"unknown key {key!r} in section [{section}]")
                    cfg[key] = val
    for key, val in vars(args).items():
        if key in cfg:
            cfg[key] = val
    if cfg["n"] is None:
        cfg["n"] = DEFAULT_N[cmd]
    cfg["command"] = cmd
    return _coerce(cfg)


_TYPES = {"n": int, "k": int, "cadence": int, "alpha": None, "order": int, "seed": int,
          "max_order": int, "workers": int, "kappa": float, "tend": float, "dt": float,
          "eps": None, "q": float, "sigma0": float}


def _coerce(cfg: dict) -> dict:
    for key, typ in _TYPES.items():
        val = cfg.get(key)
        if val is None or typ is None:
            continue
        cfg[key] = typ(parse_number(val)) if isinstance(val, str) else typ(val)
    cmd = cfg["command"]
    if cmd == "asymptotics" and cfg.get("alpha") is not None:
        cfg["alpha"] = int(cfg["alpha"])
    if cmd == "kernel":
        cfg["alpha"] = float(cfg["alpha"])
        cfg["eps"] = parse_list(cfg["eps"])
        cfg["dump"] = str(cfg["dump"]).lower() in ("1", "true", "yes", "on")
    if cmd == "spectrum":
        cfg["eps"] = float(parse_number(cfg["eps"]) if isinstance(cfg["eps"], str) else cfg["eps"])
    return cfg


def config_hash(cfg: dict) -> str:
    """sha256 over the settings that determine the results."""
    keep = {k: v for k, v in cfg.items() if k not in ("out", "workers", "config", "verbose")}
    blob = json.dumps(keep, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def load_profile(cfg: dict):
    name = cfg.get("profile")
    if not name:
        raise UsageError("a profile is required (--profile)")
    if name == "custom":
        if not cfg.get("coeffs"):
            raise UsageError("--profile custom needs --coeffs eta:a:b,...")
        return profile_from_coefficients(parse_coeffs(cfg["coeffs"]),
                                         max_order=int(cfg.get("max_order") or 1))
    try:
        return get_profile(name)
    except ProfileError as exc:
        raise UsageError(str(exc)) from None


# ------------------------------------------------------------------ outputs

class RunDir:
    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.short = self.hash[:12]
        self.path = Path(cfg["out"]) / cfg["command"] / self.short
        self.path.mkdir(parents=True, exist_ok=True)
        self.files = []

    def file(self, stem: str, ext: str) -> Path:
        p = self.path / f"{stem}-{self.short}.{ext}"
        self.files.append(p.name)
        return p

    def write_json(self, stem: str, payload: dict) -> Path:
        p = self.file(stem, "json")
        payload = {"config_hash": self.hash, **payload}
        p.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n", encoding="utf-8")
        return p

    def manifest(self, extra: dict | None = None, status: str = "ok"):
        data = {"config_hash": self.hash, "config": self.cfg, "version": __version__,
                "status": status, "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "files": self.files, "norm_convention": NORM_CONVENTION}
        if extra:
            data.update(extra)
        (self.path / "manifest.json").write_text(
            json.dumps(data, indent=2, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    return str(o)


# ------------------------------------------------------------------ commands

def cmd_evolve(cfg: dict) -> int:
    profile = load_profile(cfg)
    N = profile_order(profile)
    if cfg["kappa"] <= 0 and cfg["tend"] is None:
        raise UsageError("--tend is required when kappa = 0")
    # a shear-free profile decays on the plain diffusive time scale
    Te = (enhanced_dissipation_time(cfg["kappa"], N) if N >= 1 else 1 / cfg["kappa"]) \
        if cfg["kappa"] > 0 else math.inf
    tend = cfg["tend"] if cfg["tend"] is not None else float(math.ceil(Te))
    cfg["tend"] = tend
    grid = Grid(cfg["n"])
    yprof = (lambda y: np.exp(1j * y)) if cfg["y_profile"] == "eiy" else None
    spec = EvolveSpec(profile, cfg["kappa"], cfg["k"], default_initial(grid, yprof), tend,
                      cfg["dt"], cfg["cadence"], cfg["scheme"])
    run = RunDir(cfg)
    series, final = evolve(spec)
    series.to_csv(run.file("series", "csv"))
    final.to_csv(run.file("final-field", "csv"))
    run.manifest({"spec": spec.to_dict(), "N": N, "T_e": Te, "samples": int(series.t.size)})
    print(f"{series.t.size} samples, N={N}, T_e={Te:.6g} -> {run.path}")
    return EXIT_OK


def cmd_spectrum(cfg: dict) -> int:
    profile = load_profile(cfg)
    run = RunDir(cfg)
    w = window_spectrum(profile, cfg["eps"], cfg["q"], n=cfg["n"], method=cfg["method"],
                        workers=cfg["workers"] or os.cpu_count() or 1, compare=True)
    run.write_json("window", w.to_dict())
    cps = profile.critical_points()
    for i, pair in enumerate(w.pairs):
        pred = None
        if pair.matched:
            pred = predicted_eigenfunction(profile, cps[pair.j], pair.alpha, cfg["eps"],
                                           Grid(cfg["n"])).normalized()
            ip = pair.vector.normalized().inner(pred)
            if abs(ip) > 0:
                pred = pred * (ip / abs(ip))
        eigenfunction_csv(run.file(f"eigenfunction-{i:02d}", "csv"), pair, pred)
    run.manifest({"pairs": len(w), "anomalies": w.anomalies})
    print(f"{len(w)} pairs in window (Re >= {w.threshold:.4g}) -> {run.path}")
    for pair in w.pairs:
        print(f"  {pair.lam.real:+.10f} {pair.lam.imag:+.10f}i  j={pair.j} alpha={pair.alpha}  "
              f"res={pair.residual:.1e}")
    return EXIT_OK


def cmd_asymptotics(cfg: dict) -> int:
    profile = load_profile(cfg)
    if cfg["gamma"] is None:
        raise UsageError("--gamma is required")
    gamma = parse_number(cfg["gamma"])
    cps = profile.critical_points()
    if not cps:
        raise UsageError("profile has no critical points")
    cp = min(cps, key=lambda c: float(profile.distance(gamma, c.gamma)))
    if profile.distance(gamma, cp.gamma) > 1e-6:
        raise UsageError(f"no critical point at gamma={gamma:g}; have "
                         f"{[round(c.gamma, 6) for c in cps]}")
    try:
        res = higher_order_expansion(profile, cp, cfg["alpha"], cfg["order"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run = RunDir(cfg)
    run.write_json("expansion", res.to_dict())
    run.manifest({"gamma": cp.gamma})
    for k, lam in enumerate(res.Lambda):
        print(f"Lambda_{k} = {lam.real + 0.0:+.12g} {lam.imag + 0.0:+.12g}i")
    return EXIT_OK


def cmd_kernel(cfg: dict) -> int:
    profile = load_profile(cfg)
    sweep = default_sweep(profile, cfg["eps"], n=cfg["n"])
    fit = verify_kernel_bounds(profile, sweep, alpha=cfg["alpha"], sigma0=cfg["sigma0"],
                               n=cfg["n"], workers=cfg["workers"] or os.cpu_count() or 1)
    run = RunDir(cfg)
    run.write_json("boundfit", fit.to_dict())
    if cfg["dump"]:
        from .resolvent import solve_kernel
        for i, (eps, z, lam) in enumerate(fit.sweep):
            s = solve_kernel(profile, eps, lam, cfg["alpha"], cfg["sigma0"],
                             max(profile_order(profile), 0), z, cfg["n"])
            s.to_csv(run.file(f"kernel-{i:03d}", "csv"))
    run.manifest({"passed": fit.passed}, "ok" if fit.passed else "fail")
    print(f"{'PASS' if fit.passed else 'FAIL'}: c0={fit.c0} C={fit.C} C'={fit.C_deriv} "
          f"over {len(fit.sweep)} slices -> {run.path}")
    return EXIT_OK if fit.passed else EXIT_FAIL


def cmd_verify(cfg: dict) -> int:
    only = cfg.get("only")
    ids = [s.strip() for s in str(only).split(",")] if only else None
    if ids:
        bad = [i for i in ids if i not in CRITERIA]
        if bad:
            raise UsageError(f"unknown criteria {bad}; choose from {list(CRITERIA)}")
    run = RunDir(cfg)
    results = run_suite(cfg["suite"], ids, report=lambda r: print(r.line(), flush=True))
    run.write_json("verify", {"suite": cfg["suite"], "results": [r.to_dict() for r in results]})
    failed = [r.id for r in results if not r.passed]
    run.manifest({"failed": failed}, "fail" if failed else "ok")
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return EXIT_FAIL
    print(f"all {len(results)} criteria passed -> {run.path}")
    return EXIT_OK


COMMANDS = {"evolve": cmd_evolve, "spectrum": cmd_spectrum, "asymptotics": cmd_asymptotics,
            "kernel": cmd_kernel, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, ProfileError) as exc:
        parser.error(str(exc))  # exits with status 2
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        parser.error(str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
