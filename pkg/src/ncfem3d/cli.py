"""Command-line driver for the convergence experiments.

Settings come from an optional flat config file (``key = value`` lines,
``#`` comments) and are overridden by command-line flags::

    ncfem3d --domain lshape --levels 2,4,8 --format md
    ncfem3d --config run.cfg --out table.csv
"""
from __future__ import annotations

import argparse
import logging
import sys

from .experiments import DEFAULT_LEVELS, RunConfig, run

MAX_DEFAULT_LEVEL = 8

# config key -> converter
_KEYS = {
    "domain": str,
    "levels": lambda s: parse_levels(s),
    "mode": lambda s: _normalize_mode(s),
    "solution": str,
    "quad_err": int,
    "quad_load": int,
    "solver_tol": float,
    "identity_tol": float,
    "solver": str,
    "out": str,
    "format": str,
    "export_vtk": str,
    "export_mtx": str,
}


def parse_levels(text: str) -> list[int]:
    try:
        levels = [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise ValueError(f"levels must be integers, got {text!r}") from None
    if not levels:
        raise ValueError("no levels given")
    return levels


def _normalize_mode(mode: str) -> str:
    return "stokes" if mode == "stokes-only" else mode


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file into ``RunConfig`` keyword arguments."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                out[key] = _KEYS[key](value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ncfem3d",
        description="Convergence tables for the nonconforming tensor Stokes and triharmonic solvers.")
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--domain", choices=["cube", "lshape"])
    p.add_argument("--levels", type=parse_levels, help="comma-separated n values, h = 1/n")
    p.add_argument("--mode", type=_normalize_mode, choices=["triharmonic", "stokes"],
                   help="full decoupled pipeline or the Stokes system alone ('stokes-only' accepted)")
    p.add_argument("--solution", help="manufactured solution (sin3 or zero)")
    p.add_argument("--quad-err", type=int, help="quadrature degree for error norms (<= 6)")
    p.add_argument("--quad-load", type=int, help="quadrature degree for loads (<= 6)")
    p.add_argument("--solver-tol", type=float, help="relative residual tolerance of every solve")
    p.add_argument("--solver", choices=["auto", "direct", "minres"])
    p.add_argument("--out", help="write the table here instead of stdout")
    p.add_argument("--format", choices=["csv", "md"])
    p.add_argument("--export-vtk", metavar="DIR", help="write per-level VTK files into DIR")
    p.add_argument("--export-mtx", metavar="DIR", help="write the Stokes matrices into DIR")
    p.add_argument("--allow-large", action="store_true",
                   help=f"permit levels above n={MAX_DEFAULT_LEVEL} (n=16 needs several GB)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def make_config(args: argparse.Namespace) -> RunConfig:
    values = read_config(args.config) if args.config else {}
    for key in _KEYS:
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if "levels" not in values:
        values["levels"] = list(DEFAULT_LEVELS[values.get("domain", "cube")])
    cfg = RunConfig(**values).validate()
    if max(cfg.levels) > MAX_DEFAULT_LEVEL and not args.allow_large:
        raise ValueError(f"levels above {MAX_DEFAULT_LEVEL} need --allow-large")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))

    try:
        report = run(cfg)
    except RuntimeError as exc:
        print(f"ncfem3d: {exc}", file=sys.stderr)
        return 1

    text = report.to_csv() if cfg.format == "csv" else report.to_markdown()
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
