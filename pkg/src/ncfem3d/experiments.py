"""Convergence experiments.

``run_triharmonic`` solves, on every level,

1. the MWX biharmonic problem for ``w_h`` with load ``f``,
2. the nonconforming Stokes system with data ``hess_h w_h`` for
   ``(sigma_h, r_h, p_h)``,
3. the MWX biharmonic problem for ``u_h`` with data ``sigma_h``,

and reports errors against the exact solution.  ``run_stokes_only`` solves
step 2 alone with ``sigma = hess u``, ``p = 0``, ``g = -Laplace sigma``.
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import (assemble_biharmonic, assemble_hessian_coupling, assemble_load_scalar,
                       assemble_stokes, discrete_constraint_cells, export_matrix_market, restrict)
from .elements import build_dofmap, mwx_local_basis, sym_coeffs_to_matrix
from .errors import (CRField, ErrorReport, MWXField, cellwise_l2, error_h1_broken, error_h2_broken,
                     error_l2, jump_seminorm, p0_norm)
from .linsolve import Factorization, solve_saddle
from .manufactured import EXACT_SOLUTIONS
from .mesh import build_mesh, write_vtk
from .quadrature import tet_points, tet_rule

log = logging.getLogger(__name__)

DEFAULT_LEVELS = {"cube": [1, 2, 4, 8], "lshape": [2, 4, 8]}


class LevelError(RuntimeError):
    """A failure on one refinement level; the original error is ``__cause__``."""


class IdentityViolation(RuntimeError):
    """``curl_h sigma_h + dev grad_h r_h`` is not zero to the requested tolerance."""


@dataclass
class RunConfig:
    domain: str = "cube"
    levels: list = field(default_factory=lambda: list(DEFAULT_LEVELS["cube"]))
    mode: str = "triharmonic"
    solution: str = "sin3"
    quad_err: int = 6
    quad_load: int = 6
    solver_tol: float = 1e-10
    identity_tol: float = 1e-8
    solver: str = "auto"
    out: str | None = None
    format: str = "csv"
    export_vtk: str | None = None
    export_mtx: str | None = None

    def validate(self):
        if self.domain not in ("cube", "lshape"):
            raise ValueError(f"domain must be 'cube' or 'lshape', got {self.domain!r}")
        if self.mode not in ("triharmonic", "stokes"):
            raise ValueError(f"mode must be 'triharmonic' or 'stokes', got {self.mode!r}")
        if self.solution not in EXACT_SOLUTIONS:
            raise ValueError(f"unknown solution {self.solution!r}")
        if self.format not in ("csv", "md"):
            raise ValueError(f"format must be 'csv' or 'md', got {self.format!r}")
        levels = list(self.levels)
        if not levels or any(int(n) < 1 for n in levels):
            raise ValueError("levels must be positive integers")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if self.solver_tol <= 0 or self.identity_tol <= 0:
            raise ValueError("tolerances must be positive")
        for q in (self.quad_err, self.quad_load):
            if not 0 <= q <= 6:
                raise ValueError("quadrature degrees must lie in [0, 6]")
        return self


def _cell_means(mesh, func, degree, shape):
    pts, w = tet_points(mesh.vertices[mesh.tets], tet_rule(degree))
    vals = np.asarray(func(pts.reshape(-1, 3))).reshape(pts.shape[:2] + shape)
    return np.einsum("tq,tq...->t...", w, vals) / mesh.volumes.reshape((-1,) + (1,) * len(shape))


def _export_level(cfg, mesh, fields, stokes=None):
    if cfg.export_vtk:
        os.makedirs(cfg.export_vtk, exist_ok=True)
        write_vtk(os.path.join(cfg.export_vtk, f"{cfg.mode}-{mesh.name}.vtk"), mesh, cell_data=fields)
    if cfg.export_mtx and stokes is not None:
        os.makedirs(cfg.export_mtx, exist_ok=True)
        export_matrix_market(os.path.join(cfg.export_mtx, f"stokes-{mesh.name}.mtx"), stokes.matrix,
                             comment="blocks [sigma | r | p]")


def _stokes_errors(cfg, mesh, exact, stokes, sigma, r, p):
    sig = CRField(mesh, sym_coeffs_to_matrix(sigma))
    identity = cellwise_l2(mesh, discrete_constraint_cells(stokes, sigma, r))
    if identity > cfg.identity_tol:
        raise IdentityViolation(
            f"level {mesh.name}: ||curl_h sigma_h + dev grad_h r_h|| = {identity:.3e} > {cfg.identity_tol:g}")
    return {
        "err_sigma_l2": error_l2(mesh, sig, exact.hess, cfg.quad_err),
        "err_sigma_h1": error_h1_broken(mesh, sig, exact.third, cfg.quad_err),
        "jump_r": jump_seminorm(r, stokes.stiffness_vec, stokes.J),
        "norm_p": p0_norm(mesh, p),
        "identity_residual": identity,
    }, sig


def triharmonic_level(cfg: RunConfig, n: int) -> dict:
    exact = EXACT_SOLUTIONS[cfg.solution]()
    mesh = build_mesh(cfg.domain, n)
    t0 = time.perf_counter()

    mwx = build_dofmap(mesh, "mwx")
    basis = mwx_local_basis(mesh)
    K = restrict(assemble_biharmonic(mesh, mwx, basis), mwx, mwx)
    load = assemble_load_scalar(mesh, exact.f, mwx, basis, cfg.quad_load)
    fac = Factorization(K, "spd")
    try:
        w = mwx.expand(fac.solve(load[mwx.free], cfg.solver_tol))

        sym_map = build_dofmap(mesh, "cr-sym")
        coupling = assemble_hessian_coupling(mesh, sym_map, mwx, basis)
        stokes = assemble_stokes(mesh, sigma_load=coupling @ w)
        sigma, r, p = solve_saddle(stokes, cfg.solver_tol, cfg.solver)

        u = mwx.expand(fac.solve((coupling.T @ sigma)[mwx.free], cfg.solver_tol))
    finally:
        fac.free()

    rec, _ = _stokes_errors(cfg, mesh, exact, stokes, sigma, r, p)
    u_h = MWXField(mesh, u, mwx, basis)
    rec.update(
        n=n, h=mesh.h,
        err_u_h1=error_h1_broken(mesh, u_h, exact.grad, cfg.quad_err),
        err_u_h2=error_h2_broken(mesh, u_h, exact.hess, cfg.quad_err),
        n_unknowns=K.shape[0] * 2 + stokes.matrix.shape[0],
        seconds=time.perf_counter() - t0,
    )
    centroid = mesh.vertices[mesh.tets].mean(axis=1)[:, None, :]
    _export_level(cfg, mesh, {
        "u_h": u_h.evaluate(centroid, np.full((1, 4), 0.25), 0)[:, 0],
        "u": exact.u(centroid[:, 0]),
        "grad_u_h": u_h.evaluate(centroid, np.full((1, 4), 0.25), 1)[:, 0],
    }, stokes)
    log.info("triharmonic %s: %s", mesh.name, {k: v for k, v in rec.items() if k != "n"})
    return rec


def stokes_level(cfg: RunConfig, n: int) -> dict:
    exact = EXACT_SOLUTIONS[cfg.solution]()
    mesh = build_mesh(cfg.domain, n)
    t0 = time.perf_counter()
    g_cells = _cell_means(mesh, exact.stokes_load, cfg.quad_load, (3, 3))
    stokes = assemble_stokes(mesh, g_cells=g_cells)
    sigma, r, p = solve_saddle(stokes, cfg.solver_tol, cfg.solver)
    rec, sig = _stokes_errors(cfg, mesh, exact, stokes, sigma, r, p)
    rec.update(n=n, h=mesh.h, n_unknowns=stokes.matrix.shape[0],
               seconds=time.perf_counter() - t0)
    _export_level(cfg, mesh, {"p_h_norm": np.linalg.norm(p.reshape(-1, 8), axis=1)}, stokes)
    log.info("stokes %s: %s", mesh.name, {k: v for k, v in rec.items() if k != "n"})
    return rec


def run_triharmonic(cfg: RunConfig) -> ErrorReport:
    cfg.validate()
    report = ErrorReport("triharmonic", cfg.domain)
    for n in cfg.levels:
        try:
            report.add(triharmonic_level(cfg, int(n)))
        except Exception as exc:
            raise LevelError(f"{cfg.mode} on {cfg.domain}, n={n}: {exc}") from exc
    return report


def run_stokes_only(cfg: RunConfig) -> ErrorReport:
    cfg.validate()
    report = ErrorReport("stokes", cfg.domain)
    for n in cfg.levels:
        try:
            report.add(stokes_level(cfg, int(n)))
        except Exception as exc:
            raise LevelError(f"{cfg.mode} on {cfg.domain}, n={n}: {exc}") from exc
    return report


def run(cfg: RunConfig) -> ErrorReport:
    return run_triharmonic(cfg) if cfg.mode == "triharmonic" else run_stokes_only(cfg)
