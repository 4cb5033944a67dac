"""Sparse matrices and linear solves with a checked residual.

Matrices are ``scipy.sparse.csr_matrix``.  Triplets are reduced in sorted
(row, col) order so assembly is bit-reproducible.  Every solve verifies
``||A x - b|| <= tol * ||b||`` before returning and raises ``SolverError``
otherwise.

Direct factorizations use MKL PARDISO (through ``pypardiso``) when it can be
loaded: symmetric positive definite mode for SPD matrices and symmetric
indefinite mode with weighted matching for saddle-point systems.  Without MKL
the SPD path uses SuperLU and the saddle path a block-preconditioned MINRES.
"""
from __future__ import annotations

import glob
import logging
import os
import sys

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DIRECT_LIMIT = 300_000
ITERATIVE_TOL = 1e-9


class SolverError(RuntimeError):
    def __init__(self, message, residual=np.nan):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


def _load_pardiso():
    if "PYPARDISO_MKL_RT" not in os.environ:
        # pip installs libmkl_rt next to the interpreter's lib dirs, which
        # the dynamic loader does not always search
        for prefix in (sys.prefix, "/usr/local", os.path.expanduser("~/.local")):
            hits = sorted(glob.glob(os.path.join(prefix, "lib*", "libmkl_rt.so*")), key=len)
            if hits:
                os.environ["PYPARDISO_MKL_RT"] = hits[0]
                break
    try:
        from pypardiso import PyPardisoSolver
    except (ImportError, OSError) as exc:
        log.info("pypardiso unavailable (%s); using scipy solvers", exc)
        return None
    return PyPardisoSolver


_PARDISO = _load_pardiso()


def has_pardiso() -> bool:
    return _PARDISO is not None


def triplets_to_csr(rows, cols, vals, shape) -> sp.csr_matrix:
    """Compress COO triplets, summing duplicates in sorted-key order.

    Explicit zeros are kept, so a structural diagonal survives.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    if not (len(rows) == len(cols) == len(vals)):
        raise ValueError("triplet arrays differ in length")
    nrows, ncols = shape
    if len(rows) == 0:
        return sp.csr_matrix(shape)
    if rows.min() < 0 or cols.min() < 0 or rows.max() >= nrows or cols.max() >= ncols:
        raise ValueError("triplet index out of range")
    order = np.lexsort((cols, rows))
    r, c, v = rows[order], cols[order], vals[order]
    new = np.ones(len(r), dtype=bool)
    new[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
    starts = np.flatnonzero(new)
    data = np.add.reduceat(v, starts)
    r, c = r[starts], c[starts]
    indptr = np.zeros(nrows + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    np.cumsum(indptr, out=indptr)
    mat = sp.csr_matrix((data, c, indptr), shape=(nrows, ncols))
    mat.has_sorted_indices = True
    return mat


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def _upper_with_diagonal(A):
    """Upper triangle of symmetric ``A`` in CSR with every diagonal entry stored."""
    U = sp.triu(A, format="coo")
    n = A.shape[0]
    idx = np.arange(n)
    return triplets_to_csr(np.r_[U.row, idx], np.r_[U.col, idx], np.r_[U.data, np.zeros(n)], A.shape)


class Factorization:
    """Reusable direct factorization of a symmetric matrix.

    ``kind`` is ``"spd"`` or ``"indefinite"``.  ``solve`` applies up to
    ``refine`` steps of iterative refinement against the original matrix.
    """

    def __init__(self, A, kind="spd", refine=4):
        self.A = sp.csr_matrix(A)
        self.A.sort_indices()
        self.kind = kind
        self.refine = refine
        if _PARDISO is not None:
            self._solver = _PARDISO(mtype=2 if kind == "spd" else -2)
            if kind != "spd":
                # scaling + weighted matching, recommended for saddle points
                self._solver.set_iparm(11, 1)
                self._solver.set_iparm(13, 1)
            self._upper = _upper_with_diagonal(self.A)
            self._solver.factorize(self._upper)
            self.backend = "pardiso"
        else:
            self._lu = spla.splu(sp.csc_matrix(self.A), permc_spec="COLAMD")
            self.backend = "superlu"

    def _apply(self, b):
        if self.backend == "pardiso":
            return self._solver.solve(self._upper, b)
        return self._lu.solve(b)

    def solve(self, b, tol=1e-10):
        b = np.asarray(b, float)
        if not np.any(b):
            return np.zeros_like(b)
        x = self._apply(b)
        res = relative_residual(self.A, x, b)
        for _ in range(self.refine):
            if res <= 0.01 * tol:
                break
            x = x + self._apply(b - self.A @ x)
            res = relative_residual(self.A, x, b)
        if not np.isfinite(res) or res > tol:
            raise SolverError(f"{self.backend} {self.kind} solve did not reach tolerance", res)
        return x

    def free(self):
        if self.backend == "pardiso":
            self._solver.free_memory(everything=True)


def solve_spd(A, b, tol: float = 1e-10) -> np.ndarray:
    """Solve a symmetric positive definite system.

    Direct factorization up to ``DIRECT_LIMIT`` unknowns, Jacobi-preconditioned
    CG above that.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, float)
    if not np.any(b):
        return np.zeros_like(b)
    if A.shape[0] <= DIRECT_LIMIT:
        fac = Factorization(A, "spd")
        try:
            return fac.solve(b, tol)
        finally:
            fac.free()
    M = sp.diags(1.0 / A.diagonal())
    x, _ = spla.cg(A, b, rtol=tol, M=M, maxiter=20 * A.shape[0])
    res = relative_residual(A, x, b)
    if not np.isfinite(res) or res > tol:
        raise SolverError("CG did not reach tolerance", res)
    return x


def _amg_inverse(A):
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(A), symmetry="symmetric")
    return lambda r: ml.solve(r, tol=1e-14, maxiter=1, cycle="V")


def block_preconditioner(blocks):
    """Block-diagonal SPD preconditioner from a list of SPD diagonal blocks.

    Diagonal blocks are inverted exactly, the others by one AMG V-cycle.
    """
    appliers, offsets = [], [0]
    for blk in blocks:
        blk = sp.csr_matrix(blk)
        off = blk - sp.diags(blk.diagonal())
        if off.nnz == 0 or not np.any(off.data):
            d = blk.diagonal()
            appliers.append(lambda r, d=d: r / d)
        else:
            appliers.append(_amg_inverse(blk))
        offsets.append(offsets[-1] + blk.shape[0])
    n = offsets[-1]

    def matvec(r):
        r = np.asarray(r).ravel()
        return np.concatenate([f(r[a:b]) for f, a, b in zip(appliers, offsets[:-1], offsets[1:])])

    return spla.LinearOperator((n, n), matvec=matvec)


def solve_minres(K, rhs, preconditioner, tol=ITERATIVE_TOL, maxiter=20_000, restarts=10):
    """Preconditioned MINRES, restarted on the true residual.

    MINRES monitors the preconditioned residual, so the unpreconditioned
    contract is re-checked after every cycle.
    """
    x = np.zeros_like(rhs)
    nb = np.linalg.norm(rhs)
    res = 1.0
    for cycle in range(restarts):
        r = rhs - K @ x
        res = np.linalg.norm(r) / nb
        if res <= tol:
            break
        counter = [0]
        dx, info = spla.minres(K, r, M=preconditioner, rtol=1e-3 * tol / res, maxiter=maxiter,
                               callback=lambda _: counter.__setitem__(0, counter[0] + 1))
        x = x + dx
        log.info("MINRES cycle %d: %d iterations, info=%s", cycle, counter[0], info)
    res = relative_residual(K, x, rhs)
    log.info("MINRES: relative residual %.3e", res)
    if not np.isfinite(res) or res > tol:
        raise SolverError("MINRES did not reach tolerance", res)
    return x


def solve_saddle(system, tol: float = 1e-10, method: str = "auto"):
    """Solve an assembled Stokes system; returns ``(sigma, r, p)``.

    ``sigma`` is the full-length CR-sym vector (zeros on the boundary).
    ``method`` is ``"direct"``, ``"minres"`` or ``"auto"`` (direct when MKL is
    available and the system has at most ``DIRECT_LIMIT`` unknowns).
    """
    K = system.matrix
    rhs = system.rhs
    if method == "auto":
        small = K.shape[0] <= DIRECT_LIMIT
        method = "direct" if small and (has_pardiso() or K.shape[0] <= 20_000) else "minres"
    if not np.any(rhs):
        x = np.zeros(K.shape[0])
    elif method == "direct":
        fac = Factorization(K, "indefinite")
        try:
            x = fac.solve(rhs, tol)
        finally:
            fac.free()
    elif method == "minres":
        P = block_preconditioner([system.A_sigma, system.stiffness_vec + system.J,
                                  system.p_mass])
        tol = max(tol, ITERATIVE_TOL) if K.shape[0] > DIRECT_LIMIT else tol
        x = solve_minres(K, rhs, P, tol=tol)
        # alternate exact constraint projection and short corrections of the
        # rest of the residual; each round shrinks the constraint error ~1e3x
        for _ in range(6):
            x = _project_constraint(system.B, x, rhs[-system.B.shape[0]:])
            res = relative_residual(K, x, rhs)
            if res <= tol:
                break
            x = x + solve_minres(K, rhs - K @ x, P, tol=1e-3)
        if res > tol:
            raise SolverError("MINRES with constraint projection did not reach tolerance", res)
    else:
        raise ValueError(f"unknown method {method!r}")
    return system.split(x)


def _project_constraint(B, x, target, tol=1e-14):
    """Move the primal part of ``x`` onto ``B u = target`` along ``range(B^T)``.

    An iterative solve leaves a constraint residual of the order of its
    tolerance; this step removes it up to rounding.
    """
    import pyamg

    n = B.shape[1]
    u = x[:n]
    c = B @ u - target
    if not np.any(c):
        return x
    BBt = sp.csr_matrix(B @ B.T)
    ml = pyamg.smoothed_aggregation_solver(BBt, symmetry="symmetric")
    y = ml.solve(c, tol=tol, accel="cg", maxiter=500)
    out = x.copy()
    out[:n] = u - B.T @ y
    log.info("constraint projection: |Bu - b| %.3e -> %.3e", np.linalg.norm(c),
             np.linalg.norm(B @ out[:n] - target))
    return out
