"""Local bases and global numbering of the discrete spaces.

Spaces (``DofMap.space``):

``cr``      scalar Crouzeix-Raviart, one face average per face, boundary faces fixed to 0
``cr-vec``  vector CR, 3 per face (face-major), no boundary condition
``cr-sym``  symmetric-tensor CR, 6 per face in ``SYM_BASIS`` coordinates, boundary fixed to 0
``p0-tl``   piecewise constant traceless tensors, 8 per tet in ``TLESS_BASIS`` coordinates
``mwx``     Morley-Wang-Xu quadratics: face normal-derivative integrals (global
            normal) then edge integrals; all boundary DoFs fixed to 0

CR coefficients are face *averages*, so the local CR basis is
``phi_i = 1 - 3 lambda_i`` for the face opposite vertex i.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import LOCAL_EDGES, LOCAL_FACES, Mesh
from .quadrature import tet_points, tet_rule, tri_rule
from .tensor_ops import SYM_BASIS, TLESS_BASIS, to_tless

SPACES = ("cr", "cr-vec", "cr-sym", "p0-tl", "mwx")
_CR_WIDTH = {"cr": 1, "cr-vec": 3, "cr-sym": 6}

# monomial exponents of the scaled P2 basis: 1, x, y, z, x^2, y^2, z^2, xy, xz, yz
P2_EXPONENTS = np.array([
    [0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1],
    [2, 0, 0], [0, 2, 0], [0, 0, 2],
    [1, 1, 0], [1, 0, 1], [0, 1, 1],
])


@dataclass(frozen=True)
class DofMap:
    """Global numbering of one discrete space on a mesh."""

    space: str
    n_dofs: int
    cell_dofs: np.ndarray  # (nt, local dofs)
    constrained: np.ndarray  # (n_dofs,) bool, True where the DoF is fixed to 0

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.constrained)

    @property
    def n_free(self) -> int:
        return int((~self.constrained).sum())

    @property
    def free_index(self) -> np.ndarray:
        """Map global DoF -> position among free DoFs (-1 if constrained)."""
        idx = np.full(self.n_dofs, -1, dtype=np.int64)
        idx[self.free] = np.arange(self.n_free)
        return idx

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        """Scatter free-DoF values into a full vector with zeros on constrained DoFs."""
        full = np.zeros(self.n_dofs)
        full[self.free] = reduced
        return full


def build_dofmap(mesh: Mesh, space: str) -> DofMap:
    nf, nt = mesh.n_faces, mesh.n_tets
    if space in _CR_WIDTH:
        k = _CR_WIDTH[space]
        cell = (k * mesh.tet_faces[:, :, None] + np.arange(k)).reshape(nt, 4 * k)
        constrained = np.zeros(k * nf, dtype=bool)
        if space != "cr-vec":
            constrained = np.repeat(mesh.boundary_faces, k)
        return DofMap(space, k * nf, cell, constrained)
    if space == "p0-tl":
        cell = (8 * np.arange(nt)[:, None] + np.arange(8))
        return DofMap(space, 8 * nt, cell, np.zeros(8 * nt, dtype=bool))
    if space == "mwx":
        cell = np.hstack([mesh.tet_faces, nf + mesh.tet_edges])
        constrained = np.concatenate([mesh.boundary_faces, mesh.boundary_edges])
        return DofMap(space, nf + mesh.n_edges, cell, constrained)
    raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")


# ---------------------------------------------------------------------------
# Crouzeix-Raviart


@dataclass(frozen=True)
class CRBasis:
    """``phi_i = 1 - 3 lambda_i`` on every tet; gradients are constant."""

    grads: np.ndarray  # (nt, 4, 3)

    @staticmethod
    def values(bary):
        """Shape function values at barycentric points (nq, 4) -> (nq, 4)."""
        return 1.0 - 3.0 * np.asarray(bary)


def cr_local_basis(mesh: Mesh, tol: float = 1e-14) -> CRBasis:
    if np.any(mesh.volumes <= tol * mesh.tet_diameters ** 3):
        raise ValueError("degenerate tetrahedron in CR basis construction")
    return CRBasis(-3.0 * mesh.bary_grads)


# ---------------------------------------------------------------------------
# Morley-Wang-Xu


def _p2_values(xi):
    """Scaled monomials at local points xi (..., 3) -> (..., 10)."""
    xi = np.asarray(xi, float)
    return np.prod(xi[..., None, :] ** P2_EXPONENTS, axis=-1)


def _p2_grads(xi):
    """Gradients of the monomials w.r.t. xi: (..., 10, 3)."""
    xi = np.asarray(xi, float)
    g = np.zeros(xi.shape[:-1] + (10, 3))
    for d in range(3):
        g[..., 1 + d, d] = 1.0
        g[..., 4 + d, d] = 2.0 * xi[..., d]
    for k, (a, b) in enumerate(((0, 1), (0, 2), (1, 2))):
        g[..., 7 + k, a] = xi[..., b]
        g[..., 7 + k, b] = xi[..., a]
    return g


def _p2_hessians():
    """Constant Hessians of the monomials w.r.t. xi: (10, 3, 3)."""
    h = np.zeros((10, 3, 3))
    for d in range(3):
        h[4 + d, d, d] = 2.0
    for k, (a, b) in enumerate(((0, 1), (0, 2), (1, 2))):
        h[7 + k, a, b] = h[7 + k, b, a] = 1.0
    return h


@dataclass(frozen=True)
class MWXBasis:
    """Ten quadratic shape functions per tet, stored as coefficients of scaled
    monomials in ``xi = (x - centroid) / scale``."""

    centroid: np.ndarray  # (nt, 3)
    scale: np.ndarray  # (nt,)
    coeffs: np.ndarray  # (nt, 10 monomials, 10 shape functions)
    hessians: np.ndarray  # (nt, 10, 3, 3), constant per tet

    def _local(self, x, cells):
        return (x - self.centroid[cells, None, :]) / self.scale[cells, None, None]

    def values(self, x, cells=slice(None)):
        """Shape function values at points x (nt, nq, 3) -> (nt, nq, 10)."""
        m = _p2_values(self._local(x, cells))
        return np.einsum("tqk,tka->tqa", m, self.coeffs[cells])

    def grads(self, x, cells=slice(None)):
        """Shape function gradients at points x (nt, nq, 3) -> (nt, nq, 10, 3)."""
        g = _p2_grads(self._local(x, cells))
        return np.einsum("tqkd,tka->tqad", g, self.coeffs[cells]) / self.scale[cells, None, None, None]


def _mwx_dof_matrix(mesh: Mesh, centroid, scale, cells=slice(None)):
    """Rows: the 10 DoFs of each tet applied to the scaled monomials."""
    tets = mesh.tets[cells]
    x = mesh.vertices[tets]  # (nt, 4, 3)
    nt = len(tets)
    D = np.empty((nt, 10, 10))

    to_xi = lambda p: (p - centroid[:, None, :]) / scale[:, None, None]
    face_ids = mesh.tet_faces[cells]
    fcent = x[:, LOCAL_FACES].mean(axis=2)  # (nt, 4, 3)
    normals = mesh.face_normals[face_ids]
    areas = mesh.face_areas[face_ids]
    g = _p2_grads(to_xi(fcent)) / scale[:, None, None, None]  # affine gradient: centroid value is the mean
    D[:, :4, :] = areas[:, :, None] * np.einsum("tfkd,tfd->tfk", g, normals)

    a = x[:, LOCAL_EDGES[:, 0]]
    b = x[:, LOCAL_EDGES[:, 1]]
    length = np.linalg.norm(b - a, axis=2)
    simpson = (_p2_values(to_xi(a)) + 4.0 * _p2_values(to_xi(0.5 * (a + b)))
               + _p2_values(to_xi(b))) / 6.0
    D[:, 4:, :] = length[:, :, None] * simpson
    return D


def mwx_local_basis(mesh: Mesh, max_condition: float = 1e10) -> MWXBasis:
    """Invert the 10x10 DoF matrix on every tet.

    Normal-derivative DoFs use the global face normals ``mesh.face_normals``,
    which makes them single valued without any sign bookkeeping.
    """
    centroid = mesh.vertices[mesh.tets].mean(axis=1)
    scale = mesh.tet_diameters.copy()
    D = _mwx_dof_matrix(mesh, centroid, scale)
    cond = np.linalg.cond(D)
    if np.any(~np.isfinite(cond)) or cond.max() > max_condition:
        raise ValueError(f"MWX DoF matrix ill-conditioned (cond = {np.nanmax(cond):.3e})")
    coeffs = np.linalg.inv(D)
    hess = np.einsum("kij,tka->taij", _p2_hessians(), coeffs) / scale[:, None, None, None] ** 2
    return MWXBasis(centroid, scale, coeffs, hess)


def mwx_duality_residual(mesh: Mesh, basis: MWXBasis) -> float:
    """max |DoF_b(phi_a) - delta_ab| over all tets."""
    D = _mwx_dof_matrix(mesh, basis.centroid, basis.scale)
    return float(np.abs(D @ basis.coeffs - np.eye(10)).max())


# ---------------------------------------------------------------------------
# interpolation and evaluation


def face_quadrature(mesh: Mesh, degree: int = 4):
    """Physical points (nf, nq, 3) and weights (nf, nq) on every face."""
    rule = tri_rule(degree)
    fx = mesh.vertices[mesh.faces]
    pts = np.einsum("qv,fvd->fqd", rule.barycentric, fx)
    weights = 2.0 * mesh.face_areas[:, None] * rule.weights[None, :]
    return pts, weights


def face_averages(mesh: Mesh, func, degree: int = 6):
    """``|F|^-1 int_F func`` for every face; ``func`` maps (N, 3) -> (N, ...)."""
    pts, w = face_quadrature(mesh, degree)
    vals = np.asarray(func(pts.reshape(-1, 3)))
    vals = vals.reshape(pts.shape[:2] + vals.shape[1:])
    return np.einsum("fq,fq...->f...", w, vals) / mesh.face_areas.reshape((-1,) + (1,) * (vals.ndim - 2))


def interpolate_cr(mesh: Mesh, func, dofmap: DofMap | None = None, degree: int = 6):
    """CR interpolant: the face averages of ``func``.

    For ``cr-sym`` the values of ``func`` are 3x3 matrices and are mapped to
    ``SYM_BASIS`` coordinates; the result is always a full-length vector
    matching ``dofmap`` (constrained entries are returned as computed, not
    zeroed).
    """
    avg = face_averages(mesh, func, degree)
    if dofmap is not None and dofmap.space == "cr-sym":
        avg = np.einsum("fij,bij->fb", avg, SYM_BASIS)
    return avg.reshape(-1)


def interpolate_mwx(mesh: Mesh, func, grad, degree: int = 6):
    """MWX interpolant from ``func`` (N,3)->(N,) and its gradient (N,3)->(N,3)."""
    pts, w = face_quadrature(mesh, degree)
    g = np.asarray(grad(pts.reshape(-1, 3))).reshape(pts.shape)
    face_dofs = np.einsum("fq,fqd,fd->f", w, g, mesh.face_normals)

    t, wt = np.polynomial.legendre.leggauss(degree // 2 + 1)
    t = 0.5 * (t + 1.0)
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    epts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    length = np.linalg.norm(b - a, axis=1)
    vals = np.asarray(func(epts.reshape(-1, 3))).reshape(epts.shape[:2])
    edge_dofs = 0.5 * length * (vals @ wt)
    return np.concatenate([face_dofs, edge_dofs])


def project_p0_traceless(mesh: Mesh, func, degree: int = 6):
    """Elementwise L2 projection of a matrix field onto traceless constants,
    returned as ``TLESS_BASIS`` coordinates (nt * 8,)."""
    pts, w = tet_points(mesh.vertices[mesh.tets], tet_rule(degree))
    vals = np.asarray(func(pts.reshape(-1, 3))).reshape(pts.shape[:2] + (3, 3))
    mean = np.einsum("tq,tqij->tij", w, vals) / mesh.volumes[:, None, None]
    return to_tless(mean).reshape(-1)


def cr_values(mesh: Mesh, coeffs, bary):
    """Evaluate a CR field with per-face coefficients (nf, ...) at barycentric
    points (nq, 4) of every tet: (nt, nq, ...)."""
    c = np.asarray(coeffs)[mesh.tet_faces]  # (nt, 4, ...)
    phi = CRBasis.values(bary)  # (nq, 4)
    return np.einsum("qi,ti...->tq...", phi, c)


def cr_gradients(mesh: Mesh, coeffs, basis: CRBasis | None = None):
    """Constant elementwise gradient of a CR field: (nt, ..., 3)."""
    basis = basis or cr_local_basis(mesh)
    c = np.asarray(coeffs)[mesh.tet_faces]
    return np.einsum("tid,ti...->t...d", basis.grads, c)


def sym_coeffs_to_matrix(coeffs):
    """(nf * 6,) CR-sym vector -> (nf, 3, 3) face-average matrices."""
    return np.einsum("fb,bij->fij", np.asarray(coeffs).reshape(-1, 6), SYM_BASIS)


def tless_coeffs_to_matrix(coeffs):
    return np.einsum("tb,bij->tij", np.asarray(coeffs).reshape(-1, 8), TLESS_BASIS)
