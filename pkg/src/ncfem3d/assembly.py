"""Global matrices for the Morley-Wang-Xu biharmonic solves and the
nonconforming tensor-valued Stokes system.

The Stokes unknowns are ordered ``[sigma | r | p]``:

* sigma: free ``cr-sym`` DoFs (interior faces),
* r: all ``cr-vec`` DoFs,
* p: all ``p0-tl`` DoFs,

and the matrix is ``[[A, 0, Bs^T], [0, J, Br^T], [Bs, Br, 0]]`` with
``A`` the componentwise CR stiffness, ``J`` the face-jump penalty and
``Bs``, ``Br`` the ``curl_h`` and ``dev grad_h`` constraints.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import (CRBasis, DofMap, MWXBasis, build_dofmap, cr_local_basis,
                       mwx_local_basis)
from .linsolve import triplets_to_csr
from .mesh import Mesh
from .quadrature import tet_points, tet_rule, tri_rule
from .tensor_ops import LEVI_CIVITA, SYM_BASIS, TLESS_BASIS


def _pairs(cell_dofs):
    """Row/column index arrays for all local (a, b) pairs: (nt, k, k) each."""
    k = cell_dofs.shape[1]
    return (np.broadcast_to(cell_dofs[:, :, None], cell_dofs.shape + (k,)),
            np.broadcast_to(cell_dofs[:, None, :], cell_dofs.shape + (k,)))


def restrict(mat, row_map: DofMap | None, col_map: DofMap | None):
    """Drop constrained rows / columns."""
    mat = sp.csr_matrix(mat)
    if row_map is not None:
        mat = mat[row_map.free]
    if col_map is not None:
        mat = sp.csc_matrix(mat)[:, col_map.free].tocsr()
    return mat


# ---------------------------------------------------------------------------
# Morley-Wang-Xu


def assemble_biharmonic(mesh: Mesh, dofmap: DofMap, basis: MWXBasis) -> sp.csr_matrix:
    """Full (unconstrained) matrix of ``(hess_h w, hess_h v)``."""
    local = mesh.volumes[:, None, None] * np.einsum("taij,tbij->tab", basis.hessians, basis.hessians)
    rows, cols = _pairs(dofmap.cell_dofs)
    return triplets_to_csr(rows, cols, local, (dofmap.n_dofs, dofmap.n_dofs))


def assemble_load_scalar(mesh: Mesh, f, dofmap: DofMap, basis: MWXBasis, degree: int = 6) -> np.ndarray:
    """``(f, phi_a)`` for every MWX basis function (full length)."""
    pts, w = tet_points(mesh.vertices[mesh.tets], tet_rule(degree))
    fv = np.asarray(f(pts.reshape(-1, 3)), float).reshape(w.shape)
    phi = basis.values(pts)
    local = np.einsum("tq,tq,tqa->ta", w, fv, phi)
    return np.bincount(dofmap.cell_dofs.ravel(), weights=local.ravel(), minlength=dofmap.n_dofs)


def assemble_hessian_coupling(mesh: Mesh, sym_map: DofMap, mwx_map: DofMap,
                              basis: MWXBasis) -> sp.csr_matrix:
    """Full matrix ``C[tau, w] = (hess_h w, tau)`` for CR-sym ``tau`` and MWX ``w``.

    The Hessian is constant and every CR function has mean 1/4 on each tet.
    """
    # (nt, 4 faces, 6 comps, 10 mwx)
    hs = np.einsum("taij,cij->tca", basis.hessians, SYM_BASIS)
    local = 0.25 * mesh.volumes[:, None, None, None] * np.broadcast_to(hs[:, None], (mesh.n_tets, 4, 6, 10))
    rows = np.broadcast_to(sym_map.cell_dofs.reshape(-1, 4, 6)[:, :, :, None], local.shape)
    cols = np.broadcast_to(mwx_map.cell_dofs[:, None, None, :], local.shape)
    return triplets_to_csr(rows, cols, local, (sym_map.n_dofs, mwx_map.n_dofs))


def assemble_hessian_load(coupling, w_h) -> np.ndarray:
    """``(hess_h w_h, tau)`` for every CR-sym basis function."""
    return coupling @ np.asarray(w_h)


def assemble_sigma_load(coupling, sigma_h) -> np.ndarray:
    """``(sigma_h, hess_h chi)`` for every MWX basis function."""
    return coupling.T @ np.asarray(sigma_h)


# ---------------------------------------------------------------------------
# Crouzeix-Raviart blocks


def assemble_cr_stiffness(mesh: Mesh, dofmap: DofMap, basis: CRBasis | None = None) -> sp.csr_matrix:
    """Broken ``(grad_h u, grad_h v)`` for any CR space, components decoupled."""
    basis = basis or cr_local_basis(mesh)
    k = dofmap.cell_dofs.shape[1] // 4
    K = mesh.volumes[:, None, None] * np.einsum("tid,tjd->tij", basis.grads, basis.grads)
    local = np.einsum("tij,ab->tiajb", K, np.eye(k)).reshape(mesh.n_tets, 4 * k, 4 * k)
    rows, cols = _pairs(dofmap.cell_dofs)
    return triplets_to_csr(rows, cols, local, (dofmap.n_dofs, dofmap.n_dofs))


def face_traces(mesh: Mesh, degree: int = 2):
    """Values of the 4 CR shape functions of each tet at the quadrature points
    of each of its faces, ordered by the face's global vertex order.

    Returns ``(traces (nt, 4 faces, 4 functions, nq), weights (nq,))`` where
    the weights integrate over a face of unit area.
    """
    rule = tri_rule(degree)
    verts = mesh.faces[mesh.tet_faces]  # (nt, 4, 3) global vertex ids
    match = mesh.tets[:, None, :, None] == verts[:, :, None, :]  # (nt, face, fn, facevertex)
    vals_at_vertices = 1.0 - 3.0 * match
    traces = np.einsum("tjik,qk->tjiq", vals_at_vertices, rule.barycentric)
    return traces, 2.0 * rule.weights


def assemble_jump_penalty(mesh: Mesh, dofmap: DofMap, degree: int = 2) -> sp.csr_matrix:
    """``sum_F h_F^-1 ([r], [s])_F`` over all faces, boundary faces included."""
    k = dofmap.cell_dofs.shape[1] // 4
    traces, w = face_traces(mesh, degree)
    signed = traces * mesh.tet_face_signs[:, :, None, None]

    # one "side" per (tet, local face); group sides by global face
    face_of_side = mesh.tet_faces.ravel()
    order = np.argsort(face_of_side, kind="stable")
    side_tet = np.repeat(np.arange(mesh.n_tets), 4)[order]
    side_face = face_of_side[order]
    side_local = np.tile(np.arange(4), mesh.n_tets)[order]
    tr = signed[side_tet, side_local]  # (nsides, 4, nq)
    dofs = dofmap.cell_dofs.reshape(-1, 4, k)[side_tet]  # (nsides, 4, k)
    scale = mesh.face_areas[side_face] / mesh.face_diameters[side_face]

    start = np.searchsorted(side_face, np.arange(mesh.n_faces))
    nsides = np.diff(np.append(start, len(side_face)))
    interior = nsides == 2

    def block(a, b):
        return scale[a, None, None] * np.einsum("q,siq,sjq->sij", w, tr[a], tr[b])

    def symmetrized(a):
        m = block(a, a)
        return 0.5 * (m + np.swapaxes(m, 1, 2))

    # the (1, 0) block is the exact transpose of (0, 1): J is symmetric bit for bit
    upper = block(start[interior], start[interior] + 1)
    pieces = [
        (start, start, symmetrized(start)),
        (start[interior], start[interior] + 1, upper),
        (start[interior] + 1, start[interior], np.swapaxes(upper, 1, 2)),
        (start[interior] + 1, start[interior] + 1, symmetrized(start[interior] + 1)),
    ]

    rows, cols, vals = [], [], []
    for a, b, local in pieces:
        local = np.einsum("sij,cd->sicjd", local, np.eye(k))
        shp = local.shape
        rows.append(np.broadcast_to(dofs[a][:, :, :, None, None], shp).ravel())
        cols.append(np.broadcast_to(dofs[b][:, None, None, :, :], shp).ravel())
        vals.append(local.ravel())
    return triplets_to_csr(np.concatenate(rows), np.concatenate(cols),
                           np.concatenate(vals), (dofmap.n_dofs, dofmap.n_dofs))


def local_curl_sym(mesh: Mesh, basis: CRBasis | None = None) -> np.ndarray:
    """``curl(phi_i E_c)`` per tet as (nt, 4, 6, 3, 3)."""
    basis = basis or cr_local_basis(mesh)
    return np.einsum("jkl,tak,cil->tacij", LEVI_CIVITA, basis.grads, SYM_BASIS)


def local_grad_vec(mesh: Mesh, basis: CRBasis | None = None) -> np.ndarray:
    """``grad(phi_i e_d)`` per tet as (nt, 4, 3, 3, 3)."""
    basis = basis or cr_local_basis(mesh)
    return np.einsum("cd,tae->tacde", np.eye(3), basis.grads)


def assemble_curl_block(mesh: Mesh, sym_map: DofMap, p_map: DofMap,
                        basis: CRBasis | None = None) -> sp.csr_matrix:
    """Full ``(curl_h tau, q)`` with rows in ``p0-tl`` and columns in ``cr-sym``."""
    local = mesh.volumes[:, None, None, None] * np.einsum(
        "tacij,mij->tmac", local_curl_sym(mesh, basis), TLESS_BASIS)
    local = local.reshape(mesh.n_tets, 8, 24)
    rows = np.broadcast_to(p_map.cell_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(sym_map.cell_dofs[:, None, :], local.shape)
    return triplets_to_csr(rows, cols, local, (p_map.n_dofs, sym_map.n_dofs))


def assemble_devgrad_block(mesh: Mesh, vec_map: DofMap, p_map: DofMap,
                           basis: CRBasis | None = None) -> sp.csr_matrix:
    """Full ``(dev grad_h s, q)``; ``dev`` drops out against traceless ``q``."""
    local = mesh.volumes[:, None, None, None] * np.einsum(
        "tacij,mij->tmac", local_grad_vec(mesh, basis), TLESS_BASIS)
    local = local.reshape(mesh.n_tets, 8, 12)
    rows = np.broadcast_to(p_map.cell_dofs[:, :, None], local.shape)
    cols = np.broadcast_to(vec_map.cell_dofs[:, None, :], local.shape)
    return triplets_to_csr(rows, cols, local, (p_map.n_dofs, vec_map.n_dofs))


def sym_load_from_constants(mesh: Mesh, sym_map: DofMap, g_cells) -> np.ndarray:
    """``(g_h, tau)`` for elementwise constant symmetric ``g_h`` (nt, 3, 3)."""
    gc = np.einsum("tij,cij->tc", np.asarray(g_cells), SYM_BASIS)
    local = 0.25 * mesh.volumes[:, None, None] * np.broadcast_to(gc[:, None, :], (mesh.n_tets, 4, 6))
    return np.bincount(sym_map.cell_dofs.ravel(), weights=local.ravel(), minlength=sym_map.n_dofs)


# ---------------------------------------------------------------------------
# Stokes system


@dataclass
class StokesSystem:
    mesh: Mesh
    sym_map: DofMap
    vec_map: DofMap
    p_map: DofMap
    A_sigma: sp.csr_matrix  # free x free
    J: sp.csr_matrix
    B_sigma_full: sp.csr_matrix  # p x all cr-sym DoFs
    B_sigma: sp.csr_matrix  # p x free cr-sym DoFs
    B_r: sp.csr_matrix
    stiffness_vec: sp.csr_matrix  # broken H1 stiffness on cr-vec, for norms
    rhs: np.ndarray = field(default=None)
    _matrix: sp.csr_matrix = field(default=None, repr=False)

    @property
    def sizes(self):
        return self.sym_map.n_free, self.vec_map.n_dofs, self.p_map.n_dofs

    @property
    def p_mass(self) -> sp.csr_matrix:
        """L2 mass of ``p0-tl``; diagonal because ``TLESS_BASIS`` is orthonormal."""
        return sp.diags(np.repeat(self.mesh.volumes, 8)).tocsr()

    @property
    def B(self) -> sp.csr_matrix:
        return sp.hstack([self.B_sigma, self.B_r], format="csr")

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            self._matrix = sp.bmat([
                [self.A_sigma, None, self.B_sigma.T],
                [None, self.J, self.B_r.T],
                [self.B_sigma, self.B_r, None],
            ], format="csr")
            self._matrix.sort_indices()
        return self._matrix

    def set_sigma_load(self, load_full):
        """Right-hand side from a full-length CR-sym load vector."""
        ns, nr, npp = self.sizes
        self.rhs = np.concatenate([np.asarray(load_full)[self.sym_map.free], np.zeros(nr + npp)])

    def split(self, x):
        """Solution vector -> (sigma full cr-sym vector, r, p)."""
        ns, nr, _ = self.sizes
        return self.sym_map.expand(x[:ns]), x[ns:ns + nr], x[ns + nr:]


def assemble_stokes(mesh: Mesh, g_cells=None, sigma_load=None, penalty_degree: int = 2) -> StokesSystem:
    """Assemble the nonconforming Stokes system.

    Either ``g_cells`` (elementwise constant symmetric data, (nt, 3, 3)) or a
    precomputed full-length CR-sym ``sigma_load`` supplies the right-hand side.
    """
    sym_map = build_dofmap(mesh, "cr-sym")
    vec_map = build_dofmap(mesh, "cr-vec")
    p_map = build_dofmap(mesh, "p0-tl")
    basis = cr_local_basis(mesh)
    A_full = assemble_cr_stiffness(mesh, sym_map, basis)
    Bs_full = assemble_curl_block(mesh, sym_map, p_map, basis)
    system = StokesSystem(
        mesh=mesh, sym_map=sym_map, vec_map=vec_map, p_map=p_map,
        A_sigma=restrict(A_full, sym_map, sym_map),
        J=assemble_jump_penalty(mesh, vec_map, penalty_degree),
        B_sigma_full=Bs_full,
        B_sigma=restrict(Bs_full, None, sym_map),
        B_r=assemble_devgrad_block(mesh, vec_map, p_map, basis),
        stiffness_vec=assemble_cr_stiffness(mesh, vec_map, basis),
    )
    if g_cells is not None and sigma_load is not None:
        raise ValueError("give either g_cells or sigma_load, not both")
    if g_cells is not None:
        if np.shape(g_cells) != (mesh.n_tets, 3, 3):
            raise ValueError("g_cells must have shape (n_tets, 3, 3)")
        sigma_load = sym_load_from_constants(mesh, sym_map, g_cells)
    if sigma_load is not None:
        if len(sigma_load) != sym_map.n_dofs:
            raise ValueError("sigma_load does not match the CR-sym DoF map")
        system.set_sigma_load(sigma_load)
    else:
        system.set_sigma_load(np.zeros(sym_map.n_dofs))
    return system


def discrete_constraint_cells(system: StokesSystem, sigma_full, r) -> np.ndarray:
    """Elementwise constant matrix ``curl_h sigma_h + dev grad_h r_h`` (nt, 3, 3),
    evaluated directly from the shape-function derivatives (not via ``B``)."""
    mesh = system.mesh
    sc = np.asarray(sigma_full)[system.sym_map.cell_dofs].reshape(-1, 4, 6)
    rc = np.asarray(r)[system.vec_map.cell_dofs].reshape(-1, 4, 3)
    curl = np.einsum("tacij,tac->tij", local_curl_sym(mesh), sc)
    grad = np.einsum("tacij,tac->tij", local_grad_vec(mesh), rc)
    tr = np.trace(grad, axis1=1, axis2=2)
    return curl + grad - tr[:, None, None] / 3.0 * np.eye(3)


def export_matrix_market(path, mat, comment=""):
    from scipy.io import mmwrite

    mmwrite(path, sp.coo_matrix(mat), comment=comment)
