"""Shared meshes and independent checks used by several test modules."""
import functools

import numpy as np
import scipy.sparse as sp

from ncfem3d.elements import build_dofmap, mwx_local_basis
from ncfem3d.mesh import LOCAL_FACES, Mesh, build_cube_mesh, build_lshape_mesh
from ncfem3d.quadrature import tri_rule


@functools.lru_cache(maxsize=None)
def cube(n):
    return build_cube_mesh(n)


@functools.lru_cache(maxsize=None)
def lshape(n):
    return build_lshape_mesh(n)


def random_tets(count, seed=0):
    """Positively oriented, non-degenerate random tetrahedra (count, 4, 3)."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        x = rng.uniform(-1, 1, (4, 3))
        vol = np.linalg.det(x[1:] - x[0]) / 6
        if abs(vol) < 0.02:
            continue
        if vol < 0:
            x[[1, 2]] = x[[2, 1]]
        out.append(x)
    return np.array(out)


def disjoint_mesh(tets):
    """Mesh of unconnected tetrahedra given by their vertex coordinates."""
    return Mesh(tets.reshape(-1, 3), np.arange(4 * len(tets)).reshape(-1, 4), name="disjoint")


def local_face_points(mesh, degree):
    """Physical quadrature points (nt, 4, nq, 3), weights (nt, 4, nq) and
    barycentric coordinates w.r.t. the tet (4, nq, 4) on each local face."""
    rule = tri_rule(degree)
    x = mesh.vertices[mesh.tets]
    bary = np.zeros((4, len(rule.weights), 4))
    for i, face in enumerate(LOCAL_FACES):
        bary[i][:, face] = rule.barycentric
    pts = np.einsum("fqv,tvd->tfqd", bary, x)
    area = mesh.face_areas[mesh.tet_faces]
    w = 2.0 * area[:, :, None] * rule.weights
    return pts, w, bary


def face_jump_matrix(mesh, local_integrals, cell_dofs, n_dofs):
    """Assemble ``sum_T s_{T,F} int_F phi`` into a (nf * k, n_dofs) matrix.

    ``local_integrals`` has shape (nt, 4 local faces, local dofs, k).  Row
    ``k * F + c`` of the result is the component ``c`` of the jump integral on
    face ``F`` for each global basis function.
    """
    nt, _, nl, k = local_integrals.shape
    signs = mesh.tet_face_signs
    rows = (k * mesh.tet_faces[:, :, None, None] + np.arange(k)).repeat(nl, axis=2)
    cols = np.broadcast_to(cell_dofs[:, None, :, None], rows.shape)
    vals = signs[:, :, None, None] * local_integrals
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(k * mesh.n_faces, n_dofs)).tocsr()


def mwx_gradient_jumps(mesh):
    """Jump matrix of int_F grad w for every MWX basis function."""
    dm = build_dofmap(mesh, "mwx")
    basis = mwx_local_basis(mesh)
    pts, w, _ = local_face_points(mesh, 2)
    nt = mesh.n_tets
    g = basis.grads(pts.reshape(nt, -1, 3)).reshape(pts.shape[:3] + (10, 3))
    loc = np.einsum("tfq,tfqad->tfad", w, g)
    return face_jump_matrix(mesh, loc, dm.cell_dofs, dm.n_dofs), dm


def cr_value_jumps(mesh, space="cr-vec"):
    """Jump matrix of int_F phi for every global CR basis function."""
    dm = build_dofmap(mesh, space)
    k = dm.cell_dofs.shape[1] // 4
    pts, w, bary = local_face_points(mesh, 2)
    phi = 1.0 - 3.0 * bary  # (4 faces, nq, 4 basis)
    scalar = np.einsum("tfq,fqa->tfa", w, phi)
    loc = np.einsum("tfa,bc->tfabc", scalar, np.eye(k)).reshape(mesh.n_tets, 4, 4 * k, k)
    return face_jump_matrix(mesh, loc, dm.cell_dofs, dm.n_dofs), dm


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
