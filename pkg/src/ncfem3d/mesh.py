"""Uniform tetrahedral meshes of the unit cube and the L-shaped domain.

Both domains are tiled by cubes of edge ``1/n`` and every cube is cut into six
tetrahedra along its main diagonal (Kuhn split).  Vertices are deduplicated on
integer grid keys, so the topology never depends on floating point
comparisons.

Local numbering inside a tetrahedron::

    face i    is opposite vertex i
    edge k    joins LOCAL_EDGES[k]
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

LOCAL_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
# vertices of face i, i.e. all local vertices except i
LOCAL_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass(frozen=True)
class Topology:
    faces: np.ndarray  # (nf, 3) sorted global vertex ids
    face_tets: np.ndarray  # (nf, 2) adjacent tets, lower index first, -1 if none
    tet_faces: np.ndarray  # (nt, 4) global face opposite local vertex i
    edges: np.ndarray  # (ne, 2) sorted global vertex ids
    tet_edges: np.ndarray  # (nt, 6) global edge for LOCAL_EDGES[k]


def _kuhn_tets() -> list[tuple[int, ...]]:
    """Six tets of the unit cube sharing the diagonal (0,0,0)-(1,1,1).

    Corners are encoded as bit triples ``x + 2y + 4z``; every tet is returned
    positively oriented.
    """
    tets = []
    for perm in permutations(range(3)):
        corner = 0
        tet = [0]
        for axis in perm:
            corner |= 1 << axis
            tet.append(corner)
        pts = np.array([[(c >> a) & 1 for a in range(3)] for c in tet], float)
        if np.linalg.det(pts[1:] - pts[0]) < 0:
            tet[2], tet[3] = tet[3], tet[2]
        tets.append(tuple(tet))
    return tets


def _grid_mesh(shape, origin, n, keep=None):
    """Kuhn-split the cells of a structured grid with spacing ``1/n``.

    ``keep(i, j, k)`` selects cells by integer index; omitted cells are holes.
    """
    nx, ny, nz = shape
    cells = np.array(
        [(i, j, k) for k in range(nz) for j in range(ny) for i in range(nx)
         if keep is None or keep(i, j, k)],
        dtype=np.int64,
    ).reshape(-1, 3)
    corner_offsets = np.array([[(c >> a) & 1 for a in range(3)] for c in range(8)])
    stride = np.array([1, nx + 1, (nx + 1) * (ny + 1)])
    tets = []
    for local in _kuhn_tets():
        keys = [((cells + corner_offsets[c]) * stride).sum(axis=1) for c in local]
        tets.append(np.stack(keys, axis=1))
    # cell-major ordering: the 6 tets of a cell are contiguous
    tets = np.stack(tets, axis=1).reshape(-1, 4)

    used, tets = np.unique(tets, return_inverse=True)
    tets = tets.reshape(-1, 4)
    grid = np.stack([used % (nx + 1), (used // (nx + 1)) % (ny + 1),
                     used // ((nx + 1) * (ny + 1))], axis=1)
    vertices = np.asarray(origin, float) + grid / float(n)
    return vertices, tets


def extract_topology(tets: np.ndarray) -> Topology:
    """Deduplicate faces and edges of a tetrahedral mesh.

    Raises ``ValueError`` for a face shared by more than two tets.
    """
    tets = np.asarray(tets, dtype=np.int64)
    nt = len(tets)

    all_faces = np.sort(tets[:, LOCAL_FACES], axis=2).reshape(-1, 3)
    faces, inverse, counts = np.unique(all_faces, axis=0, return_inverse=True,
                                       return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        raise ValueError("non-manifold mesh: a face is shared by more than two tets")
    tet_faces = inverse.reshape(nt, 4)

    face_tets = np.full((len(faces), 2), -1, dtype=np.int64)
    owner = np.repeat(np.arange(nt), 4)
    # stable sort keeps the lower tet index first within each face
    order = np.argsort(inverse, kind="stable")
    sorted_faces = inverse[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_faces[1:] != sorted_faces[:-1]
    face_tets[sorted_faces[first], 0] = owner[order][first]
    face_tets[sorted_faces[~first], 1] = owner[order][~first]

    all_edges = np.sort(tets[:, LOCAL_EDGES], axis=2).reshape(-1, 2)
    edges, einv = np.unique(all_edges, axis=0, return_inverse=True)
    return Topology(faces, face_tets, tet_faces, edges, einv.reshape(nt, 6))


class Mesh:
    """Tetrahedral mesh with oriented faces and the geometric data used in
    assembly.

    Parameters
    ----------
    vertices : (nv, 3) array
    tets : (nt, 4) array of vertex indices, positively oriented
    h : mesh-size label reported in error tables (``1/n`` for uniform meshes)
    """

    def __init__(self, vertices, tets, h=None, name="mesh"):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.tets = np.ascontiguousarray(tets, dtype=np.int64)
        self.name = name

        x = self.vertices[self.tets]
        jac = x[:, 1:] - x[:, :1]  # rows are edge vectors from vertex 0
        det = np.linalg.det(jac)
        if np.any(det <= 0):
            raise ValueError("tetrahedra must be positively oriented")
        self.volumes = det / 6.0

        topo = extract_topology(self.tets)
        self.faces = topo.faces
        self.face_tets = topo.face_tets
        self.tet_faces = topo.tet_faces
        self.edges = topo.edges
        self.tet_edges = topo.tet_edges
        self.boundary_faces = self.face_tets[:, 1] < 0

        edge_vec = x[:, LOCAL_EDGES[:, 1]] - x[:, LOCAL_EDGES[:, 0]]
        self.tet_diameters = np.linalg.norm(edge_vec, axis=2).max(axis=1)
        self.h = float(self.tet_diameters.max()) if h is None else float(h)

        fx = self.vertices[self.faces]
        cross = np.cross(fx[:, 1] - fx[:, 0], fx[:, 2] - fx[:, 0])
        self.face_areas = 0.5 * np.linalg.norm(cross, axis=1)
        normals = cross / (2.0 * self.face_areas[:, None])
        # orient outward from the lower-indexed neighbour
        t1 = self.face_tets[:, 0]
        centroid = self.vertices[self.tets[t1]].mean(axis=1)
        flip = np.einsum("ij,ij->i", normals, fx[:, 0] - centroid) < 0
        normals[flip] *= -1.0
        self.face_normals = normals
        self.face_diameters = np.max(
            [np.linalg.norm(fx[:, a] - fx[:, b], axis=1) for a, b in ((0, 1), (0, 2), (1, 2))],
            axis=0,
        )

        # s_{T,F} = n_F . n_{dT}: +1 on the lower tet, -1 on the upper one
        nt = len(self.tets)
        self.tet_face_signs = np.where(
            self.face_tets[self.tet_faces, 0] == np.arange(nt)[:, None], 1.0, -1.0
        )

        self.boundary_edges = np.zeros(len(self.edges), dtype=bool)
        bf = self.faces[self.boundary_faces]
        if len(bf):
            be = np.sort(np.concatenate([bf[:, [0, 1]], bf[:, [0, 2]], bf[:, [1, 2]]]), axis=1)
            key_all = self.edges[:, 0] * len(self.vertices) + self.edges[:, 1]
            key_b = np.unique(be[:, 0] * len(self.vertices) + be[:, 1])
            self.boundary_edges = np.isin(key_all, key_b)

        # barycentric gradients, (nt, 4, 3); row i is grad(lambda_i)
        inv = np.linalg.inv(jac)  # columns are grad(lambda_1..3)
        grads = np.empty((nt, 4, 3))
        grads[:, 1:] = np.transpose(inv, (0, 2, 1))
        grads[:, 0] = -grads[:, 1:].sum(axis=1)
        self.bary_grads = grads

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def volume(self) -> float:
        return float(self.volumes.sum())

    def tet_outward_normals(self) -> np.ndarray:
        """Outward unit normals of the four faces of every tet, (nt, 4, 3)."""
        return self.tet_face_signs[:, :, None] * self.face_normals[self.tet_faces]

    def inradii(self) -> np.ndarray:
        areas = self.face_areas[self.tet_faces].sum(axis=1)
        return 3.0 * self.volumes / areas

    def __repr__(self):
        return (f"Mesh({self.name!r}, vertices={self.n_vertices}, tets={self.n_tets}, "
                f"faces={self.n_faces}, edges={self.n_edges}, h={self.h:g})")


def build_cube_mesh(n: int) -> Mesh:
    """Kuhn-split uniform mesh of (0,1)^3 with ``n`` cells per edge."""
    vertices, tets = _grid_mesh((n, n, n), (0.0, 0.0, 0.0), n)
    return Mesh(vertices, tets, h=1.0 / n, name=f"cube-{n}")


def build_lshape_mesh(n: int) -> Mesh:
    """Kuhn-split uniform mesh of (-1,1)x(0,1)x(-1,1) minus [0,1]^3."""
    def keep(i, j, k):
        return not (i >= n and k >= n)

    vertices, tets = _grid_mesh((2 * n, n, 2 * n), (-1.0, 0.0, -1.0), n, keep)
    return Mesh(vertices, tets, h=1.0 / n, name=f"lshape-{n}")


def build_mesh(domain: str, n: int) -> Mesh:
    if domain == "cube":
        return build_cube_mesh(n)
    if domain == "lshape":
        return build_lshape_mesh(n)
    raise ValueError(f"unknown domain {domain!r}")


def write_vtk(path, mesh: Mesh, point_data=None, cell_data=None, title="ncfem3d"):
    """Write the mesh and optional fields as a legacy ASCII VTK file.

    Fields are dicts ``name -> array`` with one scalar or 3-vector per
    vertex / tet.
    """
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_vertices} double"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines.append(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}")
    lines += ["4 " + " ".join(str(int(i)) for i in t) for t in mesh.tets]
    lines.append(f"CELL_TYPES {mesh.n_tets}")
    lines += ["10"] * mesh.n_tets

    def emit(kind, count, data):
        if not data:
            return
        lines.append(f"{kind} {count}")
        for name, values in data.items():
            values = np.asarray(values, float)
            if values.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(repr(float(v)) for v in values)
            else:
                lines.append(f"VECTORS {name} double")
                lines.extend(" ".join(repr(float(c)) for c in v) for v in values)

    emit("POINT_DATA", mesh.n_vertices, point_data)
    emit("CELL_DATA", mesh.n_tets, cell_data)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
