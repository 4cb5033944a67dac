import numpy as np
import pytest

from ncfem3d.mesh import Mesh, build_mesh, extract_topology, write_vtk

from helpers import cube, lshape


@pytest.mark.parametrize("n, tets, verts", [(1, 6, 8), (2, 48, 27), (3, 162, 64)])
def test_cube_counts(n, tets, verts):
    m = cube(n)
    assert (m.n_tets, m.n_vertices) == (tets, verts)
    assert m.h == 1.0 / n


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cube_volume(n):
    assert abs(cube(n).volume - 1.0) < 1e-12


def test_lshape_counts_and_volume():
    m = lshape(2)
    assert m.n_tets == 144
    assert abs(m.volume - 3.0) < 1e-12
    # nothing inside the removed unit cube
    c = m.vertices[m.tets].mean(axis=1)
    assert not np.any(np.all((c > 0) & (c < 1), axis=1))


def test_single_tet_topology():
    topo = extract_topology(np.array([[0, 1, 2, 3]]))
    assert len(topo.faces) == 4 and len(topo.edges) == 6
    assert np.all(topo.face_tets[:, 1] == -1)


def test_interior_face_count_identity():
    m = cube(1)
    nb = int(m.boundary_faces.sum())
    assert nb == 12
    assert m.n_faces - nb == (4 * m.n_tets - nb) // 2
    counts = np.bincount(m.tet_faces.ravel(), minlength=m.n_faces)
    assert np.all(counts[m.boundary_faces] == 1)
    assert np.all(counts[~m.boundary_faces] == 2)


def test_non_manifold_rejected():
    tets = np.array([[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]])
    with pytest.raises(ValueError):
        extract_topology(tets)


def test_negative_orientation_rejected():
    x = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)
    with pytest.raises(ValueError):
        Mesh(x, [[0, 2, 1, 3]])


@pytest.mark.parametrize("m", [cube(3), lshape(2)], ids=["cube3", "lshape2"])
def test_geometry_invariants(m):
    assert np.all(m.volumes > 0)
    assert np.abs(np.linalg.norm(m.face_normals, axis=1) - 1).max() < 1e-14
    assert set(np.unique(m.tet_face_signs)) <= {-1.0, 1.0}
    # sum_F |F| s_{T,F} n_F = 0 per tet
    flux = np.einsum("tf,tfd->td", m.face_areas[m.tet_faces], m.tet_outward_normals())
    assert np.abs(flux).max() < 1e-12 * m.face_areas.max()
    assert np.all(m.face_diameters[m.tet_faces] <= m.tet_diameters[:, None] + 1e-15)


def test_outward_normals_point_away():
    m = cube(2)
    cent = m.vertices[m.tets].mean(axis=1)
    fc = m.vertices[m.faces].mean(axis=1)[m.tet_faces]
    assert np.all(np.einsum("tfd,tfd->tf", m.tet_outward_normals(), fc - cent[:, None]) > 0)


def test_boundary_normals_outward():
    m = cube(2)
    fc = m.vertices[m.faces[m.boundary_faces]].mean(axis=1)
    n = m.face_normals[m.boundary_faces]
    assert np.all(np.einsum("fd,fd->f", n, fc - 0.5) > 0)


def test_shape_regularity_uniform():
    ratios = [(m.tet_diameters / m.inradii()).max() for m in (cube(1), cube(2), cube(4))]
    assert np.ptp(ratios) < 1e-10


def test_boundary_edges_on_boundary():
    m = lshape(2)
    mid = m.vertices[m.edges[m.boundary_edges]].mean(axis=1)
    on_outer = np.any(np.isclose(np.abs(mid[:, [0, 2]]), 1), axis=1) | np.isclose(mid[:, 1], 0) \
        | np.isclose(mid[:, 1], 1)
    on_notch = np.any(np.isclose(mid, 0), axis=1) & np.all(mid >= -1e-12, axis=1)
    assert np.all(on_outer | on_notch)


def test_build_mesh_rejects_unknown():
    with pytest.raises(ValueError):
        build_mesh("sphere", 2)


def test_vtk_export(tmp_path):
    m = cube(1)
    path = tmp_path / "m.vtk"
    write_vtk(path, m, point_data={"x": m.vertices[:, 0]}, cell_data={"vol": m.volumes})
    text = path.read_text()
    assert "UNSTRUCTURED_GRID" in text and "CELLS 6 30" in text
    assert "SCALARS vol" in text
