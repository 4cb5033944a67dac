import math

import numpy as np
import pytest

from ncfem3d.elements import build_dofmap, interpolate_cr, interpolate_mwx, mwx_local_basis
from ncfem3d.errors import (CRField, ErrorReport, MWXField, ZeroField, cellwise_l2, eoc, error_h1_broken,
                            error_h2_broken, error_l2, jump_seminorm, p0_norm)
from ncfem3d.manufactured import SineCubed
from ncfem3d.quadrature import composite_tet_rule

from helpers import cube


def test_eoc_simple():
    rates = eoc([4.0, 1.0])
    assert math.isnan(rates[0]) and rates[1] == 2.0
    np.testing.assert_allclose(eoc([1.0, 0.5, 0.25], [0.4, 0.2, 0.1])[1:], [1.0, 1.0])
    assert math.isnan(eoc([1.0, 0.0])[1])


def test_eoc_reference_values():
    assert round(eoc([4.604059, 1.332203])[1], 4) == 1.7891
    assert round(eoc([6.165173, 3.240802])[1], 4) == 0.9278


def test_cr_reproduction_and_zero_exact():
    mesh = cube(2)
    a = np.array([[1.0, 0.0, 2.0], [0.0, -1.0, 0.5], [3.0, 1.0, 0.0]])
    field = CRField(mesh, interpolate_cr(mesh, lambda x: x @ a.T).reshape(-1, 3))
    assert error_l2(mesh, field, lambda x: x @ a.T) < 1e-12
    assert error_h1_broken(mesh, field, lambda x: np.broadcast_to(a, (len(x), 3, 3))) < 1e-12
    # exact = None gives the norm of the discrete field
    assert abs(error_h1_broken(mesh, field) - np.sqrt((a ** 2).sum())) < 1e-12
    assert error_h2_broken(mesh, field) == 0.0


def test_error_homogeneous():
    mesh = cube(2)
    c = np.random.default_rng(0).standard_normal(mesh.n_faces)
    base = error_l2(mesh, CRField(mesh, c))
    assert abs(error_l2(mesh, CRField(mesh, 3 * c)) - 3 * base) < 1e-12 * base


def _mwx_interpolant(mesh, u):
    dm = build_dofmap(mesh, "mwx")
    return MWXField(mesh, interpolate_mwx(mesh, u.u, u.grad), dm, mwx_local_basis(mesh))


def test_hessian_error_quadrature_self_convergence():
    u = SineCubed()
    mesh = cube(2)
    field = _mwx_interpolant(mesh, u)
    once, twice = (error_h2_broken(mesh, field, u.hess, composite_tet_rule(6, k)) for k in (1, 2))
    assert abs(once - twice) <= 1e-4 * twice
    # the plain degree-6 rule is already close on this coarse mesh
    assert abs(error_h2_broken(mesh, field, u.hess, 6) - twice) <= 2e-3 * twice


def test_default_quadrature_resolved_at_fine_level():
    u = SineCubed()
    mesh = cube(8)
    field = _mwx_interpolant(mesh, u)
    plain = error_h2_broken(mesh, field, u.hess, 6)
    refined = error_h2_broken(mesh, field, u.hess, composite_tet_rule(6, 1))
    assert abs(plain - refined) <= 1e-6 * refined


def test_zero_field():
    mesh = cube(1)
    assert error_l2(mesh, ZeroField(), lambda x: np.ones(len(x))) == pytest.approx(1.0, rel=1e-14)


def test_discrete_norms():
    mesh = cube(2)
    q = np.ones(8 * mesh.n_tets)
    assert abs(p0_norm(mesh, q) - np.sqrt(8.0)) < 1e-13
    assert abs(cellwise_l2(mesh, np.broadcast_to(np.eye(3), (mesh.n_tets, 3, 3))) - np.sqrt(3.0)) < 1e-13
    K = np.diag([1.0, 2.0])
    J = np.diag([0.0, 1.0])
    assert jump_seminorm(np.array([1.0, 1.0]), K, J) == 2.0


def _report(mode):
    rep = ErrorReport(mode, "cube")
    cols = rep.columns
    for k, n in enumerate((1, 2, 4)):
        rec = {"n": n, "h": 1.0 / n, "identity_residual": 1e-12, "jump_r": 0.5 / n}
        rec.update({c: 2.0 ** -k for c in cols})
        rep.add(rec)
    return rep


def test_csv_headers():
    tri = _report("triharmonic").to_csv().splitlines()
    assert tri[0] == ("level,h,err_sigma_l2,rate,err_sigma_h1,rate,err_u_h1,rate,err_u_h2,rate,"
                      "jump_r,identity_residual")
    assert tri[1].startswith("1,1.0,1.0,,")
    assert tri[2].split(",")[3] == "1.0"
    sto = _report("stokes").to_csv().splitlines()
    assert sto[0] == "level,h,err_sigma_l2,rate,err_sigma_h1,rate,norm_p,rate,jump_r,rate,identity_residual"


def test_markdown_layout():
    md = _report("triharmonic").to_markdown()
    assert "| 2^-2 |" in md and "|u - u_h|_{2,h}" in md
    assert md.count("\n\n") >= 3
