"""Quadrature on the reference tetrahedron and triangle.

Rules are collapsed (Duffy) products of Gauss-Jacobi rules, so all weights
are positive.  Reference cells::

    tet       {x, y, z >= 0, x + y + z <= 1}, measure 1/6
    triangle  {x, y >= 0, x + y <= 1},        measure 1/2
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 6


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray  # (nq, dim) reference coordinates
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def barycentric(self) -> np.ndarray:
        """(nq, dim + 1) barycentric coordinates, vertex 0 first."""
        return np.column_stack([1.0 - self.points.sum(axis=1), self.points])

    def __len__(self):
        return len(self.weights)


def _gauss_jacobi01(m, alpha):
    """m-point rule on [0, 1] for the weight (1 - t)^alpha."""
    x, w = roots_jacobi(m, alpha, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


def _check(degree):
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"quadrature degree must be in [0, {MAX_DEGREE}], got {degree}")


@lru_cache(maxsize=None)
def tet_rule(degree: int) -> QuadRule:
    """Rule exact for polynomials of total degree <= ``degree`` on the reference tet."""
    _check(degree)
    m = max(1, (degree + 2) // 2)
    a, wa = _gauss_jacobi01(m, 2.0)
    b, wb = _gauss_jacobi01(m, 1.0)
    c, wc = _gauss_jacobi01(m, 0.0)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :]
    pts = np.column_stack([
        A.ravel(),
        (B * (1 - A)).ravel(),
        (C * (1 - A) * (1 - B)).ravel(),
    ])
    rule = QuadRule(pts, W.ravel(), degree)
    rule.points.flags.writeable = False
    rule.weights.flags.writeable = False
    return rule


@lru_cache(maxsize=None)
def tri_rule(degree: int) -> QuadRule:
    """Rule exact for polynomials of total degree <= ``degree`` on the reference triangle."""
    _check(degree)
    m = max(1, (degree + 2) // 2)
    a, wa = _gauss_jacobi01(m, 1.0)
    b, wb = _gauss_jacobi01(m, 0.0)
    A, B = np.meshgrid(a, b, indexing="ij")
    pts = np.column_stack([A.ravel(), (B * (1 - A)).ravel()])
    rule = QuadRule(pts, (wa[:, None] * wb[None, :]).ravel(), degree)
    rule.points.flags.writeable = False
    rule.weights.flags.writeable = False
    return rule


_REF_TET = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)


def _red_refine(tets):
    """Split each tet (k, 4, 3) into its 8 red-refinement children."""
    v = [tets[:, i] for i in range(4)]
    mid = {(i, j): 0.5 * (v[i] + v[j]) for i in range(4) for j in range(i + 1, 4)}
    m01, m02, m03, m12, m13, m23 = (mid[k] for k in sorted(mid))
    children = [
        (v[0], m01, m02, m03), (m01, v[1], m12, m13),
        (m02, m12, v[2], m23), (m03, m13, m23, v[3]),
        (m02, m13, m01, m03), (m02, m13, m03, m23),
        (m02, m13, m23, m12), (m02, m13, m12, m01),
    ]
    return np.concatenate([np.stack(c, axis=1) for c in children])


@lru_cache(maxsize=None)
def composite_tet_rule(degree: int, levels: int = 1) -> QuadRule:
    """``tet_rule(degree)`` applied on ``8**levels`` red-refined sub-tets."""
    base = tet_rule(degree)
    cells = _REF_TET[None]
    for _ in range(levels):
        cells = _red_refine(cells)
    jac = cells[:, 1:] - cells[:, :1]
    vol = np.abs(np.linalg.det(jac))
    pts = cells[:, 0][:, None, :] + np.einsum("qk,ckd->cqd", base.points, jac)
    weights = vol[:, None] * base.weights[None, :]
    return QuadRule(pts.reshape(-1, 3), weights.ravel(), degree)


def tet_points(vertices, rule: QuadRule):
    """Physical quadrature points and weights for tets with vertex coordinates
    ``vertices`` (nt, 4, 3).  Returns ``(points (nt, nq, 3), weights (nt, nq))``.
    """
    jac = vertices[:, 1:] - vertices[:, :1]
    pts = vertices[:, :1] + np.einsum("qk,tkd->tqd", rule.points, jac)
    det = np.abs(np.linalg.det(jac))
    return pts, det[:, None] * rule.weights[None, :]
