import math

import numpy as np
import pytest

from ncfem3d.quadrature import MAX_DEGREE, composite_tet_rule, tet_points, tet_rule, tri_rule


def tet_monomial(a, b, c):
    return math.factorial(a) * math.factorial(b) * math.factorial(c) / math.factorial(a + b + c + 3)


def tri_monomial(a, b):
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(MAX_DEGREE + 1))
def test_tet_rule_exact(degree):
    rule = tet_rule(degree)
    assert abs(rule.weights.sum() - 1 / 6) < 1e-15
    assert np.all(rule.weights > 0)
    x = rule.points
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                q = rule.weights @ (x[:, 0] ** a * x[:, 1] ** b * x[:, 2] ** c)
                assert abs(q - tet_monomial(a, b, c)) < 1e-14


@pytest.mark.parametrize("degree", range(MAX_DEGREE + 1))
def test_tri_rule_exact(degree):
    rule = tri_rule(degree)
    assert abs(rule.weights.sum() - 0.5) < 1e-15
    x = rule.points
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            assert abs(rule.weights @ (x[:, 0] ** a * x[:, 1] ** b) - tri_monomial(a, b)) < 1e-14


def test_spot_values():
    r = tet_rule(6)
    x = r.points
    assert abs(r.weights @ np.prod(x ** 2, axis=1) - 8 / math.factorial(9)) < 1e-13
    lam = r.barycentric
    # int lambda^alpha = alpha! 3! / (|alpha| + 3)! * |T|
    assert abs(r.weights @ (lam[:, 0] * lam[:, 1]) - 1 / 120) < 1e-15
    t = tri_rule(4)
    assert abs(t.weights @ t.points[:, 0] ** 4 - 1 / 30) < 1e-13
    assert abs(t.weights @ t.barycentric[:, 0] - 1 / 6) < 1e-15


def test_rule_rejects_high_degree():
    for bad in (-1, MAX_DEGREE + 1):
        with pytest.raises(ValueError):
            tet_rule(bad)
        with pytest.raises(ValueError):
            tri_rule(bad)


def test_composite_rule():
    rule = composite_tet_rule(4, 2)
    assert len(rule.points) == 64 * len(tet_rule(4).points)
    assert abs(rule.weights.sum() - 1 / 6) < 1e-15
    x = rule.points
    assert abs(rule.weights @ (x[:, 0] ** 2 * x[:, 2] ** 2) - tet_monomial(2, 0, 2)) < 1e-15
    # int over the reference tet of exp(x+y+z) = int_0^1 e^s s^2/2 ds
    ref = (math.e - 2) / 2
    f = lambda p: np.exp(p.sum(axis=1))
    rules = [composite_tet_rule(1, k) for k in range(3)]
    errs = [abs(r.weights @ f(r.points) - ref) for r in rules]
    assert errs[2] < errs[1] < errs[0]


def test_tet_points_mapping():
    verts = np.array([[[0, 0, 0], [2, 0, 0], [0, 2, 0], [0, 0, 2]]], float)
    pts, w = tet_points(verts, tet_rule(2))
    assert abs(w.sum() - 8 / 6) < 1e-14
    assert abs(w[0] @ pts[0, :, 0] - (8 / 6) * 0.5) < 1e-14
