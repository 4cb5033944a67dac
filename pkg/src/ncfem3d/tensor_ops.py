"""3x3 tensor algebra and the row-wise differential operators.

Conventions:

* ``(grad s)_{ij} = d s_i / d x_j``
* ``(curl tau)_{ij} = eps_{jkl} d_k tau_{il}`` (vector curl of each row)
* ``vskw`` is the axial vector of the skew part with ``2 vskw(grad v) = curl v``

With these, ``curl(hess u) = 0`` and ``tr(curl tau) = 2 div(vskw tau)``.

Symmetric and traceless matrices are stored as coordinates in fixed
Frobenius-orthonormal bases (``SYM_BASIS``, 6 x 3 x 3 and ``TLESS_BASIS``,
8 x 3 x 3).  All functions broadcast over leading axes.
"""
import numpy as np

_S2 = np.sqrt(2.0)
_S6 = np.sqrt(6.0)


def _unit(i, j):
    e = np.zeros((3, 3))
    e[i, j] = 1.0
    return e


SYM_BASIS = np.array(
    [_unit(0, 0), _unit(1, 1), _unit(2, 2)]
    + [(_unit(i, j) + _unit(j, i)) / _S2 for i, j in ((0, 1), (0, 2), (1, 2))]
)

TLESS_BASIS = np.array(
    [_unit(i, j) for i in range(3) for j in range(3) if i != j]
    + [(_unit(0, 0) - _unit(1, 1)) / _S2,
       (_unit(0, 0) + _unit(1, 1) - 2.0 * _unit(2, 2)) / _S6]
)

LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_i, _k, _j] = -1.0


def trace(a):
    return np.trace(a, axis1=-2, axis2=-1)


def dev(a):
    """Traceless part ``a - tr(a)/3 I`` as a matrix."""
    a = np.asarray(a, float)
    return a - trace(a)[..., None, None] / 3.0 * np.eye(3)


def sym(a):
    a = np.asarray(a, float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def skw(a):
    a = np.asarray(a, float)
    return 0.5 * (a - np.swapaxes(a, -1, -2))


def vskw(a):
    """Axial vector ``w`` of ``skw(a)``, i.e. ``skw(a) x = w cross x``."""
    w = skw(a)
    return np.stack([w[..., 2, 1], w[..., 0, 2], w[..., 1, 0]], axis=-1)


def to_sym(a):
    """Coordinates of ``sym(a)`` in ``SYM_BASIS``."""
    return np.einsum("...ij,bij->...b", sym(a), SYM_BASIS)


def from_sym(c):
    return np.einsum("...b,bij->...ij", np.asarray(c, float), SYM_BASIS)


def to_tless(a):
    """Coordinates of ``dev(a)`` in ``TLESS_BASIS``."""
    return np.einsum("...ij,bij->...b", np.asarray(a, float), TLESS_BASIS)


def from_tless(c):
    return np.einsum("...b,bij->...ij", np.asarray(c, float), TLESS_BASIS)


def row_curl(dtau):
    """Row-wise curl of an affine matrix field.

    ``dtau[..., k, i, l]`` holds ``d_k tau_{il}``; the result is the constant
    matrix ``curl tau``.
    """
    return np.einsum("jkl,...kil->...ij", LEVI_CIVITA, np.asarray(dtau, float))


def row_div(dtau):
    """Row-wise divergence, ``(div tau)_i = d_j tau_{ij}``."""
    return np.einsum("...jij->...i", np.asarray(dtau, float))


def dev_grad(jac):
    """``dev`` of a Jacobian ``jac[..., i, j] = d_j s_i`` as a traceless matrix."""
    return dev(jac)
