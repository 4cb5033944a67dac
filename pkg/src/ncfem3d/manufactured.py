"""The smooth test solution ``u = sin^3(pi x) sin^3(pi y) sin^3(pi z)``.

Each factor is expanded as ``sin^3 t = (3 sin t - sin 3t) / 4``, so every
partial derivative is a product of three short trigonometric sums with exact
coefficients; no nested chain rule is involved.
"""
from itertools import product
from math import factorial

import numpy as np


def _factor(t, m):
    """m-th derivative of sin^3(pi t)."""
    pi = np.pi
    phase = m * pi / 2
    return (3.0 * pi ** m * np.sin(pi * t + phase)
            - (3.0 * pi) ** m * np.sin(3.0 * pi * t + phase)) / 4.0


class SineCubed:
    """``u(x) = prod_d sin^3(pi x_d)`` with ``f = -Laplace^3 u``.

    All evaluators take points of shape (N, 3).
    """

    def partial(self, x, alpha):
        x = np.asarray(x, float)
        return (_factor(x[..., 0], alpha[0]) * _factor(x[..., 1], alpha[1])
                * _factor(x[..., 2], alpha[2]))

    def _tensor(self, x, order):
        x = np.asarray(x, float)
        out = np.empty(x.shape[:-1] + (3,) * order)
        for idx in product(range(3), repeat=order):
            alpha = np.bincount(idx, minlength=3) if order else (0, 0, 0)
            out[(Ellipsis,) + idx] = self.partial(x, alpha)
        return out

    def u(self, x):
        return self.partial(x, (0, 0, 0))

    def grad(self, x):
        return self._tensor(x, 1)

    def hess(self, x):
        """``sigma = hess u`` as (N, 3, 3)."""
        return self._tensor(x, 2)

    def third(self, x):
        """``d_i d_j d_k u`` as (N, 3, 3, 3); also the gradient of sigma."""
        return self._tensor(x, 3)

    def derivative(self, x, order):
        return self._tensor(x, order)

    def laplacian_power(self, x, k):
        """``Laplace^k u``."""
        total = 0.0
        for a in range(k + 1):
            for b in range(k + 1 - a):
                c = k - a - b
                coeff = factorial(k) // (factorial(a) * factorial(b) * factorial(c))
                total = total + coeff * self.partial(x, (2 * a, 2 * b, 2 * c))
        return total

    def f(self, x):
        """Triharmonic load ``-Laplace^3 u``."""
        return -self.laplacian_power(x, 3)

    def stokes_load(self, x):
        """``g = -Laplace(hess u)``, symmetric (N, 3, 3)."""
        x = np.asarray(x, float)
        g = np.zeros(x.shape[:-1] + (3, 3))
        for i, j in product(range(3), repeat=2):
            for k in range(3):
                alpha = np.bincount([i, j, k, k], minlength=3)
                g[..., i, j] -= self.partial(x, alpha)
        return g


class Zero(SineCubed):
    """Identically zero solution, for the homogeneous sanity run."""

    def partial(self, x, alpha):
        return np.zeros(np.asarray(x).shape[:-1])


EXACT_SOLUTIONS = {"sin3": SineCubed, "zero": Zero}
