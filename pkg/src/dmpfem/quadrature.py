"""Quadrature on the reference simplex via collapsed Gauss-Jacobi products."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import roots_jacobi

__all__ = ["QuadratureRule", "simplex_rule", "monomial_integral"]


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature rule on a d-simplex in barycentric coordinates.

    ``points`` has shape (nq, d + 1) and each row sums to one.  ``weights``
    sum to one, so ``sum(w * f(x)) * |K|`` approximates the integral over K.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def dim(self):
        return self.points.shape[1] - 1

    def physical_points(self, coords):
        """Map to element coordinates; ``coords`` has shape (N, d + 1, d)."""
        return np.einsum("qa,nad->nqd", self.points, coords)


@lru_cache(maxsize=None)
def _rule(d, degree):
    n = max(1, math.ceil((degree + 1) / 2))
    axes = []
    for k in range(d):
        alpha = d - 1 - k
        t, w = roots_jacobi(n, alpha, 0.0)
        axes.append(((1.0 + t) / 2.0, w / 2.0 ** (alpha + 1)))
    pts, wts = [], []
    for idx in product(range(n), repeat=d):
        u = [axes[k][0][i] for k, i in enumerate(idx)]
        w = math.prod(axes[k][1][i] for k, i in enumerate(idx))
        x = np.empty(d)
        scale = 1.0
        for k in range(d):
            x[k] = u[k] * scale
            scale *= 1.0 - u[k]
        pts.append(np.concatenate([[1.0 - x.sum()], x]))
        wts.append(w)
    weights = np.array(wts)
    weights /= weights.sum()
    points = np.array(pts)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(points, weights, degree)


def simplex_rule(d, degree):
    """Rule on the reference ``d``-simplex exact for polynomials up to ``degree``.

    Uses ``ceil((degree + 1) / 2)`` Gauss-Jacobi points per collapsed axis, so
    all weights are positive and all points are interior.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {d}")
    if degree < 0:
        raise ValueError("degree must be non-negative")
    return _rule(int(d), int(degree))


def monomial_integral(alpha):
    """Exact mean of ``prod(lambda_k ** alpha_k)`` over a simplex.

    Barycentric monomials integrate to ``d! prod(alpha_k!) / (d + |alpha|)!``
    times the volume, where ``d = len(alpha) - 1``.
    """
    d = len(alpha) - 1
    num = math.factorial(d) * math.prod(math.factorial(a) for a in alpha)
    return num / math.factorial(d + sum(alpha))
