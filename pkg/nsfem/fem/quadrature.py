"""
Quadrature rules on the reference triangle and the reference edge [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from nsfem.core.errors import DomainError

MIN_DEGREE = 1
MAX_DEGREE = 12


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (N, 2) reference coordinates for triangles, (N,) for edges
    weights: np.ndarray  # (N,), positive
    degree: int

    @property
    def barycentric(self) -> np.ndarray:
        """(N, 3) barycentric coordinates (lambda0, lambda1, lambda2) of triangle points."""
        x, y = self.points[:, 0], self.points[:, 1]
        return np.stack([1.0 - x - y, x, y], axis=1)

    def __len__(self) -> int:
        return len(self.weights)


def _check_degree(degree: int) -> int:
    if not isinstance(degree, (int, np.integer)) or not MIN_DEGREE <= degree <= MAX_DEGREE:
        raise DomainError(f"unsupported quadrature degree {degree}; supported range is {MIN_DEGREE}..{MAX_DEGREE}")
    return int(degree)


def _frozen(rule: QuadratureRule) -> QuadratureRule:
    rule.points.setflags(write=False)
    rule.weights.setflags(write=False)
    return rule


@lru_cache(maxsize=None)
def triangle_quadrature(degree: int) -> QuadratureRule:
    """Conical product rule exact for polynomials of total degree `degree`.

    Collapses the square onto the triangle with x = eta, y = (1-eta) xi and
    combines Gauss-Jacobi(1, 0) points in eta with Gauss-Legendre points in xi.
    """
    degree = _check_degree(degree)
    n = math.ceil((degree + 1) / 2)
    t_jac, w_jac = roots_jacobi(n, 1.0, 0.0)
    t_leg, w_leg = leggauss(n)
    eta = 0.5 * (1.0 + t_jac)
    xi = 0.5 * (1.0 + t_leg)
    ee, xx = np.meshgrid(eta, xi, indexing="ij")
    points = np.stack([ee.ravel(), ((1.0 - ee) * xx).ravel()], axis=1)
    weights = np.outer(0.25 * w_jac, 0.5 * w_leg).ravel()
    return _frozen(QuadratureRule(points=points, weights=weights, degree=degree))


@lru_cache(maxsize=None)
def edge_quadrature(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1]."""
    degree = _check_degree(degree)
    n = math.ceil((degree + 1) / 2)
    t, w = leggauss(n)
    return _frozen(QuadratureRule(points=0.5 * (1.0 + t), weights=0.5 * w, degree=degree))
