"""
Quadrature rules on the reference triangle {x, y >= 0, x + y <= 1} and the unit segment [0, 1].
Triangle rules are conical products (Gauss-Jacobi x Gauss-Legendre): positive
weights, exact to the requested degree.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_EXACTNESS = 10


class QuadratureError(ValueError):
    """Requested rule is not available"""


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    domain: str
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


def _points_for(degree: int) -> int:
    return max(1, math.ceil((degree + 1) / 2))


@lru_cache(maxsize=None)
def _segment_rule(degree: int) -> QuadratureRule:
    xi, w = np.polynomial.legendre.leggauss(_points_for(degree))
    return QuadratureRule('segment', 0.5 * (xi + 1.0), 0.5 * w, degree)


@lru_cache(maxsize=None)
def _triangle_rule(degree: int) -> QuadratureRule:
    n = _points_for(degree)
    # (1 - u) weight absorbs the Jacobian of the collapsed map
    tu, wu = roots_jacobi(n, 1.0, 0.0)
    u = 0.5 * (tu + 1.0)
    wu = 0.25 * wu
    tv, wv = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (tv + 1.0)
    wv = 0.5 * wv

    U, V = np.meshgrid(u, v, indexing='ij')
    WU, WV = np.meshgrid(wu, wv, indexing='ij')
    points = np.stack([U.ravel(), (V * (1.0 - U)).ravel()], axis=1)
    return QuadratureRule('triangle', points, (WU * WV).ravel(), degree)


def quadrature_rule(domain: str, exactness_degree: int) -> QuadratureRule:
    """
    Rule exact for polynomials up to exactness_degree.

    Args:
        domain: 'triangle' (weights sum to 1/2) or 'segment' (weights sum to 1)
        exactness_degree: 0..10
    """
    if int(exactness_degree) != exactness_degree or not 0 <= exactness_degree <= MAX_EXACTNESS:
        raise QuadratureError(f"Unsupported quadrature degree {exactness_degree}; "
                              f"available 0..{MAX_EXACTNESS}")
    if domain == 'triangle':
        return _triangle_rule(int(exactness_degree))
    if domain == 'segment':
        return _segment_rule(int(exactness_degree))
    raise QuadratureError(f"Unknown quadrature domain '{domain}'")


def map_to_triangles(rule: QuadratureRule, corners: np.ndarray):
    """
    Physical points and weights of a triangle rule on physical triangles.

    Args:
        corners: shape (nt, 3, 2)

    Returns:
        points (nt, nq, 2), weights (nt, nq)
    """
    corners = np.asarray(corners, dtype=float)
    e1 = corners[:, 1] - corners[:, 0]
    e2 = corners[:, 2] - corners[:, 0]
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    xi = rule.points
    points = (corners[:, None, 0, :] + xi[None, :, 0, None] * e1[:, None, :]
              + xi[None, :, 1, None] * e2[:, None, :])
    return points, det[:, None] * rule.weights[None, :]


def map_to_segments(rule: QuadratureRule, endpoints: np.ndarray):
    """
    Physical points and weights of a segment rule.

    Args:
        endpoints: shape (ns, 2, 2)

    Returns:
        points (ns, nq, 2), weights (ns, nq)
    """
    endpoints = np.asarray(endpoints, dtype=float)
    p0 = endpoints[:, 0]
    tangent = endpoints[:, 1] - p0
    length = np.hypot(tangent[:, 0], tangent[:, 1])
    points = p0[:, None, :] + rule.points[None, :, None] * tangent[:, None, :]
    return points, length[:, None] * rule.weights[None, :]
