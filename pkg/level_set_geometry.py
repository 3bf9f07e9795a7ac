"""
Level Set Geometry - analytic level sets and ray root finding
Negative inside the domain, positive outside. The ray search realizes the
discrete projection x + s * n_h(x) onto the exact boundary.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

import config

logger = logging.getLogger(__name__)

FLOWER_R0 = 0.5
FLOWER_AMPLITUDE = 0.1
FLOWER_OMEGA = 8.0
FLOWER_INNER_RADIUS = 1.0 / 6.0
ANNULUS_RADII = (0.25, 0.75)


class GeometryError(ValueError):
    """Raised when a level set quantity is undefined at the requested point"""


class RootFindError(RuntimeError):
    """No boundary intersection along a ray"""

    def __init__(self, point, direction, smax):
        self.point = np.asarray(point, dtype=float)
        self.direction = np.asarray(direction, dtype=float)
        self.smax = smax
        super().__init__(
            f"no boundary intersection along ray from {self.point.tolist()} "
            f"in direction {self.direction.tolist()} within |s| <= {smax}")


@dataclass(frozen=True)
class LevelSetCase:
    """Analytic level set; params holds the case constants"""
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in config.CASE_IDS:
            raise GeometryError(f"Unknown level set case '{self.name}', expected one of {config.CASE_IDS}")


class RayRootConfig(BaseModel):
    """Search settings for find_zero_along"""
    smax: float = Field(default=config.ROOT_SMAX, gt=0)
    tol: float = Field(default=config.ROOT_TOL, gt=0)
    max_iter: int = Field(default=config.ROOT_MAX_ITER, ge=1)
    initial_step: float = Field(default=1e-4, gt=0)

    model_config = {'frozen': True}


def make_case(name: str, **params) -> LevelSetCase:
    """Level set case with the default constants filled in"""
    defaults = {
        'halfplane': {'offset': config.HALFPLANE_OFFSET},
        'circle': {'radius': 1.0},
        'annulus': {'inner': ANNULUS_RADII[0], 'outer': ANNULUS_RADII[1]},
        'flower': {'r0': FLOWER_R0, 'amplitude': FLOWER_AMPLITUDE,
                   'omega': FLOWER_OMEGA, 'inner': FLOWER_INNER_RADIUS},
    }
    if name not in defaults:
        raise GeometryError(f"Unknown level set case '{name}', expected one of {config.CASE_IDS}")
    merged = dict(defaults[name])
    merged.update(params)
    return LevelSetCase(name=name, params=merged)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def flower_angle(x, y):
    """theta = arctan(x / y) for the flower case; theta = 0 where y = 0"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    safe_y = np.where(y == 0.0, 1.0, y)
    return np.where(y == 0.0, 0.0, np.arctan(x / safe_y))


def eval_phi(case: LevelSetCase, x):
    """
    Level set value at x.

    Args:
        case: Level set case
        x: Point(s), shape (..., 2)

    Returns:
        phi, shape (...); a float for a single point
    """
    x = np.asarray(x, dtype=float)
    px, py = x[..., 0], x[..., 1]
    p = case.params

    if case.name == 'halfplane':
        value = px - p['offset']
    elif case.name == 'circle':
        value = np.hypot(px, py) - p['radius']
    elif case.name == 'annulus':
        R = np.hypot(px, py)
        value = (R - p['outer']) * (R - p['inner'])
    else:
        R2 = px * px + py * py
        # r_theta is compared with R^2, not R
        r_theta = p['r0'] + p['amplitude'] * np.sin(p['omega'] * flower_angle(px, py))
        value = (R2 - r_theta) * (R2 - p['inner'] ** 2)

    return float(value) if np.ndim(value) == 0 else value


def _finite_difference_gradient(case: LevelSetCase, x: np.ndarray) -> np.ndarray:
    scale = np.maximum(1.0, np.hypot(x[..., 0], x[..., 1]))
    step = 1e-6 * scale
    ex = np.zeros_like(x)
    ey = np.zeros_like(x)
    ex[..., 0] = step
    ey[..., 1] = step
    gx = (np.asarray(eval_phi(case, x + ex)) - np.asarray(eval_phi(case, x - ex))) / (2.0 * step)
    gy = (np.asarray(eval_phi(case, x + ey)) - np.asarray(eval_phi(case, x - ey))) / (2.0 * step)
    return np.stack([gx, gy], axis=-1)


def grad_phi(case: LevelSetCase, x) -> np.ndarray:
    """
    Gradient of the level set at x, shape (..., 2).
    Analytic for halfplane, circle and annulus; central differences for the flower.
    """
    x = np.asarray(x, dtype=float)
    px, py = x[..., 0], x[..., 1]

    if case.name == 'halfplane':
        return np.stack([np.ones_like(px), np.zeros_like(py)], axis=-1)
    if case.name == 'flower':
        return _finite_difference_gradient(case, x)

    R = np.hypot(px, py)
    if np.any(R < 1e-14):
        raise GeometryError(f"gradient of the {case.name} level set is singular at the origin")
    radial = x / R[..., None]
    if case.name == 'circle':
        return radial
    p = case.params
    return ((2.0 * R - p['inner'] - p['outer'])[..., None]) * radial


# ---------------------------------------------------------------------------
# Ray root finding
# ---------------------------------------------------------------------------

def _refine_root(case, x, d, lo, hi, f_lo, cfg):
    """Bisection safeguarded Newton on a bracket [lo, hi] with a sign change"""
    s = 0.5 * (lo + hi)
    for _ in range(cfg.max_iter):
        f_s = eval_phi(case, x + s * d)
        if abs(f_s) <= cfg.tol:
            return s
        if (f_s < 0) == (f_lo < 0):
            lo, f_lo = s, f_s
        else:
            hi = s
        if abs(hi - lo) <= 4.0 * np.finfo(float).eps * max(1.0, abs(s)):
            return s
        slope = float(np.dot(grad_phi(case, x + s * d), d))
        candidate = s - f_s / slope if slope != 0.0 else None
        if candidate is None or not (min(lo, hi) < candidate < max(lo, hi)):
            candidate = 0.5 * (lo + hi)
        s = candidate
    return s


def find_zero_along(case: LevelSetCase, x, d, cfg: RayRootConfig = None) -> float:
    """
    Signed distance s along the unit direction d from x to the zero level set.

    The bracket [-s, s] starts at cfg.initial_step and doubles until a sign
    change is found (capped at cfg.smax). When both sides change sign at the
    same radius the smaller root is returned.

    Raises:
        RootFindError: no sign change within [-smax, smax]
    """
    cfg = cfg or RayRootConfig()
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    if abs(np.hypot(*d) - 1.0) > 1e-12:
        raise GeometryError(f"Ray direction must be a unit vector, got |d|={np.hypot(*d)!r}")

    f0 = eval_phi(case, x)
    if abs(f0) <= cfg.tol:
        return 0.0

    step = min(cfg.initial_step, cfg.smax)
    while True:
        roots = []
        for sign in (1.0, -1.0):
            f_end = eval_phi(case, x + sign * step * d)
            if abs(f_end) <= cfg.tol:
                roots.append(sign * step)
            elif (f_end < 0) != (f0 < 0):
                lo, hi = 0.0, sign * step
                roots.append(_refine_root(case, x, d, lo, hi, f0, cfg))
        if roots:
            return float(min(roots, key=abs))
        if step >= cfg.smax:
            raise RootFindError(x, d, cfg.smax)
        step = min(2.0 * step, cfg.smax)


def project_to_boundary(case: LevelSetCase, points, normal, cfg: RayRootConfig = None) -> np.ndarray:
    """find_zero_along for several points sharing one direction"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return np.array([find_zero_along(case, pt, normal, cfg) for pt in points])
