"""
Manufactured Solutions - exact u, grad u, f = -lap u and g = u for each geometry
Functions take points of shape (..., 2) and are evaluated analytically on all of
Omega_h, including the thin band outside the exact domain.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

import config
from level_set_geometry import LevelSetCase, make_case

logger = logging.getLogger(__name__)

# Smallest radius where the annulus source may be evaluated
ANNULUS_MIN_RADIUS = 0.05


class ManufacturedDataError(ValueError):
    """Exact data requested where it is undefined"""


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    level_set: LevelSetCase
    u: Callable
    grad_u: Callable
    f: Callable
    g: Callable
    description: str = ''


def _split(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0], x[..., 1]


# --- circle: u = cos(pi R^2 / 2) ---------------------------------------------

def _circle_u(x):
    px, py = _split(x)
    return np.cos(0.5 * np.pi * (px * px + py * py))


def _circle_grad(x):
    px, py = _split(x)
    s = -np.pi * np.sin(0.5 * np.pi * (px * px + py * py))
    return np.stack([s * px, s * py], axis=-1)


def _circle_f(x):
    px, py = _split(x)
    R2 = px * px + py * py
    return np.pi ** 2 * R2 * np.cos(0.5 * np.pi * R2) + 2.0 * np.pi * np.sin(0.5 * np.pi * R2)


# --- annulus: u = 20 (0.75 - R)(R - 0.25) -------------------------------------

def _annulus_u(x):
    px, py = _split(x)
    R = np.hypot(px, py)
    return 20.0 * (0.75 - R) * (R - 0.25)


def _annulus_grad(x):
    px, py = _split(x)
    R = np.hypot(px, py)
    safe = np.where(R > 0, R, 1.0)
    s = np.where(R > 0, 20.0 * (1.0 / safe - 2.0), 0.0)
    return np.stack([s * px, s * py], axis=-1)


def _annulus_f(x):
    px, py = _split(x)
    R = np.hypot(px, py)
    if np.any(R <= ANNULUS_MIN_RADIUS):
        raise ManufacturedDataError(
            f"Annulus source evaluated at radius {float(np.min(R)):.3e} <= {ANNULUS_MIN_RADIUS}")
    return 20.0 * (4.0 - 1.0 / R)


# --- flower: u = cos(pi x / 2) cos(pi y / 2) ----------------------------------

def _flower_u(x):
    px, py = _split(x)
    return np.cos(0.5 * np.pi * px) * np.cos(0.5 * np.pi * py)


def _flower_grad(x):
    px, py = _split(x)
    cx, cy = np.cos(0.5 * np.pi * px), np.cos(0.5 * np.pi * py)
    sx, sy = np.sin(0.5 * np.pi * px), np.sin(0.5 * np.pi * py)
    return np.stack([-0.5 * np.pi * sx * cy, -0.5 * np.pi * cx * sy], axis=-1)


def _flower_f(x):
    return 0.5 * np.pi ** 2 * _flower_u(x)


# --- halfplane: a polynomial of the discretization degree ----------------------

def _halfplane_functions(degree: int):
    if degree == 1:
        def u(x):
            px, py = _split(x)
            return px + py + 1.0

        def grad(x):
            px, _ = _split(x)
            return np.stack([np.ones_like(px), np.ones_like(px)], axis=-1)

        def f(x):
            px, _ = _split(x)
            return np.zeros_like(px)

        return u, grad, f, 'x + y + 1'

    if degree == 2:
        def u(x):
            px, py = _split(x)
            return px * px + px * py + 1.0

        def grad(x):
            px, py = _split(x)
            return np.stack([2.0 * px + py, px], axis=-1)

        def f(x):
            px, _ = _split(x)
            return np.full_like(px, -2.0)

        return u, grad, f, 'x^2 + x y + 1'

    def u(x):
        px, py = _split(x)
        return px ** 3 + px * px * py + 1.0

    def grad(x):
        px, py = _split(x)
        return np.stack([3.0 * px * px + 2.0 * px * py, px * px], axis=-1)

    def f(x):
        px, py = _split(x)
        return -6.0 * px - 2.0 * py

    return u, grad, f, 'x^3 + x^2 y + 1'


def make_manufactured(case_id: str, degree: int = 2) -> ManufacturedCase:
    """
    Manufactured case for a geometry id.

    Args:
        case_id: one of config.CASE_IDS
        degree: polynomial degree of the halfplane solution (ignored elsewhere)
    """
    if case_id not in config.CASE_IDS:
        raise ManufacturedDataError(f"Unknown case '{case_id}', expected one of {config.CASE_IDS}")
    level_set = make_case(case_id)

    if case_id == 'halfplane':
        if degree not in config.SUPPORTED_DEGREES:
            raise ManufacturedDataError(f"Unsupported halfplane degree {degree}")
        u, grad, f, description = _halfplane_functions(degree)
    elif case_id == 'circle':
        u, grad, f, description = _circle_u, _circle_grad, _circle_f, 'cos(pi R^2 / 2)'
    elif case_id == 'annulus':
        u, grad, f, description = _annulus_u, _annulus_grad, _annulus_f, '20 (0.75 - R)(R - 0.25)'
    else:
        u, grad, f, description = _flower_u, _flower_grad, _flower_f, 'cos(pi x / 2) cos(pi y / 2)'

    logger.debug(f"Manufactured case {case_id}: u = {description}")
    return ManufacturedCase(name=case_id, level_set=level_set, u=u, grad_u=grad, f=f, g=u,
                            description=description)
