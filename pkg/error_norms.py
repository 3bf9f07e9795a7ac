"""
Error Norms - L2, H1 seminorm, triple norm and star norm of the discretization error on Omega_h

    |||e|||^2 = ||grad e||^2_{Omega_h} + h^-1 ||e||^2_{dOmega_h} + J_h(pi_h u - u_h, pi_h u - u_h)

The ghost term acts on the discrete difference pi_h u - u_h since J_h is only
defined on the finite element space. The star norm is evaluated entirely on
that discrete difference.

The boundary part of the triple norm, h^-1/2 ||e||_{dOmega_h}, is also reported
on its own as the trace error. The boundary value correction of order k leaves a
consistency error of order h^{2k+3/2} in it.
"""

import logging
from typing import Optional

import numpy as np

import config
from assembly import (AssemblyConfig, BoundaryQuadrature, assemble_ghost_penalty, boundary_quadrature,
                      integration_cells, taylor_series_value)
from cut_topology import CutTopology
from fe_space import (DiscreteSpace, directional_derivatives, element_maps, evaluate_function,
                      lagrange_interpolate)
from level_set_geometry import RayRootConfig
from quadrature import map_to_triangles, quadrature_rule

logger = logging.getLogger(__name__)


def _volume_quadrature(space: DiscreteSpace, topology: CutTopology, degree: int):
    corners, owners = integration_cells(space.mesh, topology)
    points, weights = map_to_triangles(quadrature_rule('triangle', degree), corners)
    ref = element_maps(space.mesh, owners).to_reference(points)
    return owners, points, weights, ref


def _boundary_values(space: DiscreteSpace, coefficients: np.ndarray, boundary: BoundaryQuadrature):
    ref = element_maps(space.mesh, boundary.elements).to_reference(boundary.points)
    return evaluate_function(space, coefficients, boundary.elements, ref)


def discrete_star_norm(space: DiscreteSpace, topology: CutTopology, w: np.ndarray, ghost,
                       boundary: BoundaryQuadrature, taylor_order: int) -> float:
    """
    ||w||_*^2 = |||w|||^2 + h ||grad w . n_h||^2 + h^-1 ||T_{1,k}(w)||^2 (boundary norms on dOmega_h)

    Args:
        w: coefficient vector of a discrete function
        ghost: assembled ghost penalty matrix
        boundary: boundary quadrature carrying rho_h
    """
    h = space.mesh.h
    degree = 2 * space.degree + 2
    owners, _, weights, ref = _volume_quadrature(space, topology, degree)
    _, grads = evaluate_function(space, w, owners, ref)
    total = float(np.sum(weights * np.sum(grads * grads, axis=-1)))
    total += float(w @ (ghost @ w))

    if len(boundary):
        values, bgrads = _boundary_values(space, w, boundary)
        dn = np.einsum('sqi,si->sq', bgrads, boundary.normals)
        maps = element_maps(space.mesh, boundary.elements)
        ref_b = maps.to_reference(boundary.points)
        local = w[space.element_dofs[boundary.elements]]
        derivatives = [np.einsum('sqb,sb->sq',
                                 directional_derivatives(space.element, maps, ref_b, boundary.normals, i),
                                 local)
                       for i in range(1, taylor_order + 1)]
        correction = taylor_series_value(derivatives, boundary.rho, start=1)
        correction = np.broadcast_to(correction, values.shape)
        wts = boundary.weights
        total += float(np.sum(wts * values * values)) / h
        total += h * float(np.sum(wts * dn * dn))
        total += float(np.sum(wts * correction * correction)) / h
    return float(np.sqrt(max(total, 0.0)))


def compute_errors(space: DiscreteSpace, coefficients: np.ndarray, problem, topology: CutTopology,
                   ghost=None, boundary: Optional[BoundaryQuadrature] = None, taylor_order: int = 1,
                   gamma_g: float = config.GHOST_PENALTY, root_cfg: Optional[RayRootConfig] = None) -> dict:
    """
    Errors of u_h against the exact solution of a manufactured problem.

    Args:
        space: discrete space of u_h
        coefficients: u_h
        problem: ManufacturedCase
        topology: cut topology the space lives on
        ghost: ghost penalty matrix (assembled here when None)
        boundary: boundary quadrature with rho_h (built here when None)
        taylor_order: k used by the star norm

    Returns:
        dict with l2, h1_semi, trace, triple and star
    """
    p = space.degree
    degree = 2 * p + 2
    h = space.mesh.h
    coefficients = np.asarray(coefficients, dtype=float)
    if len(coefficients) != space.num_dofs:
        raise ValueError(f"Coefficient vector has length {len(coefficients)}, space has {space.num_dofs} dofs")

    if ghost is None:
        ghost = assemble_ghost_penalty(space.mesh, topology, space,
                                       AssemblyConfig(degree=p, taylor_order=taylor_order, gamma_g=gamma_g))
    if boundary is None:
        boundary = boundary_quadrature(topology, problem.level_set, degree, root_cfg)

    owners, points, weights, ref = _volume_quadrature(space, topology, degree)
    values, grads = evaluate_function(space, coefficients, owners, ref)
    e = np.asarray(problem.u(points)) - values
    de = np.asarray(problem.grad_u(points)) - grads
    l2_sq = float(np.sum(weights * e * e))
    h1_sq = float(np.sum(weights * np.sum(de * de, axis=-1)))

    trace_sq = 0.0
    if len(boundary):
        bvalues, _ = _boundary_values(space, coefficients, boundary)
        be = np.asarray(problem.u(boundary.points)) - bvalues
        trace_sq = float(np.sum(boundary.weights * be * be))

    w = lagrange_interpolate(space, problem.u) - coefficients
    ghost_sq = max(float(w @ (ghost @ w)), 0.0)
    triple = float(np.sqrt(h1_sq + trace_sq / h + ghost_sq))
    star = discrete_star_norm(space, topology, w, ghost, boundary, taylor_order)

    errors = {
        'l2': float(np.sqrt(l2_sq)),
        'h1_semi': float(np.sqrt(h1_sq)),
        'trace': float(np.sqrt(trace_sq / h)),
        'triple': triple,
        'star': star,
    }
    logger.info(f"Errors: L2={errors['l2']:.3e}, H1={errors['h1_semi']:.3e}, trace={errors['trace']:.3e}, "
                f"triple={errors['triple']:.3e}, star={errors['star']:.3e}")
    return errors
