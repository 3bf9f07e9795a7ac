"""
Finite element space - P1/P2/P3 Lagrange elements on the active part of the background mesh.

Basis functions are stored as monomial coefficient tables C[i, a, b] of
xi^a * eta^b on the reference triangle, so values, gradients and directional
derivatives of any order are exact polynomial evaluations.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

import config
from background_mesh import LOCAL_EDGES, BackgroundMesh

logger = logging.getLogger(__name__)


class SpaceError(ValueError):
    """Raised for unsupported element degrees or empty active sets"""


# ---------------------------------------------------------------------------
# Reference element
# ---------------------------------------------------------------------------

def lagrange_nodes(degree: int) -> np.ndarray:
    """Vertices, then p-1 equispaced nodes per edge (LOCAL_EDGES order), then the p=3 centroid"""
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    nodes = [c for c in corners]
    for a, b in LOCAL_EDGES:
        for j in range(1, degree):
            nodes.append(corners[a] + (j / degree) * (corners[b] - corners[a]))
    if degree == 3:
        nodes.append(corners.mean(axis=0))
    return np.array(nodes)


def monomial_exponents(degree: int) -> list:
    return [(a, b) for total in range(degree + 1) for a in range(total, -1, -1) for b in [total - a]]


def _derivative(coeffs: np.ndarray, axis: int) -> np.ndarray:
    """d/dxi (axis 0) or d/deta (axis 1) of coefficient tables [..., a, b]"""
    p1 = coeffs.shape[-1]
    factors = np.arange(1, p1, dtype=float)
    out = np.zeros_like(coeffs)
    if axis == 0:
        out[..., :-1, :] = coeffs[..., 1:, :] * factors[:, None]
    else:
        out[..., :, :-1] = coeffs[..., :, 1:] * factors[None, :]
    return out


def monomial_table(points: np.ndarray, degree: int) -> np.ndarray:
    """M[..., a, b] = xi^a eta^b, shape (..., p+1, p+1)"""
    points = np.asarray(points, dtype=float)
    powers = np.arange(degree + 1)
    xa = points[..., 0, None] ** powers
    yb = points[..., 1, None] ** powers
    return xa[..., :, None] * yb[..., None, :]


class ReferenceElement:
    """P_p Lagrange element on the reference triangle"""

    def __init__(self, degree: int):
        if degree not in config.SUPPORTED_DEGREES:
            raise SpaceError(f"Lagrange degree {degree} not supported; use one of {config.SUPPORTED_DEGREES}")
        self.degree = degree
        self.nodes = lagrange_nodes(degree)
        self.num_basis = len(self.nodes)

        exponents = monomial_exponents(degree)
        vandermonde = np.array([[x ** a * y ** b for a, b in exponents] for x, y in self.nodes])
        inverse = np.linalg.inv(vandermonde)
        # Column i of the inverse holds the monomial coefficients of basis function i
        self.coeffs = np.zeros((self.num_basis, degree + 1, degree + 1))
        for m, (a, b) in enumerate(exponents):
            self.coeffs[:, a, b] = inverse[m, :]
        self.grad_coeffs = np.stack([_derivative(self.coeffs, 0), _derivative(self.coeffs, 1)], axis=1)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Basis values, shape (..., nb)"""
        M = monomial_table(points, self.degree)
        return np.einsum('iab,...ab->...i', self.coeffs, M)

    def reference_gradients(self, points: np.ndarray) -> np.ndarray:
        """Reference gradients, shape (..., nb, 2)"""
        M = monomial_table(points, self.degree)
        return np.einsum('icab,...ab->...ic', self.grad_coeffs, M)

    def directional_coefficients(self, ref_direction: np.ndarray, order: int) -> np.ndarray:
        """
        Coefficient tables of (e . grad_ref)^order psi_i for reference directions e.

        Args:
            ref_direction: shape (..., 2)

        Returns:
            shape (..., nb, p+1, p+1)
        """
        e = np.asarray(ref_direction, dtype=float)
        coeffs = np.broadcast_to(self.coeffs, e.shape[:-1] + self.coeffs.shape).copy()
        if order > self.degree:
            return np.zeros_like(coeffs)
        ex = e[..., 0, None, None, None]
        ey = e[..., 1, None, None, None]
        for _ in range(order):
            coeffs = ex * _derivative(coeffs, 0) + ey * _derivative(coeffs, 1)
        return coeffs


@lru_cache(maxsize=None)
def reference_element(degree: int) -> ReferenceElement:
    return ReferenceElement(degree)


# ---------------------------------------------------------------------------
# Affine maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ElementMaps:
    """x = origin + B xi for a batch of triangles"""
    origin: np.ndarray
    B: np.ndarray
    Binv: np.ndarray
    det: np.ndarray

    def to_reference(self, points: np.ndarray) -> np.ndarray:
        """points (ne, ..., 2) -> reference coordinates (ne, ..., 2)"""
        shape = points.shape
        rel = points.reshape(shape[0], -1, 2) - self.origin[:, None, :]
        ref = np.einsum('eij,eqj->eqi', self.Binv, rel)
        return ref.reshape(shape)

    def to_physical(self, ref_points: np.ndarray) -> np.ndarray:
        """Shared reference points (nq, 2) -> (ne, nq, 2)"""
        return self.origin[:, None, :] + np.einsum('eij,qj->eqi', self.B, ref_points)

    def reference_direction(self, direction: np.ndarray) -> np.ndarray:
        """B^-1 d for a physical direction per element (ne, 2) or shared (2,)"""
        direction = np.asarray(direction, dtype=float)
        if direction.ndim == 1:
            return np.einsum('eij,j->ei', self.Binv, direction)
        return np.einsum('eij,ej->ei', self.Binv, direction)


def element_maps(mesh: BackgroundMesh, elements) -> ElementMaps:
    pts = mesh.triangle_points(np.atleast_1d(elements))
    origin = pts[:, 0]
    B = np.stack([pts[:, 1] - origin, pts[:, 2] - origin], axis=2)
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    Binv = np.empty_like(B)
    Binv[:, 0, 0] = B[:, 1, 1] / det
    Binv[:, 1, 1] = B[:, 0, 0] / det
    Binv[:, 0, 1] = -B[:, 0, 1] / det
    Binv[:, 1, 0] = -B[:, 1, 0] / det
    return ElementMaps(origin=origin, B=B, Binv=Binv, det=det)


# ---------------------------------------------------------------------------
# Physical basis evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasisRequest:
    """values | gradients | directional (with a unit direction and derivative order)"""
    kind: str = 'values'
    direction: Optional[tuple] = None
    order: int = 0


def physical_gradients(elem: ReferenceElement, maps: ElementMaps, ref_points: np.ndarray) -> np.ndarray:
    """
    Physical gradients B^-T grad_ref psi.

    Args:
        ref_points: (ne, nq, 2) per element, or shared (nq, 2)

    Returns:
        (ne, nq, nb, 2)
    """
    G = elem.reference_gradients(ref_points)
    if G.ndim == 3:
        return np.einsum('eji,qbj->eqbi', maps.Binv, G)
    return np.einsum('eji,eqbj->eqbi', maps.Binv, G)


def directional_derivatives(elem: ReferenceElement, maps: ElementMaps, ref_points: np.ndarray,
                            direction: np.ndarray, order: int) -> np.ndarray:
    """
    Order-th derivative of every basis function along a physical direction.

    Args:
        ref_points: (ne, nq, 2)
        direction: (ne, 2) per element or shared (2,)

    Returns:
        (ne, nq, nb)
    """
    e = maps.reference_direction(direction)
    C = elem.directional_coefficients(e, order)            # (ne, nb, a, b)
    M = monomial_table(ref_points, elem.degree)             # (ne, nq, a, b)
    return np.einsum('eiab,eqab->eqi', C, M)


def reference_basis_eval(elem: ReferenceElement, points: np.ndarray, request: BasisRequest = BasisRequest(),
                         maps: Optional[ElementMaps] = None) -> np.ndarray:
    """
    Evaluate the basis at reference points.

    Without maps, gradients and directional derivatives are taken in reference
    coordinates. With maps (one element), they are physical quantities.
    """
    points = np.asarray(points, dtype=float)
    if request.kind == 'values':
        return elem.values(points)
    if request.kind == 'gradients':
        if maps is None:
            return elem.reference_gradients(points)
        return physical_gradients(elem, maps, points)[0]
    if request.kind == 'directional':
        if request.direction is None:
            raise SpaceError("Directional request needs a direction")
        d = np.asarray(request.direction, dtype=float)
        if maps is None:
            coeffs = elem.directional_coefficients(d, request.order)
            return np.einsum('iab,...ab->...i', coeffs, monomial_table(points, elem.degree))
        return directional_derivatives(elem, maps, points[None], d, request.order)[0]
    raise SpaceError(f"Unknown basis request '{request.kind}'")


# ---------------------------------------------------------------------------
# Discrete space
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """
    element_dofs[t] -- global dofs of element t in reference node order, -1 rows for inactive elements
    """
    mesh: BackgroundMesh
    degree: int
    element: ReferenceElement
    active_elements: np.ndarray
    element_dofs: np.ndarray
    dof_coordinates: np.ndarray

    @property
    def num_dofs(self) -> int:
        return len(self.dof_coordinates)

    def dofs(self, elements) -> np.ndarray:
        return self.element_dofs[elements]


def build_dof_map(mesh: BackgroundMesh, active_elements, degree: int) -> DiscreteSpace:
    """
    Continuous P_p dof numbering over the active elements.

    Vertices come first, then edge nodes, then element interiors, each in index order.
    """
    active = np.unique(np.asarray(active_elements, dtype=np.int64))
    if len(active) == 0:
        raise SpaceError("Cannot build a discrete space on an empty active set")
    elem = reference_element(degree)
    p = degree

    vertex_ids = np.unique(mesh.triangles[active].ravel())
    vertex_number = np.full(mesh.num_vertices, -1, dtype=np.int64)
    vertex_number[vertex_ids] = np.arange(len(vertex_ids))
    coords = [mesh.vertices[vertex_ids]]
    next_dof = len(vertex_ids)

    edge_base = np.full(mesh.num_faces, -1, dtype=np.int64)
    if p >= 2:
        face_ids = np.unique(mesh.triangle_faces[active].ravel())
        edge_base[face_ids] = next_dof + (p - 1) * np.arange(len(face_ids))
        a = mesh.vertices[mesh.faces[face_ids, 0]]
        b = mesh.vertices[mesh.faces[face_ids, 1]]
        ts = np.arange(1, p) / p
        coords.append((a[:, None, :] + ts[None, :, None] * (b - a)[:, None, :]).reshape(-1, 2))
        next_dof += (p - 1) * len(face_ids)

    interior_base = np.full(mesh.num_triangles, -1, dtype=np.int64)
    if p == 3:
        interior_base[active] = next_dof + np.arange(len(active))
        coords.append(mesh.triangle_points(active).mean(axis=1))
        next_dof += len(active)

    element_dofs = np.full((mesh.num_triangles, elem.num_basis), -1, dtype=np.int64)
    tris = mesh.triangles[active]
    element_dofs[active, :3] = vertex_number[tris]
    if p >= 2:
        for e, (la, lb) in enumerate(LOCAL_EDGES):
            faces = mesh.triangle_faces[active, e]
            forward = tris[:, la] < tris[:, lb]
            for j in range(p - 1):
                k = np.where(forward, j, p - 2 - j)
                element_dofs[active, 3 + e * (p - 1) + j] = edge_base[faces] + k
    if p == 3:
        element_dofs[active, 9] = interior_base[active]

    space = DiscreteSpace(
        mesh=mesh,
        degree=degree,
        element=elem,
        active_elements=active,
        element_dofs=element_dofs,
        dof_coordinates=np.concatenate(coords, axis=0),
    )
    logger.info(f"Built P{degree} space: {space.num_dofs} dofs on {len(active)} active elements")
    return space


def lagrange_interpolate(space: DiscreteSpace, f: Callable) -> np.ndarray:
    """Nodal interpolant: coefficient i = f(dof coordinate i)"""
    values = np.asarray(f(space.dof_coordinates), dtype=float)
    if values.ndim == 0:
        values = np.full(space.num_dofs, float(values))
    return values.reshape(space.num_dofs).copy()


def evaluate_function(space: DiscreteSpace, coefficients: np.ndarray, elements, ref_points: np.ndarray):
    """
    Values and physical gradients of a discrete function.

    Args:
        elements: element ids (ne,)
        ref_points: (ne, nq, 2) or shared (nq, 2)

    Returns:
        values (ne, nq), gradients (ne, nq, 2)
    """
    elements = np.atleast_1d(elements)
    maps = element_maps(space.mesh, elements)
    local = coefficients[space.element_dofs[elements]]              # (ne, nb)
    phi = space.element.values(ref_points)
    if phi.ndim == 2:
        values = np.einsum('qb,eb->eq', phi, local)
    else:
        values = np.einsum('eqb,eb->eq', phi, local)
    grads = np.einsum('eqbi,eb->eqi', physical_gradients(space.element, maps, ref_points), local)
    return values, grads
