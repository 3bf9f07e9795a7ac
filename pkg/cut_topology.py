"""
Cut Topology - classification of background elements against the nodal
interpolant of the level set, the polygonal boundary Gamma_h with its normals,
cut-cell sub-triangulations, ghost faces and boundary patches.
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional

import numpy as np

import config
from background_mesh import LOCAL_EDGES, BackgroundMesh
from level_set_geometry import LevelSetCase, RayRootConfig, eval_phi, find_zero_along

logger = logging.getLogger(__name__)


class ElementClass(IntEnum):
    INSIDE = 0
    OUTSIDE = 1
    CUT = 2


class TopologyError(RuntimeError):
    """Raised when the cut band cannot be organised as requested"""


class OpenChainError(TopologyError):
    """The boundary chain leaves the bounding box"""


@dataclass(frozen=True, eq=False)
class BoundarySegments:
    """
    Straight boundary pieces, one row per segment.

    points[s]  -- endpoints (2, 2); normals[s] is the right-hand normal of points[s,1] - points[s,0]
    faces[s]   -- mesh faces holding the two endpoints (-1 when an endpoint is a mesh vertex)
    """
    elements: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    lengths: np.ndarray
    faces: np.ndarray

    def __len__(self):
        return len(self.elements)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 2, 2)), np.zeros((0, 2)),
                   np.zeros(0), np.zeros((0, 2), dtype=np.int64))


@dataclass(eq=False)
class Patch:
    core: List[int]
    elements: List[int]
    segments: np.ndarray
    interior_nodes: List[int]
    nodal_values: Dict[int, float]
    gamma_length: float
    crossing_faces: List[int] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class CutTopology:
    classes: np.ndarray
    nodal_values: np.ndarray
    active_elements: np.ndarray
    cut_elements: np.ndarray
    segments: BoundarySegments
    box_segments: BoundarySegments
    sub_triangles: Dict[int, np.ndarray]
    ghost_faces: np.ndarray
    segment_of_element: Dict[int, int]

    @property
    def is_active(self) -> np.ndarray:
        return self.classes != ElementClass.OUTSIDE

    @property
    def inside_elements(self) -> np.ndarray:
        return np.flatnonzero(self.classes == ElementClass.INSIDE)


# ---------------------------------------------------------------------------
# Classification and interface reconstruction
# ---------------------------------------------------------------------------

def snap_nodal_values(values: np.ndarray, h: float, snap_factor: float = config.SNAP_FACTOR) -> np.ndarray:
    values = np.array(values, dtype=float)
    threshold = snap_factor * h
    values[np.abs(values) < threshold] = -threshold
    return values


def classify_by_sign(triangle_values: np.ndarray) -> np.ndarray:
    negative = (triangle_values < 0).sum(axis=1)
    classes = np.full(len(triangle_values), ElementClass.CUT, dtype=np.int8)
    classes[negative == 3] = ElementClass.INSIDE
    classes[negative == 0] = ElementClass.OUTSIDE
    return classes


def classify_elements(mesh: BackgroundMesh, case: LevelSetCase,
                      snap_factor: float = config.SNAP_FACTOR):
    """
    Sign classification of every element.

    Returns:
        (classes, nodal_values) with nodal values phi(x_i) after snapping
    """
    values = snap_nodal_values(np.asarray(eval_phi(case, mesh.vertices)), mesh.h, snap_factor)
    classes = classify_by_sign(values[mesh.triangles])
    logger.info(f"Classified {mesh.num_triangles} elements: "
                f"{int((classes == ElementClass.INSIDE).sum())} inside, "
                f"{int((classes == ElementClass.CUT).sum())} cut, "
                f"{int((classes == ElementClass.OUTSIDE).sum())} outside")
    return classes, values


def edge_zero(pa: np.ndarray, pb: np.ndarray, va: float, vb: float) -> np.ndarray:
    """Zero of the linear interpolant on the edge pa -> pb"""
    t = va / (va - vb)
    return pa + t * (pb - pa)


def segment_in_triangle(points: np.ndarray, values: np.ndarray):
    """
    Zero segment of the linear interpolant on one cut triangle.

    Returns:
        (endpoints (2, 2), unit normal, local edge indices of the endpoints);
        the normal points towards positive values and equals the right-hand
        normal of endpoints[1] - endpoints[0]
    """
    crossings = []
    edges = []
    for e, (a, b) in enumerate(LOCAL_EDGES):
        if (values[a] < 0) != (values[b] < 0):
            crossings.append(edge_zero(points[a], points[b], values[a], values[b]))
            edges.append(e)
    if len(crossings) != 2:
        raise TopologyError(f"Cut triangle has {len(crossings)} sign-change edges")

    p0, p1 = crossings
    tangent = p1 - p0
    length = float(np.hypot(*tangent))
    if length == 0.0:
        return np.array([p0, p1]), np.zeros(2), edges
    normal = np.array([tangent[1], -tangent[0]]) / length

    positive = values > 0
    toward_positive = points[positive].mean(axis=0) - points[~positive].mean(axis=0)
    if np.dot(normal, toward_positive) < 0:
        p0, p1 = p1, p0
        edges = edges[::-1]
        normal = -normal
    return np.array([p0, p1]), normal, edges


def reconstruct_interface(mesh: BackgroundMesh, nodal_values: np.ndarray, classes: np.ndarray,
                          degenerate_factor: float = config.DEGENERATE_SEGMENT_FACTOR):
    """
    Gamma_h segments of all cut elements.

    Degenerate segments (shorter than degenerate_factor * h) are dropped and the
    element is reclassified by its majority sign. classes is updated in place.

    Returns:
        BoundarySegments ordered by element index
    """
    elements, pts, normals, lengths, faces = [], [], [], [], []
    for t in np.flatnonzero(classes == ElementClass.CUT):
        tri_pts = mesh.vertices[mesh.triangles[t]]
        tri_vals = nodal_values[mesh.triangles[t]]
        endpoints, normal, edges = segment_in_triangle(tri_pts, tri_vals)
        length = float(np.hypot(*(endpoints[1] - endpoints[0])))
        if length < degenerate_factor * mesh.h:
            majority_inside = (tri_vals < 0).sum() >= 2
            classes[t] = ElementClass.INSIDE if majority_inside else ElementClass.OUTSIDE
            logger.warning(f"Degenerate boundary segment in element {t} (length {length:.3e}); "
                           f"reclassified as {ElementClass(classes[t]).name.lower()}")
            continue
        elements.append(t)
        pts.append(endpoints)
        normals.append(normal)
        lengths.append(length)
        faces.append([mesh.triangle_faces[t, e] for e in edges])

    if not elements:
        return BoundarySegments.empty()
    return BoundarySegments(
        elements=np.array(elements, dtype=np.int64),
        points=np.array(pts),
        normals=np.array(normals),
        lengths=np.array(lengths),
        faces=np.array(faces, dtype=np.int64),
    )


def negative_polygon(points: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Counter-clockwise polygon of the triangle part where the interpolant is <= 0"""
    polygon = []
    for a, b in LOCAL_EDGES:
        if values[a] <= 0:
            polygon.append(points[a])
        if (values[a] < 0) != (values[b] < 0):
            polygon.append(edge_zero(points[a], points[b], values[a], values[b]))
    return np.array(polygon)


def subtriangulate_cut_element(points: np.ndarray, values: np.ndarray) -> np.ndarray:
    """
    Positively oriented sub-triangles covering K intersected with {I_h phi <= 0}.

    Returns:
        array (1, 3, 2) for a corner cut, (2, 3, 2) for a quadrilateral split
        along its shorter diagonal
    """
    polygon = negative_polygon(points, values)
    if len(polygon) == 3:
        return polygon[None]
    if len(polygon) != 4:
        raise TopologyError(f"Unexpected cut polygon with {len(polygon)} vertices")
    q0, q1, q2, q3 = polygon
    if np.hypot(*(q2 - q0)) <= np.hypot(*(q3 - q1)):
        return np.array([[q0, q1, q2], [q0, q2, q3]])
    return np.array([[q1, q2, q3], [q1, q3, q0]])


def triangle_areas(tris: np.ndarray) -> np.ndarray:
    e1 = tris[..., 1, :] - tris[..., 0, :]
    e2 = tris[..., 2, :] - tris[..., 0, :]
    return 0.5 * (e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])


# ---------------------------------------------------------------------------
# Faces
# ---------------------------------------------------------------------------

def collect_ghost_faces(mesh: BackgroundMesh, classes: np.ndarray) -> np.ndarray:
    """Interior faces with both neighbours active and at least one of them cut"""
    interior = mesh.interior_faces()
    t0 = mesh.face_triangles[interior, 0]
    t1 = mesh.face_triangles[interior, 1]
    active = classes != ElementClass.OUTSIDE
    cut = classes == ElementClass.CUT
    keep = active[t0] & active[t1] & (cut[t0] | cut[t1])
    return interior[keep]


def collect_box_boundary_segments(mesh: BackgroundMesh, nodal_values: np.ndarray,
                                  classes: np.ndarray) -> BoundarySegments:
    """
    Parts of bounding-box faces that lie in Omega_h.

    These pieces are fitted: the outward box normal is exact and the boundary
    data is taken in place.
    """
    elements, pts, normals, lengths, faces = [], [], [], [], []
    for f in mesh.boundary_faces():
        t = mesh.face_triangles[f, 0]
        if classes[t] == ElementClass.OUTSIDE:
            continue
        a, b = mesh.faces[f]
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        va, vb = nodal_values[a], nodal_values[b]
        if va > 0 and vb > 0:
            continue
        if va > 0:
            pa = edge_zero(pa, pb, va, vb)
        elif vb > 0:
            pb = edge_zero(pa, pb, va, vb)
        normal = mesh.face_normals[f]
        # Keep the right-hand normal convention of BoundarySegments
        tangent = pb - pa
        if tangent[1] * normal[0] - tangent[0] * normal[1] < 0:
            pa, pb = pb, pa
        length = float(np.hypot(*(pb - pa)))
        if length <= 0.0:
            continue
        elements.append(t)
        pts.append([pa, pb])
        normals.append(normal)
        lengths.append(length)
        faces.append([f, f])

    if not elements:
        return BoundarySegments.empty()
    logger.info(f"Collected {len(elements)} fitted bounding-box boundary segments")
    return BoundarySegments(
        elements=np.array(elements, dtype=np.int64),
        points=np.array(pts, dtype=float),
        normals=np.array(normals),
        lengths=np.array(lengths),
        faces=np.array(faces, dtype=np.int64),
    )


def build_cut_topology(mesh: BackgroundMesh, case: LevelSetCase,
                       snap_factor: float = config.SNAP_FACTOR) -> CutTopology:
    """Classification, Gamma_h, sub-triangulations, ghost faces and box segments"""
    classes, values = classify_elements(mesh, case, snap_factor)
    segments = reconstruct_interface(mesh, values, classes)

    sub_triangles = {}
    for t in segments.elements:
        tri = mesh.triangles[t]
        sub_triangles[int(t)] = subtriangulate_cut_element(mesh.vertices[tri], values[tri])

    ghost_faces = collect_ghost_faces(mesh, classes)
    box_segments = collect_box_boundary_segments(mesh, values, classes)
    active = np.flatnonzero(classes != ElementClass.OUTSIDE)
    if len(active) == 0:
        raise TopologyError(f"No active elements: the {case.name} domain misses the mesh")

    topology = CutTopology(
        classes=classes,
        nodal_values=values,
        active_elements=active,
        cut_elements=segments.elements.copy(),
        segments=segments,
        box_segments=box_segments,
        sub_triangles=sub_triangles,
        ghost_faces=ghost_faces,
        segment_of_element={int(t): s for s, t in enumerate(segments.elements)},
    )
    logger.info(f"Cut topology: {len(active)} active elements, {len(segments)} boundary segments, "
                f"{len(ghost_faces)} ghost faces")
    return topology


# ---------------------------------------------------------------------------
# Boundary patches
# ---------------------------------------------------------------------------

def _other_triangle(mesh: BackgroundMesh, face: int, t: int) -> int:
    t0, t1 = mesh.face_triangles[face]
    return int(t1 if t0 == t else t0)


def trace_chains(mesh: BackgroundMesh, topology: CutTopology) -> List[List[int]]:
    """
    Closed chains of cut elements in the order Gamma_h traverses them.

    Raises:
        OpenChainError: a chain reaches the bounding box
    """
    seg = topology.segments
    lookup = topology.segment_of_element
    visited = set()
    chains = []
    for start in seg.elements:
        start = int(start)
        if start in visited:
            continue
        chain = []
        t = start
        while True:
            chain.append(t)
            visited.add(t)
            exit_face = int(seg.faces[lookup[t], 1])
            nxt = _other_triangle(mesh, exit_face, t)
            if nxt < 0:
                raise OpenChainError(f"Boundary chain leaves the bounding box through face {exit_face}")
            if nxt not in lookup:
                raise OpenChainError(f"Boundary chain broken after element {t}: neighbour {nxt} is not cut")
            if nxt == start:
                break
            if nxt in visited:
                raise TopologyError(f"Boundary chain revisits element {nxt}")
            t = nxt
        chains.append(chain)
    return chains


def _split_chain(chain: List[int], lengths: Dict[int, float], target_core_size: int,
                 min_length: float) -> List[List[int]]:
    cores = []
    current, current_length = [], 0.0
    for t in chain:
        current.append(t)
        current_length += lengths[t]
        if len(current) >= target_core_size and current_length >= min_length:
            cores.append(current)
            current, current_length = [], 0.0
    if current:
        if cores:
            cores[-1].extend(current)
        else:
            cores.append(current)
    return cores


def _face_crosses(mesh: BackgroundMesh, values: np.ndarray, f: int) -> bool:
    a, b = mesh.faces[f]
    return (values[a] < 0) != (values[b] < 0)


def build_patches(mesh: BackgroundMesh, topology: CutTopology,
                  target_core_size: int = config.PATCH_CORE_SIZE,
                  min_length_factor: float = config.PATCH_MIN_LENGTH_FACTOR) -> List[Patch]:
    """
    Split every closed chain of cut elements into consecutive cores.

    Each core holds at least target_core_size elements and at least
    min_length_factor * h of Gamma_h; a short remainder joins the last core.
    """
    if target_core_size < 1:
        raise TopologyError(f"Patch core size must be positive, got {target_core_size}")

    seg = topology.segments
    lookup = topology.segment_of_element
    values = topology.nodal_values
    active = topology.is_active
    lengths = {int(t): float(seg.lengths[s]) for t, s in lookup.items()}

    patches = []
    for chain in trace_chains(mesh, topology):
        for core in _split_chain(chain, lengths, target_core_size, min_length_factor * mesh.h):
            core_set = set(core)
            extended = set(core)
            for t in core:
                extended.update(n for n in mesh.neighbors(t) if active[n])
            elements = sorted(extended)

            crossing = []
            for t in elements:
                for f in mesh.triangle_faces[t]:
                    other = _other_triangle(mesh, f, t)
                    if (other < 0 or other not in extended) and _face_crosses(mesh, values, f):
                        crossing.append(int(f))
            crossing = sorted(set(crossing))
            blocked = set(mesh.faces[crossing].ravel().tolist()) if crossing else set()

            interior_cut = [t for t in elements
                            if t in lookup and not blocked.intersection(mesh.triangles[t].tolist())]
            interior_nodes = sorted({int(v) for t in interior_cut for v in mesh.triangles[t]})
            patch_nodes = sorted({int(v) for t in elements for v in mesh.triangles[t]})
            nodal = {v: 0.0 for v in patch_nodes}
            for v in interior_nodes:
                nodal[v] = -float(values[v])

            seg_ids = np.array([lookup[t] for t in core], dtype=np.int64)
            patches.append(Patch(
                core=list(core),
                elements=elements,
                segments=seg_ids,
                interior_nodes=interior_nodes,
                nodal_values=nodal,
                gamma_length=float(seg.lengths[seg_ids].sum()),
                crossing_faces=crossing,
            ))
            if not core_set.issubset(interior_cut):
                logger.warning(f"Patch core starting at element {core[0]} touches its crossing faces")

    logger.info(f"Built {len(patches)} boundary patches (core size >= {target_core_size})")
    return patches


def p1_gradient(points: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Constant gradient of the linear interpolant on one triangle"""
    B = np.column_stack([points[1] - points[0], points[2] - points[0]])
    rhs = np.array([values[1] - values[0], values[2] - values[0]])
    return np.linalg.solve(B.T, rhs)


def patch_xi(patch: Patch, mesh: BackgroundMesh, topology: CutTopology) -> float:
    """
    Mean of grad(phi_j) . n over Gamma_j, taken against the inward normal -n_h.

    The patch function is linear per element and n_h is constant per segment,
    so the one-point rule per segment is exact.
    """
    seg = topology.segments
    total = 0.0
    for s in patch.segments:
        t = int(seg.elements[s])
        tri = mesh.triangles[t]
        nodal = np.array([patch.nodal_values.get(int(v), 0.0) for v in tri])
        grad = p1_gradient(mesh.vertices[tri], nodal)
        total += float(seg.lengths[s]) * float(np.dot(grad, -seg.normals[s]))
    return total / patch.gamma_length


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def omega_h_area(mesh: BackgroundMesh, topology: CutTopology) -> float:
    inside = topology.inside_elements
    area = float(mesh.signed_areas(inside).sum()) if len(inside) else 0.0
    for tris in topology.sub_triangles.values():
        area += float(triangle_areas(tris).sum())
    return area


def boundary_gauss_points(segments: BoundarySegments, npts: int = 3) -> np.ndarray:
    """Gauss-Legendre points on every segment, shape (nseg, npts, 2)"""
    xi, _ = np.polynomial.legendre.leggauss(npts)
    s = 0.5 * (xi + 1.0)
    p0 = segments.points[:, 0]
    p1 = segments.points[:, 1]
    return p0[:, None, :] + s[None, :, None] * (p1 - p0)[:, None, :]


def interface_distance(topology: CutTopology, case: LevelSetCase,
                       cfg: Optional[RayRootConfig] = None, npts: int = 3) -> float:
    """delta_h: largest |rho_h| over Gauss points of Gamma_h"""
    seg = topology.segments
    if len(seg) == 0:
        return 0.0
    pts = boundary_gauss_points(seg, npts)
    delta = 0.0
    for s in range(len(seg)):
        for x in pts[s]:
            delta = max(delta, abs(find_zero_along(case, x, seg.normals[s], cfg)))
    return delta


def geometry_diagnostics(mesh: BackgroundMesh, topology: CutTopology, case: LevelSetCase,
                         cfg: Optional[RayRootConfig] = None) -> dict:
    """Area of Omega_h, length of Gamma_h and delta_h"""
    diagnostics = {
        'area_omega_h': omega_h_area(mesh, topology),
        'length_gamma_h': float(topology.segments.lengths.sum()),
        'delta_h': interface_distance(topology, case, cfg),
    }
    logger.info(f"Geometry diagnostics: area={diagnostics['area_omega_h']:.8f}, "
                f"length={diagnostics['length_gamma_h']:.8f}, delta_h={diagnostics['delta_h']:.3e}")
    return diagnostics
