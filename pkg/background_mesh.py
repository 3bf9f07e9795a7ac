"""
Background Mesh - structured criss-cross triangulation of a bounding box
Every square of an n x n grid is split by its lower-left to upper-right diagonal.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

# Local edges of a triangle, in counter-clockwise order
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


class MeshError(ValueError):
    """Raised for invalid mesh input"""


@dataclass(frozen=True)
class BoundingBox:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.xmin, self.ymin, self.xmax, self.ymax])):
            raise MeshError(f"Bounding box has non-finite coordinates: {self}")
        if self.xmax <= self.xmin:
            raise MeshError(f"Bounding box needs xmax > xmin, got xmin={self.xmin}, xmax={self.xmax}")
        if self.ymax <= self.ymin:
            raise MeshError(f"Bounding box needs ymax > ymin, got ymin={self.ymin}, ymax={self.ymax}")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        points = np.asarray(points)
        return ((points[..., 0] >= self.xmin - tol) & (points[..., 0] <= self.xmax + tol)
                & (points[..., 1] >= self.ymin - tol) & (points[..., 1] <= self.ymax + tol))


@dataclass(frozen=True, eq=False)
class BackgroundMesh:
    """
    Immutable triangulation with face adjacency.

    faces[f]          -- sorted vertex pair of face f
    face_triangles[f] -- (t0, t1) incident triangles with t0 < t1, t1 = -1 on the box boundary
    triangle_faces[t] -- face index of each local edge (LOCAL_EDGES order)
    face_normals[f]   -- unit normal oriented from t0 towards t1 (outward on the boundary)
    """
    bbox: BoundingBox
    n: int
    vertices: np.ndarray
    triangles: np.ndarray
    faces: np.ndarray
    face_triangles: np.ndarray
    triangle_faces: np.ndarray
    face_normals: np.ndarray
    diameters: np.ndarray
    h: float
    _vertex_star: tuple = field(repr=False, default=None)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def triangle_points(self, elements=None) -> np.ndarray:
        """Vertex coordinates, shape (ne, 3, 2)"""
        tris = self.triangles if elements is None else self.triangles[elements]
        return self.vertices[tris]

    def signed_areas(self, elements=None) -> np.ndarray:
        pts = self.triangle_points(elements)
        e1 = pts[:, 1] - pts[:, 0]
        e2 = pts[:, 2] - pts[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_triangles[:, 1] < 0)

    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_triangles[:, 1] >= 0)

    def face_length(self, f: int) -> float:
        a, b = self.vertices[self.faces[f]]
        return float(np.hypot(*(b - a)))

    def vertex_star(self, v: int) -> np.ndarray:
        """Triangles sharing vertex v, in increasing index order"""
        offsets, members = self._vertex_star
        return members[offsets[v]:offsets[v + 1]]

    def neighbors(self, t: int) -> list:
        """Triangles sharing at least one vertex with t (t excluded), sorted"""
        star = np.unique(np.concatenate([self.vertex_star(v) for v in self.triangles[t]]))
        return [int(s) for s in star if s != t]


def _build_vertex_star(triangles: np.ndarray, num_vertices: int) -> tuple:
    flat = triangles.ravel()
    owners = np.repeat(np.arange(len(triangles)), 3)
    order = np.lexsort((owners, flat))
    counts = np.bincount(flat, minlength=num_vertices)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return offsets, owners[order]


def _build_faces(vertices: np.ndarray, triangles: np.ndarray):
    """Deterministic face enumeration (lexicographic in the sorted vertex pair)"""
    local = triangles[:, LOCAL_EDGES]                      # (nt, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    faces, inverse = np.unique(pairs, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    triangle_faces = inverse.reshape(-1, 3)

    face_triangles = np.full((len(faces), 2), -1, dtype=np.int64)
    owners = np.repeat(np.arange(len(triangles)), 3)
    for t, f in zip(owners, inverse):
        if face_triangles[f, 0] < 0:
            face_triangles[f, 0] = t
        elif face_triangles[f, 1] < 0:
            face_triangles[f, 1] = t
        else:
            raise MeshError(f"Face {f} has more than two incident triangles")
    # Triangles were visited in increasing order, so t0 < t1 already holds

    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    tangent = b - a
    lengths = np.hypot(tangent[:, 0], tangent[:, 1])
    normals = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / lengths[:, None]

    centroids = vertices[triangles].mean(axis=1)
    midpoints = 0.5 * (a + b)
    c0 = centroids[face_triangles[:, 0]]
    interior = face_triangles[:, 1] >= 0
    # Interior: from t0 to t1; boundary: away from t0
    reference = np.where(interior[:, None], centroids[np.maximum(face_triangles[:, 1], 0)] - c0, midpoints - c0)
    flip = np.einsum('ij,ij->i', normals, reference) < 0
    normals[flip] *= -1.0
    return faces, face_triangles, triangle_faces, normals


def build_structured_mesh(bbox: BoundingBox, n: int) -> BackgroundMesh:
    """
    Build the n x n criss-cross triangulation of bbox.

    Args:
        bbox: Bounding box of the domain
        n: Number of squares per direction

    Returns:
        BackgroundMesh with row-major vertex and triangle numbering
    """
    if not isinstance(bbox, BoundingBox):
        raise MeshError(f"Expected a BoundingBox, got {type(bbox).__name__}")
    if int(n) != n or n < 1:
        raise MeshError(f"Mesh resolution must be a positive integer, got {n}")
    n = int(n)

    xs = np.linspace(bbox.xmin, bbox.xmax, n + 1)
    ys = np.linspace(bbox.ymin, bbox.ymax, n + 1)
    X, Y = np.meshgrid(xs, ys)                    # row j holds y = ys[j]
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i = i.ravel()
    j = j.ravel()
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3).astype(np.int64)

    faces, face_triangles, triangle_faces, normals = _build_faces(vertices, triangles)

    pts = vertices[triangles]
    edge_vectors = pts[:, [1, 2, 0]] - pts
    diameters = np.hypot(edge_vectors[..., 0], edge_vectors[..., 1]).max(axis=1)

    mesh = BackgroundMesh(
        bbox=bbox,
        n=n,
        vertices=vertices,
        triangles=triangles,
        faces=faces,
        face_triangles=face_triangles,
        triangle_faces=triangle_faces,
        face_normals=normals,
        diameters=diameters,
        h=float(diameters.max()),
        _vertex_star=_build_vertex_star(triangles, len(vertices)),
    )
    logger.info(f"Built {n}x{n} background mesh: {mesh.num_vertices} vertices, "
                f"{mesh.num_triangles} triangles, {mesh.num_faces} faces, h={mesh.h:.4e}")
    return mesh


def write_mesh_dump(mesh: BackgroundMesh, path: str) -> None:
    """Plain-text listing for debugging: 'v x y' and 't i j k' lines"""
    with open(path, 'w') as f:
        for x, y in mesh.vertices:
            f.write(f"v {x!r} {y!r}\n")
        for a, b, c in mesh.triangles:
            f.write(f"t {a} {b} {c}\n")
    logger.info(f"Wrote mesh dump to {path}")
