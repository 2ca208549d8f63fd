"""Geometric primitives: point clouds, triangle meshes, neighbor graphs.

Coordinates are float64 ``(N, 3)`` arrays throughout. Containers validate on
construction and freeze their arrays (``writeable=False``); anything that
needs to mutate positions works on its own copies.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInput


def _as_points(arr, what: str) -> np.ndarray:
    pts = np.asarray(arr, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInput(f"{what} must have shape (N, 3), got {pts.shape}")
    if pts.shape[0] < 1:
        raise InvalidInput(f"{what} must contain at least one row")
    if not np.isfinite(pts).all():
        raise InvalidInput(f"{what} contains non-finite coordinates")
    return pts


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(eq=False)
class NormTransform:
    """Record of a centroid/scale normalization, invertible exactly."""

    center: np.ndarray
    scale: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.scale = float(self.scale)
        if not (np.isfinite(self.center).all() and np.isfinite(self.scale)):
            raise InvalidInput("transform must be finite")
        if self.scale <= 0:
            raise InvalidInput(f"scale must be positive, got {self.scale}")

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) / self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) * self.scale + self.center


@dataclass(eq=False)
class PointCloud:
    """An unordered set of 3D points, optionally carrying the transform that
    produced it from an original frame."""

    points: np.ndarray
    transform: NormTransform | None = None

    def __post_init__(self):
        self.points = _freeze(_as_points(self.points, "points"))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.points.mean(axis=0)

    @property
    def bounding_radius(self) -> float:
        """Max distance from the centroid; the scale every relative knob
        (noise level, sampling widths, density features) is measured against."""
        d = self.points - self.centroid
        return float(np.sqrt((d * d).sum(axis=1)).max())


def normalize(cloud: PointCloud) -> PointCloud:
    """Center at the centroid and scale so the farthest point has norm 1.

    A degenerate cloud (all points coincident) is only centered; scale 1.
    Returns a new cloud with the transform attached for later inversion.
    """
    center = cloud.points.mean(axis=0)
    d = cloud.points - center
    radius = float(np.sqrt((d * d).sum(axis=1)).max())
    if radius == 0.0:
        scale = 1.0
    else:
        # slight inflation keeps every recomputed norm strictly <= 1
        scale = radius * (1.0 + 5e-13)
    return PointCloud(d / scale, transform=NormTransform(center, scale))


def denormalize(cloud: PointCloud) -> PointCloud:
    if cloud.transform is None:
        raise InvalidInput("cloud carries no transform")
    return PointCloud(cloud.transform.invert(cloud.points))


@dataclass(eq=False)
class NeighborGraph:
    """k nearest neighbors per point, self excluded.

    Rows are sorted by ascending distance, ties broken by lower point index.
    When k >= N the graph is truncated to N-1 columns and flagged.
    """

    neighbors: np.ndarray  # (N, k_eff) int64
    distances: np.ndarray  # (N, k_eff) float64
    requested_k: int
    truncated: bool = False

    def __post_init__(self):
        self.neighbors = _freeze(np.asarray(self.neighbors, dtype=np.int64))
        self.distances = _freeze(np.asarray(self.distances, dtype=np.float64))

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    def __len__(self) -> int:
        return self.neighbors.shape[0]


def build_knn_graph(cloud: PointCloud, k: int) -> NeighborGraph:
    """Exact k nearest neighbors for every point.

    A kd-tree generates candidates; the final ranking re-sorts exact squared
    distances with (distance, index) ordering, so results match a brute-force
    scan even under distance ties.
    """
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise InvalidInput(f"k must be an integer, got {k!r}")
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    pts = cloud.points
    n = pts.shape[0]
    k_eff = min(int(k), n - 1)
    truncated = k > n - 1
    if k_eff == 0:
        return NeighborGraph(
            np.empty((n, 0), np.int64), np.empty((n, 0)), int(k), truncated
        )

    tree = cKDTree(pts)
    kth_dist, _ = tree.query(pts, k=k_eff + 1)
    # ball radius covers the (k_eff+1) nearest including self, inflated to
    # absorb last-ulp differences between tree and recomputed distances
    radius = kth_dist[:, -1] * (1.0 + 1e-9) + np.finfo(np.float64).tiny
    candidates = tree.query_ball_point(pts, radius)

    neighbors = np.empty((n, k_eff), dtype=np.int64)
    distances = np.empty((n, k_eff), dtype=np.float64)
    for i, cand in enumerate(candidates):
        ci = np.asarray(cand, dtype=np.int64)
        ci = ci[ci != i]
        diff = pts[ci] - pts[i]
        d2 = (diff * diff).sum(axis=1)
        order = np.lexsort((ci, d2))[:k_eff]
        neighbors[i] = ci[order]
        distances[i] = np.sqrt(d2[order])
    return NeighborGraph(neighbors, distances, int(k), truncated)


@dataclass(eq=False)
class TriMesh:
    """Triangle mesh. Degenerate (zero-area) faces are dropped on
    construction and counted in ``dropped_faces``."""

    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64
    dropped_faces: int = 0
    _surface_index: "_SurfaceIndex | None" = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        self.vertices = _as_points(self.vertices, "vertices")
        faces = np.asarray(self.faces, dtype=np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise InvalidInput(f"faces must have shape (F, 3), got {faces.shape}")
        if faces.shape[0] < 1:
            raise InvalidInput("mesh must contain at least one face")
        v = self.vertices.shape[0]
        if faces.min() < 0 or faces.max() >= v:
            raise InvalidInput("face index out of range")

        keep = ~_degenerate_mask(self.vertices, faces)
        self.dropped_faces = int((~keep).sum()) + int(self.dropped_faces)
        faces = faces[keep]
        if faces.shape[0] == 0:
            raise InvalidInput("all faces are degenerate")
        self.vertices = _freeze(self.vertices)
        self.faces = _freeze(faces)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def face_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        cross = np.cross(b - a, c - a)
        return 0.5 * np.sqrt((cross * cross).sum(axis=1))

    def surface_index(self) -> "_SurfaceIndex":
        if self._surface_index is None:
            self._surface_index = _SurfaceIndex(self)
        return self._surface_index


def _degenerate_mask(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """True where a face has (numerically) zero area."""
    a = vertices[faces[:, 0]]
    b = vertices[faces[:, 1]]
    c = vertices[faces[:, 2]]
    cross = np.cross(b - a, c - a)
    area2 = np.sqrt((cross * cross).sum(axis=1))
    edge = np.maximum(
        ((b - a) ** 2).sum(axis=1),
        np.maximum(((c - a) ** 2).sum(axis=1), ((c - b) ** 2).sum(axis=1)),
    )
    same = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (
        faces[:, 0] == faces[:, 2]
    )
    return same | (area2 <= 1e-14 * np.maximum(edge, np.finfo(np.float64).tiny))


def _closest_on_triangles(
    p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray
) -> np.ndarray:
    """Closest point on triangle (a, b, c) to p, all arrays (M, 3).

    Region-based method: classify p against the triangle's Voronoi regions
    (vertices, edges, interior) and project accordingly. Requires
    non-degenerate triangles.
    """

    def dot(x, y):
        return (x * y).sum(axis=1)

    out = np.empty_like(p)
    remaining = np.arange(p.shape[0])

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = dot(ab, ap)
    d2 = dot(ac, ap)

    m = (d1 <= 0.0) & (d2 <= 0.0)  # vertex region A
    out[remaining[m]] = a[m]
    keep = ~m
    remaining, a, b, c, p = remaining[keep], a[keep], b[keep], c[keep], p[keep]
    ab, ac, d1, d2 = ab[keep], ac[keep], d1[keep], d2[keep]

    bp = p - b
    d3 = dot(ab, bp)
    d4 = dot(ac, bp)
    m = (d3 >= 0.0) & (d4 <= d3)  # vertex region B
    out[remaining[m]] = b[m]
    keep = ~m
    remaining, a, b, c, p = remaining[keep], a[keep], b[keep], c[keep], p[keep]
    ab, ac, d1, d2, d3, d4 = (
        ab[keep], ac[keep], d1[keep], d2[keep], d3[keep], d4[keep],
    )

    vc = d1 * d4 - d3 * d2
    m = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)  # edge AB
    if m.any():
        v = d1[m] / (d1[m] - d3[m])
        out[remaining[m]] = a[m] + v[:, None] * ab[m]
    keep = ~m
    remaining, a, b, c, p = remaining[keep], a[keep], b[keep], c[keep], p[keep]
    ab, ac, d1, d2, d3, d4, vc = (
        ab[keep], ac[keep], d1[keep], d2[keep], d3[keep], d4[keep], vc[keep],
    )

    cp = p - c
    d5 = dot(ab, cp)
    d6 = dot(ac, cp)
    m = (d6 >= 0.0) & (d5 <= d6)  # vertex region C
    out[remaining[m]] = c[m]
    keep = ~m
    remaining, a, b, c, p = remaining[keep], a[keep], b[keep], c[keep], p[keep]
    ab, ac, d1, d2, d3, d4, d5, d6, vc = (
        ab[keep], ac[keep], d1[keep], d2[keep], d3[keep], d4[keep],
        d5[keep], d6[keep], vc[keep],
    )

    vb = d5 * d2 - d1 * d6
    m = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)  # edge AC
    if m.any():
        w = d2[m] / (d2[m] - d6[m])
        out[remaining[m]] = a[m] + w[:, None] * ac[m]
    keep = ~m
    remaining, a, b, c = remaining[keep], a[keep], b[keep], c[keep]
    ab, ac, d1, d2, d3, d4, d5, d6, vb, vc = (
        ab[keep], ac[keep], d1[keep], d2[keep], d3[keep], d4[keep],
        d5[keep], d6[keep], vb[keep], vc[keep],
    )

    va = d3 * d6 - d5 * d4
    m = (va <= 0.0) & ((d4 - d3) >= 0.0) & ((d5 - d6) >= 0.0)  # edge BC
    if m.any():
        w = (d4[m] - d3[m]) / ((d4[m] - d3[m]) + (d5[m] - d6[m]))
        out[remaining[m]] = b[m] + w[:, None] * (c[m] - b[m])
    keep = ~m
    remaining, a, b, c = remaining[keep], a[keep], b[keep], c[keep]
    ab, ac, va, vb, vc = ab[keep], ac[keep], va[keep], vb[keep], vc[keep]

    if remaining.size:  # interior
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        out[remaining] = a + v[:, None] * ab + w[:, None] * ac
    return out


class _SurfaceIndex:
    """Accelerator for exact nearest-surface-point queries.

    The nearest vertex gives an upper bound on the surface distance; any
    triangle that could contain a closer point must have its centroid within
    (bound + max triangle reach) of the query, which a centroid kd-tree
    enumerates. Exactness is preserved because the final minimum is taken
    over exact per-triangle closest points.
    """

    def __init__(self, mesh: TriMesh):
        self.a = mesh.vertices[mesh.faces[:, 0]]
        self.b = mesh.vertices[mesh.faces[:, 1]]
        self.c = mesh.vertices[mesh.faces[:, 2]]
        self.centroids = (self.a + self.b + self.c) / 3.0
        reach = np.zeros(len(self.centroids))
        for corner in (self.a, self.b, self.c):
            d = corner - self.centroids
            reach = np.maximum(reach, np.sqrt((d * d).sum(axis=1)))
        self.max_reach = float(reach.max())
        self.vertex_tree = cKDTree(mesh.vertices)
        self.centroid_tree = cKDTree(self.centroids)

    def query(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        q = np.asarray(q, dtype=np.float64)
        bound, _ = self.vertex_tree.query(q)
        radius = (bound + self.max_reach) * (1.0 + 1e-9)
        cand = self.centroid_tree.query_ball_point(q, radius)

        lens = np.fromiter((len(c) for c in cand), dtype=np.int64, count=len(cand))
        flat = np.concatenate([np.sort(np.asarray(c, np.int64)) for c in cand])
        seg = np.repeat(np.arange(len(q)), lens)
        q_rep = np.repeat(q, lens, axis=0)
        cp = _closest_on_triangles(q_rep, self.a[flat], self.b[flat], self.c[flat])
        diff = q_rep - cp
        d2 = (diff * diff).sum(axis=1)

        order = np.lexsort((d2, seg))
        seg_sorted = seg[order]
        firsts = order[np.searchsorted(seg_sorted, np.arange(len(q)))]
        return cp[firsts], np.sqrt(d2[firsts])


def nearest_surface_points(mesh: TriMesh, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact closest points on the mesh surface for a batch of queries.

    Returns ``(points (M, 3), distances (M,))``.
    """
    q = _as_points(queries, "queries")
    return mesh.surface_index().query(q)


def nearest_surface_point(mesh: TriMesh, query: np.ndarray) -> tuple[np.ndarray, float]:
    q = np.asarray(query, dtype=np.float64).reshape(1, 3)
    pts, d = nearest_surface_points(mesh, q)
    return pts[0], float(d[0])
