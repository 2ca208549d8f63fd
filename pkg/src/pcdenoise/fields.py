"""Gradient-field providers and the neighborhood ensemble.

A field assigns to each anchor i (a point of the original noisy cloud) a
function g_i(x): the estimated displacement from an arbitrary query position
x toward the underlying surface. Anchor state is computed once from the
noisy cloud and never changes afterwards; during denoising only the query
positions move.

Providers:
    OracleField   exact displacement to a reference mesh (anchor-independent)
    MlsField      projection onto a per-anchor PCA plane
    LearnedField  small perceptron applied to (x - x_i, f_i); see learned.py
"""
from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .errors import InvalidInput
from .geometry import NeighborGraph, PointCloud, TriMesh, nearest_surface_points


class GradientField(ABC):
    """Query interface shared by all providers.

    Gradient vectors are raw displacements (never normalized); magnitude
    carries the distance information the solver relies on.
    """

    #: True when g_i(x) does not depend on i (the oracle); lets the ensemble
    #: skip redundant anchor duplication.
    anchor_independent: bool = False

    #: number of anchors, or None when anchor-independent
    n_anchors: int | None = None

    @abstractmethod
    def query_batch(self, anchor_idx: np.ndarray | None, positions: np.ndarray) -> np.ndarray:
        """g_{anchor_idx[m]}(positions[m]) for every row m; returns (M, 3)."""

    def query(self, i: int, x: np.ndarray) -> np.ndarray:
        """Single-anchor convenience wrapper."""
        idx = None if self.anchor_independent else np.asarray([i], dtype=np.int64)
        x = np.asarray(x, dtype=np.float64).reshape(1, 3)
        return self.query_batch(idx, x)[0]

    def _check_indices(self, anchor_idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(anchor_idx, dtype=np.int64)
        if self.n_anchors is not None and idx.size:
            if idx.min() < 0 or idx.max() >= self.n_anchors:
                raise InvalidInput("anchor index out of range")
        return idx


class OracleField(GradientField):
    """Exact displacement to the nearest point of a reference mesh."""

    anchor_independent = True

    def __init__(self, mesh: TriMesh, n_anchors: int | None = None):
        self.mesh = mesh
        self.n_anchors = n_anchors

    def query_batch(self, anchor_idx, positions) -> np.ndarray:
        p = np.asarray(positions, dtype=np.float64)
        surface, _ = nearest_surface_points(self.mesh, p)
        return surface - p


class MlsField(GradientField):
    """Per-anchor local plane fits; a query is displaced onto its anchor's
    plane: g_i(x) = ((c_i - x) . n_i) n_i."""

    def __init__(self, anchors: np.ndarray, centroids: np.ndarray, normals: np.ndarray):
        self.anchors = _frozen(anchors)
        self.centroids = _frozen(centroids)
        self.normals = _frozen(normals)
        self.n_anchors = self.anchors.shape[0]

    def query_batch(self, anchor_idx, positions) -> np.ndarray:
        idx = self._check_indices(anchor_idx)
        p = np.asarray(positions, dtype=np.float64)
        c = self.centroids[idx]
        n = self.normals[idx]
        h = ((c - p) * n).sum(axis=1)
        return h[:, None] * n


def _frozen(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).copy()
    out.flags.writeable = False
    return out


def build_mls_field(cloud: PointCloud, graph: NeighborGraph) -> MlsField:
    """Fit one plane per anchor over {x_i} union its graph neighbors.

    Plane normal: eigenvector of the smallest covariance eigenvalue, sign
    chosen so n_i . (x_i - c_i) >= 0 (deterministic largest-component rule
    when that dot product is exactly zero).
    """
    if graph.k < 3:
        raise InvalidInput(f"mls field needs a graph with k >= 3, got k={graph.k}")
    if len(graph) != len(cloud):
        raise InvalidInput("graph and cloud sizes differ")
    pts = cloud.points
    n = pts.shape[0]
    group = np.concatenate([np.arange(n)[:, None], graph.neighbors], axis=1)
    local = pts[group]  # (N, k+1, 3)
    centroids = local.mean(axis=1)
    centered = local - centroids[:, None, :]
    cov = centered.transpose(0, 2, 1) @ centered
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]  # smallest eigenvalue -> plane normal

    side = ((pts - centroids) * normals).sum(axis=1)
    flip = side < 0
    normals = np.where(flip[:, None], -normals, normals)
    on_plane = side == 0
    if on_plane.any():
        sub = normals[on_plane]
        lead = np.take_along_axis(
            sub, np.argmax(np.abs(sub), axis=1)[:, None], axis=1
        )[:, 0]
        normals[on_plane] = np.where((lead < 0)[:, None], -sub, sub)
    return MlsField(pts, centroids, normals)


def pairwise_mean(values: np.ndarray) -> np.ndarray:
    """Mean over axis 1 of (N, k, 3), summed as a balanced pairwise tree.

    For power-of-two k this makes "k identical vectors average to exactly
    that vector" a guarantee instead of a coincidence; odd k may round by
    one ulp (3v is not generally representable).
    """
    cols = [values[:, j] for j in range(values.shape[1])]
    if not cols:
        raise InvalidInput("ensemble needs at least one neighbor")
    while len(cols) > 1:
        nxt = [cols[i] + cols[i + 1] for i in range(0, len(cols) - 1, 2)]
        if len(cols) % 2:
            nxt.append(cols[-1])
        cols = nxt
    return cols[0] / values.shape[1]


def ensemble_gradients(
    field: GradientField, graph: NeighborGraph, positions: np.ndarray
) -> np.ndarray:
    """Per-point ensemble gradient: the mean of the k neighbor-anchor fields
    evaluated at each point's current position.

    Neighbor sets come from the fixed graph of the original cloud; position
    row m is evaluated against the anchors of graph row m.
    """
    p = np.asarray(positions, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 3:
        raise InvalidInput(f"positions must be (N, 3), got {p.shape}")
    if p.shape[0] != len(graph):
        raise InvalidInput("positions and graph sizes differ")
    if field.anchor_independent:
        # mean over k identical values is the value itself
        return field.query_batch(None, p)
    k = graph.k
    if k == 0:
        raise InvalidInput("ensemble needs at least one neighbor")
    flat_idx = graph.neighbors.reshape(-1)
    flat_pos = np.repeat(p, k, axis=0)
    g = field.query_batch(flat_idx, flat_pos).reshape(p.shape[0], k, 3)
    return pairwise_mean(g)


def ensemble_gradient(
    field: GradientField, graph: NeighborGraph, i: int, x: np.ndarray
) -> np.ndarray:
    """Single-point version of :func:`ensemble_gradients`."""
    if not 0 <= i < len(graph):
        raise InvalidInput(f"point index {i} out of range")
    x = np.asarray(x, dtype=np.float64).reshape(3)
    if field.anchor_independent:
        return field.query_batch(None, x[None, :])[0]
    idx = graph.neighbors[i]
    if idx.size == 0:
        raise InvalidInput("ensemble needs at least one neighbor")
    pos = np.broadcast_to(x, (idx.size, 3)).copy()
    g = field.query_batch(idx, pos)
    return pairwise_mean(g[None, :, :])[0]


def parse_provider(spec: str, *, cloud: PointCloud, graph: NeighborGraph) -> GradientField:
    """Build a field from a CLI-style provider string.

    Recognized: ``mls``, ``oracle:<mesh.off>``, ``learned:<model.npz>``.
    """
    from . import io, learned  # local import keeps module load light

    if spec == "mls":
        return build_mls_field(cloud, graph)
    if spec.startswith("oracle:"):
        path = spec.split(":", 1)[1]
        if not path:
            raise InvalidInput("oracle provider needs a mesh path: oracle:<mesh.off>")
        return OracleField(io.load_off(path), n_anchors=len(cloud))
    if spec.startswith("learned:"):
        path = spec.split(":", 1)[1]
        if not path:
            raise InvalidInput("learned provider needs a model path: learned:<model.npz>")
        params, feature_knn = learned.load_model(path)
        return learned.build_learned_field(cloud, params, feature_knn=feature_knn)
    raise InvalidInput(
        f"unknown field provider {spec!r}; expected mls, oracle:<mesh.off> or learned:<model.npz>"
    )
