"""Trained gradient fields: local features, a small perceptron, SGD training.

The field is g_i(x) = G(x - x_i, f_i) where f_i is a 7-dimensional summary
of anchor i's neighborhood in the noisy cloud:

    [0:3]  covariance eigenvalues, sorted descending, normalized by their sum
    [3]    density proxy: mean neighbor distance / cloud bounding radius
    [4:7]  principal covariance axis (unit), sign-fixed deterministically

G is a perceptron (default 10 -> 64 -> 64 -> 3, tanh hidden, identity
output) trained by plain SGD to regress the displacement toward a clean
reference at positions sampled around each anchor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .errors import Diverged, InvalidInput
from .fields import GradientField, _frozen
from .geometry import NeighborGraph, PointCloud, TriMesh, build_knn_graph, nearest_surface_points
from .noise import rng_from_seed

log = logging.getLogger(__name__)

FEATURE_DIM = 7
MODEL_FORMAT_VERSION = 1


def extract_features(cloud: PointCloud, graph: NeighborGraph) -> np.ndarray:
    """Per-anchor feature rows, (N, 7). Deterministic: identical clouds give
    bit-identical features."""
    if graph.k < 3:
        raise InvalidInput(f"features need a graph with k >= 3, got k={graph.k}")
    if len(graph) != len(cloud):
        raise InvalidInput("graph and cloud sizes differ")
    pts = cloud.points
    n = pts.shape[0]
    group = np.concatenate([np.arange(n)[:, None], graph.neighbors], axis=1)
    local = pts[group]
    centered = local - local.mean(axis=1)[:, None, :]
    cov = centered.transpose(0, 2, 1) @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending

    triple = eigvals[:, ::-1]
    total = triple.sum(axis=1)
    degenerate = total <= 0
    safe_total = np.where(degenerate, 1.0, total)
    triple = triple / safe_total[:, None]
    triple[degenerate] = 1.0 / 3.0  # coincident neighborhood: isotropic by convention

    radius = cloud.bounding_radius
    if radius == 0.0:
        density = np.zeros(n)
    else:
        density = graph.distances.mean(axis=1) / radius

    axis = eigvecs[:, :, 2].copy()  # largest eigenvalue
    lead = np.take_along_axis(axis, np.argmax(np.abs(axis), axis=1)[:, None], axis=1)[:, 0]
    axis = np.where((lead < 0)[:, None], -axis, axis)

    return np.concatenate([triple, density[:, None], axis], axis=1)


def extract_feature(cloud: PointCloud, graph: NeighborGraph, i: int) -> np.ndarray:
    if not 0 <= i < len(cloud):
        raise InvalidInput(f"anchor index {i} out of range")
    return extract_features(cloud, graph)[i]


@dataclass(eq=False)
class PerceptronParams:
    """Dense layer weights/biases. Hidden layers use tanh; output is linear."""

    weights: list  # W_l with shape (out, in)
    biases: list  # b_l with shape (out,)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise InvalidInput("weights and biases must be non-empty, same length")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise InvalidInput(f"layer {l}: inconsistent shapes {w.shape} / {b.shape}")
            if l and w.shape[1] != self.weights[l - 1].shape[0]:
                raise InvalidInput(f"layer {l}: input dim mismatch")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def copy(self) -> "PerceptronParams":
        return PerceptronParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_params(layer_sizes, seed: int) -> PerceptronParams:
    """Uniform Glorot initialization from a seeded Philox stream."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise InvalidInput(f"bad layer sizes {sizes}")
    rng = rng_from_seed(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return PerceptronParams(weights, biases)


def _forward(params: PerceptronParams, x: np.ndarray, keep: bool = False):
    """Batch forward pass; optionally returns per-layer activations."""
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        h = z if l == last else np.tanh(z)
        if keep:
            acts.append(h)
    return (h, acts) if keep else h


def mlp_forward(params: PerceptronParams, relpos, feat) -> np.ndarray:
    """G(relpos, feat) for a single query; returns (3,)."""
    relpos = np.asarray(relpos, dtype=np.float64).reshape(-1)
    feat = np.asarray(feat, dtype=np.float64).reshape(-1)
    x = np.concatenate([relpos, feat])[None, :]
    expected = params.layer_sizes[0]
    if x.shape[1] != expected:
        raise InvalidInput(f"input dim {x.shape[1]} != network input {expected}")
    return _forward(params, x)[0]


def loss_and_grad(params: PerceptronParams, inputs: np.ndarray, targets: np.ndarray):
    """Mean squared error over the batch and its exact parameter gradient.

    loss = mean_b || G(inputs_b) - targets_b ||^2
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise InvalidInput("inputs and targets must be matching 2D batches")
    batch = x.shape[0]
    out, acts = _forward(params, x, keep=True)
    err = out - y
    loss = float((err * err).sum() / batch)

    g_w = [None] * len(params.weights)
    g_b = [None] * len(params.biases)
    delta = 2.0 * err / batch  # d loss / d output
    for l in range(len(params.weights) - 1, -1, -1):
        g_w[l] = delta.T @ acts[l]
        g_b[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ params.weights[l]) * (1.0 - acts[l] ** 2)
    return loss, PerceptronParams(g_w, g_b)


@dataclass
class TrainConfig:
    """Hyperparameters for field training; all scales are relative to the
    noisy cloud's bounding radius."""

    sigma_s: float = 0.03  # sampling spread around each anchor
    samples_per_anchor: int = 16
    lr: float = 0.05
    epochs: int = 30
    batch: int = 64
    seed: int = 0
    knn: int = 4
    hidden: tuple = (64, 64)

    def __post_init__(self):
        if self.sigma_s <= 0:
            raise InvalidInput(f"sigma_s must be > 0, got {self.sigma_s}")
        for name in ("samples_per_anchor", "epochs", "batch", "knn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise InvalidInput(f"{name} must be a positive integer, got {v!r}")
        if self.lr < 0:
            raise InvalidInput(f"lr must be >= 0, got {self.lr}")
        if self.seed < 0:
            raise InvalidInput(f"seed must be >= 0, got {self.seed}")
        if len(self.hidden) < 1 or any(int(h) < 1 for h in self.hidden):
            raise InvalidInput(f"hidden sizes must be positive, got {self.hidden}")


def displacement_targets(reference, samples: np.ndarray) -> np.ndarray:
    """Displacement from each sample to the clean reference: nearest surface
    point for a mesh, nearest point for a clean cloud."""
    if isinstance(reference, TriMesh):
        surface, _ = nearest_surface_points(reference, samples)
        return surface - samples
    if isinstance(reference, PointCloud):
        _, idx = cKDTree(reference.points).query(samples)
        return reference.points[idx] - samples
    raise InvalidInput(f"reference must be TriMesh or PointCloud, got {type(reference)!r}")


def train_field(reference, noisy: PointCloud, cfg: TrainConfig):
    """Fit the perceptron on displacement targets sampled around anchors.

    Returns ``(params, epoch_losses)``. Deterministic for a fixed config.
    Raises :class:`Diverged` if the loss goes non-finite.
    """
    graph = build_knn_graph(noisy, cfg.knn)
    feats = extract_features(noisy, graph)
    radius = noisy.bounding_radius
    if radius == 0.0:
        raise InvalidInput("cannot train on a degenerate cloud")

    rng = rng_from_seed(cfg.seed)
    n = len(noisy)
    m = cfg.samples_per_anchor
    anchors_rep = np.repeat(noisy.points, m, axis=0)
    offsets = rng.normal(0.0, cfg.sigma_s * radius, (n * m, 3))
    samples = anchors_rep + offsets
    targets = displacement_targets(reference, samples)
    inputs = np.concatenate([offsets, np.repeat(feats, m, axis=0)], axis=1)

    params = init_params([3 + FEATURE_DIM, *cfg.hidden, 3], cfg.seed)
    losses = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n * m)
        total = 0.0
        for start in range(0, n * m, cfg.batch):
            sel = perm[start : start + cfg.batch]
            loss, grads = loss_and_grad(params, inputs[sel], targets[sel])
            if not np.isfinite(loss):
                raise Diverged(f"training diverged: non-finite loss at epoch {epoch}, batch {start // cfg.batch}")
            total += loss * len(sel)
            for w, gw in zip(params.weights, grads.weights):
                w -= cfg.lr * gw
            for b, gb in zip(params.biases, grads.biases):
                b -= cfg.lr * gb
        losses.append(total / (n * m))
        log.info("epoch %d: loss %.6e", epoch, losses[-1])
    return params, losses


class LearnedField(GradientField):
    """Perceptron field over a fixed anchor set and its features."""

    def __init__(self, anchors: np.ndarray, features: np.ndarray, params: PerceptronParams):
        self.anchors = _frozen(anchors)
        self.features = _frozen(features)
        if self.features.shape != (self.anchors.shape[0], FEATURE_DIM):
            raise InvalidInput("features must be (N, 7) matching anchors")
        self.params = params
        self.n_anchors = self.anchors.shape[0]

    def query_batch(self, anchor_idx, positions) -> np.ndarray:
        idx = self._check_indices(anchor_idx)
        p = np.asarray(positions, dtype=np.float64)
        rel = p - self.anchors[idx]
        x = np.concatenate([rel, self.features[idx]], axis=1)
        return _forward(self.params, x)


def build_learned_field(
    cloud: PointCloud,
    params: PerceptronParams,
    *,
    feature_knn: int,
    graph: NeighborGraph | None = None,
) -> LearnedField:
    """Anchor a trained perceptron on a cloud: features are extracted with
    the same neighborhood size used at training time."""
    if graph is None or graph.k != min(feature_knn, len(cloud) - 1):
        graph = build_knn_graph(cloud, feature_knn)
    feats = extract_features(cloud, graph)
    return LearnedField(cloud.points, feats, params)


def learned_query(field: LearnedField, i: int, x) -> np.ndarray:
    """g_i(x) for a learned field; equals G(x - x_i, f_i)."""
    return field.query(i, x)


def save_model(params: PerceptronParams, path, *, feature_knn: int) -> None:
    """Versioned, exact serialization (npz keeps float64 bit patterns)."""
    payload = {
        "format_version": np.asarray(MODEL_FORMAT_VERSION, dtype=np.int64),
        "layer_sizes": np.asarray(params.layer_sizes, dtype=np.int64),
        "feature_knn": np.asarray(int(feature_knn), dtype=np.int64),
        "n_layers": np.asarray(len(params.weights), dtype=np.int64),
    }
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        payload[f"w{l}"] = w
        payload[f"b{l}"] = b
    with open(path, "wb") as f:
        np.savez(f, **payload)


def load_model(path):
    """Inverse of :func:`save_model`; returns ``(params, feature_knn)``."""
    try:
        archive = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise InvalidInput(f"cannot read model file {path}: {exc}") from None
    with archive:
        if "format_version" not in archive:
            raise InvalidInput(f"{path}: not a model file")
        version = int(archive["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise InvalidInput(f"{path}: unsupported model format version {version}")
        n_layers = int(archive["n_layers"])
        weights = [archive[f"w{l}"] for l in range(n_layers)]
        biases = [archive[f"b{l}"] for l in range(n_layers)]
        feature_knn = int(archive["feature_knn"])
    return PerceptronParams(weights, biases), feature_knn
