"""Momentum gradient ascent over an ensemble gradient field.

Per point, with z the ensemble gradient at the current position:

    x(0) = input position          v(0) = 0
    v(t) = alpha * z(x(t-1)) + (1 - alpha) * v(t-1)
    x(t) = x(t-1) + beta * gamma**t * v(t)        t = 1 .. steps

The decay exponent is the post-increment step count, so the first update is
scaled by gamma**1. alpha = 1 degenerates to classical gradient ascent
(the velocity IS the gradient); ``classical_denoise`` is exactly that.

All points advance simultaneously from the same snapshot each step. The
field and graph stay fixed; only query positions move. No internal
randomness or parallelism: same inputs give bit-identical outputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import Diverged, InvalidInput
from .fields import GradientField, ensemble_gradients
from .geometry import NeighborGraph, PointCloud


@dataclass(frozen=True)
class AscentConfig:
    steps: int = 15
    alpha: float = 0.9
    beta: float = 0.2
    gamma: float = 0.95

    def __post_init__(self):
        if not isinstance(self.steps, (int, np.integer)) or self.steps < 1:
            raise InvalidInput(f"steps must be a positive integer, got {self.steps!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise InvalidInput(f"alpha must be in (0, 1], got {self.alpha}")
        if not self.beta > 0.0:
            raise InvalidInput(f"beta must be > 0, got {self.beta}")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidInput(f"gamma must be in (0, 1], got {self.gamma}")


@dataclass(eq=False)
class AscentState:
    positions: np.ndarray  # (N, 3)
    velocities: np.ndarray  # (N, 3)
    t: int = 0


@dataclass
class StepStats:
    step: int
    mean_grad_magnitude: float
    mean_displacement: float


@dataclass
class Trajectory:
    """Optional per-step record: position snapshots (length steps + 1,
    starting at the input) and summary stats (length steps)."""

    snapshots: list = dc_field(default_factory=list)
    steps: list = dc_field(default_factory=list)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for s in self.steps:
                f.write(
                    json.dumps(
                        {
                            "step": s.step,
                            "mean_grad_magnitude": s.mean_grad_magnitude,
                            "mean_displacement": s.mean_displacement,
                        }
                    )
                    + "\n"
                )


def _check_gradients(z: np.ndarray, t: int) -> None:
    bad = ~np.isfinite(z).all(axis=1)
    if bad.any():
        i = int(np.argmax(bad))
        raise Diverged(f"non-finite gradient for point {i} at step {t}")


def momentum_step(state: AscentState, gradients: np.ndarray, config: AscentConfig) -> AscentState:
    """One synchronous update of every point; returns the advanced state.

    Arithmetic is pinned for reproducibility: the scalar ``beta * gamma**t``
    is formed first, then multiplied into the velocity.
    """
    z = np.asarray(gradients, dtype=np.float64)
    if z.shape != state.positions.shape:
        raise InvalidInput(f"gradients shape {z.shape} != positions {state.positions.shape}")
    t = state.t + 1
    _check_gradients(z, t)
    vel = config.alpha * z + (1.0 - config.alpha) * state.velocities
    scale = config.beta * config.gamma**t
    pos = state.positions + scale * vel
    return AscentState(pos, vel, t)


def denoise(
    cloud: PointCloud,
    field: GradientField,
    graph: NeighborGraph,
    config: AscentConfig = AscentConfig(),
    record_trajectory: bool = False,
):
    """Run the full ascent; returns ``(denoised_cloud, trajectory)``.

    The input cloud is untouched. If it carries a normalization transform the
    output positions are mapped back to the original frame (the ascent itself
    runs in the cloud's own frame, where the field was built).
    """
    if len(graph) != len(cloud):
        raise InvalidInput("graph and cloud sizes differ")
    state = AscentState(cloud.points.copy(), np.zeros_like(cloud.points), 0)
    traj = Trajectory()
    if record_trajectory:
        traj.snapshots.append(state.positions.copy())

    for _ in range(config.steps):
        z = ensemble_gradients(field, graph, state.positions)
        prev = state.positions
        state = momentum_step(state, z, config)
        delta = state.positions - prev
        traj.steps.append(
            StepStats(
                step=state.t,
                mean_grad_magnitude=float(np.sqrt((z * z).sum(axis=1)).mean()),
                mean_displacement=float(np.sqrt((delta * delta).sum(axis=1)).mean()),
            )
        )
        if record_trajectory:
            traj.snapshots.append(state.positions.copy())

    out = state.positions
    if cloud.transform is not None:
        out = cloud.transform.invert(out)
    return PointCloud(out), traj


def classical_denoise(
    cloud: PointCloud,
    field: GradientField,
    graph: NeighborGraph,
    config: AscentConfig = AscentConfig(),
    record_trajectory: bool = False,
):
    """Classical gradient ascent: the alpha = 1 degeneracy of ``denoise``."""
    forced = AscentConfig(config.steps, 1.0, config.beta, config.gamma)
    return denoise(cloud, field, graph, forced, record_trajectory)
