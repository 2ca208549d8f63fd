"""Seeded synthetic corruption of point clouds.

The noise level is dimensionless: per-axis displacement scales are
``level * r`` where r is the cloud's bounding-sphere radius (max distance
from the centroid), so the same level means the same relative corruption at
any cloud scale. Draws come from a Philox counter-based generator keyed by
the seed, which makes every generator reproducible bit-for-bit.

Per-axis scales:
    gaussian  std  = level * r
    laplace   b    = level * r   (std = sqrt(2) * level * r)
    uniform   half-width = level * r   (std = level * r / sqrt(3))
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .geometry import PointCloud

KINDS = ("gaussian", "laplace", "uniform")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    level: float
    seed: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown noise kind {self.kind!r}, expected one of {KINDS}")
        if not (isinstance(self.level, (int, float)) and np.isfinite(self.level)):
            raise InvalidInput(f"level must be a finite number, got {self.level!r}")
        if self.level <= 0:
            raise InvalidInput(f"level must be > 0, got {self.level}")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise InvalidInput(f"seed must be an integer, got {self.seed!r}")
        if self.seed < 0:
            raise InvalidInput(f"seed must be >= 0, got {self.seed}")


def rng_from_seed(seed) -> np.random.Generator:
    """Philox generator used across the package for seeded draws."""
    return np.random.Generator(np.random.Philox(seed))


def add_noise(cloud: PointCloud, spec: NoiseSpec) -> PointCloud:
    """Perturb every coordinate independently; deterministic per (spec, cloud).

    Point count and order are preserved. The input cloud is untouched.
    """
    r = cloud.bounding_radius
    if r == 0.0:
        raise InvalidInput("cannot scale noise on a degenerate cloud (zero bounding radius)")
    scale = spec.level * r
    rng = rng_from_seed(spec.seed)
    shape = cloud.points.shape
    if spec.kind == "gaussian":
        disp = rng.normal(0.0, scale, shape)
    elif spec.kind == "laplace":
        disp = rng.laplace(0.0, scale, shape)
    else:
        disp = rng.uniform(-scale, scale, shape)
    return PointCloud(cloud.points + disp, transform=cloud.transform)
