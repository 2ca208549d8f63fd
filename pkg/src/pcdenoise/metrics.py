"""Quality metrics: Chamfer distance and point-to-mesh error.

Definitions are pinned and recorded in every report:

    chamfer(a, b) = mean_a min_b ||a - b||^2 + mean_b min_a ||b - a||^2
    point_to_mesh = mean_p (exact distance from p to the mesh surface)^2

Raw values are stored everywhere; the conventional x 1e4 scaling appears
only in display fields. Summation order is fixed, so repeated runs agree
bit-for-bit and chamfer is exactly symmetric.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInput
from .geometry import PointCloud, TriMesh, nearest_surface_points

CHAMFER_DEFINITION = "sum of both directed means of squared nearest-neighbor distances"
P2M_DEFINITION = "mean squared exact point-to-surface distance, points to faces only"

DISPLAY_SCALE = 1e4


def _points_of(obj) -> np.ndarray:
    if isinstance(obj, PointCloud):
        return obj.points
    arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
        raise InvalidInput(f"expected an (N, 3) cloud, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInput("cloud contains non-finite coordinates")
    return arr


def _directed_mean_sq(src: np.ndarray, dst: np.ndarray) -> float:
    _, idx = cKDTree(dst).query(src)
    diff = src - dst[idx]
    return float((diff * diff).sum(axis=1).mean())


def chamfer_distance(a, b) -> float:
    """Symmetric squared-distance Chamfer divergence between two clouds."""
    pa = _points_of(a)
    pb = _points_of(b)
    return _directed_mean_sq(pa, pb) + _directed_mean_sq(pb, pa)


def point_to_mesh(cloud, mesh: TriMesh) -> float:
    """Mean squared exact surface distance from each point to the mesh."""
    pts = _points_of(cloud)
    closest, _ = nearest_surface_points(mesh, pts)
    diff = pts - closest
    return float((diff * diff).sum(axis=1).mean())


@dataclass
class MetricReport:
    """Self-describing metric record; serializes raw and display values."""

    chamfer: float
    point_to_mesh: float | None = None
    n_points: int = 0
    n_reference: int = 0
    inputs: dict | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["definitions"] = {
            "chamfer": CHAMFER_DEFINITION,
            "point_to_mesh": P2M_DEFINITION,
        }
        d["display"] = {"chamfer_x1e4": self.chamfer * DISPLAY_SCALE}
        if self.point_to_mesh is not None:
            d["display"]["point_to_mesh_x1e4"] = self.point_to_mesh * DISPLAY_SCALE
        return d

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        d = json.loads(text)
        return cls(
            chamfer=d["chamfer"],
            point_to_mesh=d.get("point_to_mesh"),
            n_points=d.get("n_points", 0),
            n_reference=d.get("n_reference", 0),
            inputs=d.get("inputs"),
        )


def make_report(denoised, clean, mesh: TriMesh | None = None, inputs: dict | None = None) -> MetricReport:
    pd = _points_of(denoised)
    pc = _points_of(clean)
    return MetricReport(
        chamfer=chamfer_distance(pd, pc),
        point_to_mesh=None if mesh is None else point_to_mesh(pd, mesh),
        n_points=pd.shape[0],
        n_reference=pc.shape[0],
        inputs=inputs,
    )
