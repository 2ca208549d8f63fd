"""XYZ point-cloud and OFF triangle-mesh readers/writers.

Floats are written with 17 significant digits so save/load round-trips are
bit-exact.
"""
from __future__ import annotations

import logging

import numpy as np

from .errors import InvalidInput
from .geometry import PointCloud, TriMesh

log = logging.getLogger(__name__)

_FMT = "%.17g"


def load_xyz(path) -> PointCloud:
    """Read a text cloud: one point per line, 3 whitespace-separated floats.

    Blank lines and lines starting with '#' are ignored.
    """
    pts = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise InvalidInput(
                    f"{path}:{lineno}: expected 3 coordinates, got {len(parts)}"
                )
            try:
                pts.append([float(v) for v in parts])
            except ValueError:
                raise InvalidInput(f"{path}:{lineno}: malformed float") from None
    if not pts:
        raise InvalidInput(f"{path}: no points")
    arr = np.asarray(pts, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise InvalidInput(f"{path}: non-finite coordinate")
    return PointCloud(arr)


def save_xyz(cloud: PointCloud, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for x, y, z in cloud.points:
            f.write(f"{_FMT % x} {_FMT % y} {_FMT % z}\n")


def _meaningful_lines(path):
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_off(path) -> TriMesh:
    """Read an OFF mesh (triangles only).

    Zero-area faces are dropped with a warning; the count is kept on the
    returned mesh (``dropped_faces``).
    """
    lines = _meaningful_lines(path)

    def next_line(what):
        try:
            return next(lines)
        except StopIteration:
            raise InvalidInput(f"{path}: truncated file, expected {what}") from None

    lineno, header = next_line("OFF header")
    counts = None
    if header != "OFF":
        # tolerate counts on the header line: "OFF 8 12 0"
        if header.startswith("OFF"):
            rest = header[3:].split()
            if len(rest) == 3:
                counts = rest
            else:
                raise InvalidInput(f"{path}:{lineno}: bad OFF header")
        else:
            raise InvalidInput(f"{path}:{lineno}: not an OFF file")
    if counts is None:
        lineno, counts_line = next_line("counts line")
        counts = counts_line.split()
    if len(counts) != 3:
        raise InvalidInput(f"{path}:{lineno}: counts line must have 3 integers")
    try:
        n_vert, n_face = int(counts[0]), int(counts[1])
    except ValueError:
        raise InvalidInput(f"{path}:{lineno}: malformed counts") from None
    if n_vert < 1 or n_face < 1:
        raise InvalidInput(f"{path}: need at least one vertex and one face")

    vertices = np.empty((n_vert, 3), dtype=np.float64)
    for i in range(n_vert):
        lineno, line = next_line(f"vertex {i}")
        parts = line.split()
        if len(parts) != 3:
            raise InvalidInput(f"{path}:{lineno}: vertex needs 3 coordinates")
        try:
            vertices[i] = [float(v) for v in parts]
        except ValueError:
            raise InvalidInput(f"{path}:{lineno}: malformed vertex") from None

    faces = np.empty((n_face, 3), dtype=np.int64)
    for i in range(n_face):
        lineno, line = next_line(f"face {i}")
        parts = line.split()
        if not parts or parts[0] != "3" or len(parts) != 4:
            raise InvalidInput(
                f"{path}:{lineno}: only triangular faces ('3 i j k') are supported"
            )
        try:
            faces[i] = [int(v) for v in parts[1:]]
        except ValueError:
            raise InvalidInput(f"{path}:{lineno}: malformed face") from None

    mesh = TriMesh(vertices, faces)
    if mesh.dropped_faces:
        log.warning("%s: dropped %d zero-area face(s)", path, mesh.dropped_faces)
    return mesh


def save_off(mesh: TriMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("OFF\n")
        f.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for x, y, z in mesh.vertices:
            f.write(f"{_FMT % x} {_FMT % y} {_FMT % z}\n")
        for i, j, k in mesh.faces:
            f.write(f"3 {i} {j} {k}\n")
