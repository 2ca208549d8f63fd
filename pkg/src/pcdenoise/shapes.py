"""Built-in analytic test meshes and area-uniform surface sampling."""
from __future__ import annotations

import numpy as np

from .errors import InvalidInput
from .geometry import PointCloud, TriMesh
from .noise import rng_from_seed

SHAPE_NAMES = ("sphere", "cube", "torus")

TORUS_MAJOR = 0.7
TORUS_MINOR = 0.3


def make_sphere_mesh(subdivisions: int = 4) -> TriMesh:
    """Icosphere: subdivided icosahedron with vertices pushed to radius 1."""
    if subdivisions < 0 or subdivisions > 7:
        raise InvalidInput(f"subdivisions must be in [0, 7], got {subdivisions}")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts /= np.sqrt((verts * verts).sum(axis=1))[:, None]

    for _ in range(subdivisions):
        vert_list = [v for v in verts]
        midpoint = {}

        def mid(i, j):
            key = (i, j) if i < j else (j, i)
            if key not in midpoint:
                m = (vert_list[i] + vert_list[j]) / 2.0
                m = m / np.sqrt((m * m).sum())
                midpoint[key] = len(vert_list)
                vert_list.append(m)
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.asarray(vert_list)
        faces = np.asarray(new_faces, dtype=np.int64)
    return TriMesh(verts, faces)


def make_cube_mesh() -> TriMesh:
    """Axis-aligned cube with half-extent 1 (vertices at (+-1, +-1, +-1))."""
    corners = np.array(
        [[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)],
        dtype=np.float64,
    )
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x = -1, x = +1
        (0, 4, 5, 1), (2, 3, 7, 6),  # y = -1, y = +1
        (0, 2, 6, 4), (1, 5, 7, 3),  # z = -1, z = +1
    ]
    faces = []
    for a, b, c, d in quads:
        faces += [[a, b, c], [a, c, d]]
    return TriMesh(corners, np.asarray(faces, dtype=np.int64))


def make_torus_mesh(
    major: float = TORUS_MAJOR,
    minor: float = TORUS_MINOR,
    n_major: int = 64,
    n_minor: int = 32,
) -> TriMesh:
    """Triangulated torus around the z axis: tube radius ``minor`` swept at
    distance ``major``; fits inside the unit sphere with the defaults."""
    if not (0 < minor < major):
        raise InvalidInput("need 0 < minor < major")
    if n_major < 3 or n_minor < 3:
        raise InvalidInput("need at least 3 segments in each direction")
    u = 2.0 * np.pi * np.arange(n_major) / n_major
    v = 2.0 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring = major + minor * np.cos(vv)
    verts = np.stack(
        [ring * np.cos(uu), ring * np.sin(uu), minor * np.sin(vv)], axis=-1
    ).reshape(-1, 3)
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces += [[a, b, c], [a, c, d]]
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


def sample_mesh_surface(mesh: TriMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points area-uniform on the surface: faces picked proportionally to
    area, positions uniform in each face via the sqrt barycentric map."""
    if n < 1:
        raise InvalidInput(f"need n >= 1, got {n}")
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0:
        raise InvalidInput("mesh has no area")
    cdf = np.cumsum(areas)
    picks = np.searchsorted(cdf, rng.random(n) * total, side="right")
    picks = np.minimum(picks, len(areas) - 1)

    a = mesh.vertices[mesh.faces[picks, 0]]
    b = mesh.vertices[mesh.faces[picks, 1]]
    c = mesh.vertices[mesh.faces[picks, 2]]
    r1 = np.sqrt(rng.random(n))[:, None]
    r2 = rng.random(n)[:, None]
    return (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c


def builtin_mesh(name: str) -> TriMesh:
    if name == "sphere":
        return make_sphere_mesh()
    if name == "cube":
        return make_cube_mesh()
    if name == "torus":
        return make_torus_mesh()
    raise InvalidInput(f"unknown shape {name!r}, expected one of {SHAPE_NAMES}")


def sample_shape(shape, n: int, seed: int):
    """Clean benchmark instance: ``(cloud, mesh)`` for a built-in shape name,
    a mesh path (*.off), or an already-loaded mesh. Deterministic per seed."""
    if isinstance(shape, TriMesh):
        mesh = shape
    elif isinstance(shape, str) and shape in SHAPE_NAMES:
        mesh = builtin_mesh(shape)
    elif isinstance(shape, str):
        from .io import load_off

        mesh = load_off(shape)
    else:
        raise InvalidInput(f"bad shape spec {shape!r}")
    pts = sample_mesh_surface(mesh, n, rng_from_seed(seed))
    return PointCloud(pts), mesh
