"""Procedural watertight meshes used as fixtures and demo inputs."""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def signed_volume(vertices: np.ndarray, faces: np.ndarray) -> float:
    tri = vertices[faces]
    return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


def _outward(vertices, faces, name=""):
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if signed_volume(vertices, faces) < 0:
        faces = faces[:, ::-1].copy()
    return TriMesh(vertices, faces, name=name)


def cube(size: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned cube, 8 vertices and 12 triangles."""
    h = 0.5 * size
    corners = np.array([[x, y, z] for z in (-h, h) for y in (-h, h) for x in (-h, h)])
    # quads as (v0, v1, v2, v3), counter-clockwise from outside
    quads = [(0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4),
             (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5)]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return _outward(corners + np.asarray(center, dtype=np.float64), faces, "cube")


def box(extent, center=(0.0, 0.0, 0.0)) -> TriMesh:
    m = cube(1.0)
    v = m.vertices * np.asarray(extent, dtype=np.float64) + np.asarray(center, dtype=np.float64)
    return TriMesh(v, m.faces, name="box")


def icosphere(subdivisions: int = 1, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Subdivided icosahedron; subdivision 1 has 42 vertices and 80 faces."""
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return _outward(v, faces, f"icosphere{subdivisions}")


def revolve(profile, segments: int, top: float, bottom: float, phase=None) -> tuple[np.ndarray, np.ndarray]:
    """Surface of revolution about z.

    ``profile`` is a sequence of ``(radius, z)`` rings ordered from the top pole
    down; poles sit at ``z = top`` and ``z = bottom``. ``phase`` optionally gives a
    per-ring angular offset.
    """
    profile = np.asarray(profile, dtype=np.float64)
    n_rings = len(profile)
    ang = 2.0 * np.pi * np.arange(segments) / segments
    phase = np.zeros(n_rings) if phase is None else np.asarray(phase, dtype=np.float64)
    verts = [np.array([0.0, 0.0, top])]
    for (r, z), ph in zip(profile, phase):
        a = ang + ph
        verts.extend(np.stack([r * np.cos(a), r * np.sin(a), np.full(segments, z)], axis=1))
    verts.append(np.array([0.0, 0.0, bottom]))
    faces = []

    def ring(k, s):
        return 1 + k * segments + (s % segments)

    for s in range(segments):
        faces.append((0, ring(0, s + 1), ring(0, s)))
    for k in range(n_rings - 1):
        for s in range(segments):
            a, b = ring(k, s), ring(k, s + 1)
            c, d = ring(k + 1, s), ring(k + 1, s + 1)
            faces += [(a, b, d), (a, d, c)]
    last = 1 + n_rings * segments
    for s in range(segments):
        faces.append((last, ring(n_rings - 1, s), ring(n_rings - 1, s + 1)))
    return np.array(verts), np.array(faces, dtype=np.int64)


def uv_sphere(segments: int = 16, rings: int = 8, radius: float = 1.0,
              center=(0.0, 0.0, 0.0)) -> TriMesh:
    theta = np.pi * np.arange(1, rings) / rings
    profile = np.stack([radius * np.sin(theta), radius * np.cos(theta)], axis=1)
    v, f = revolve(profile, segments, radius, -radius)
    return _outward(v + np.asarray(center, dtype=np.float64), f, "uv_sphere")


def capsule(radius: float = 0.3, length: float = 1.0, segments: int = 16,
            rings: int = 8, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Cylinder of ``length`` along z capped with hemispheres; ``rings`` is even."""
    half = 0.5 * length
    theta = np.pi * np.arange(1, rings // 2 + 1) / rings
    upper = [(radius * np.sin(t), half + radius * np.cos(t)) for t in theta]
    lower = [(r, -z) for r, z in reversed(upper)]
    v, f = revolve(upper + lower, segments, half + radius, -half - radius)
    return _outward(v + np.asarray(center, dtype=np.float64), f, "capsule")


def body_blob(segments: int = 84, rings: int = 83, height: float = 1.7,
              width: float = 0.25, seed: int = 0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Human-sized lumpy ellipsoid.

    The defaults give 6890 vertices and 13776 faces, the vertex and face counts
    of an SMPL body, for timing runs.
    """
    rng = np.random.default_rng(seed)
    theta = np.pi * np.arange(1, rings) / rings
    wobble = 1.0 + 0.15 * np.sin(3 * theta + rng.uniform(0, np.pi)) \
        + 0.05 * np.sin(7 * theta + rng.uniform(0, np.pi))
    profile = np.stack([width * np.sin(theta) * wobble, 0.5 * height * np.cos(theta)], axis=1)
    v, f = revolve(profile, segments, 0.5 * height, -0.5 * height,
                   phase=rng.uniform(0, 0.05, size=len(profile)))
    return _outward(v + np.asarray(center, dtype=np.float64), f, "body_blob")


def quad(width: float, height: float, z: float, center=(0.0, 0.0)) -> TriMesh:
    """Open rectangle facing the camera at depth ``z`` (not watertight)."""
    cx, cy = center
    hw, hh = 0.5 * width, 0.5 * height
    v = [(cx - hw, cy - hh, z), (cx + hw, cy - hh, z), (cx + hw, cy + hh, z), (cx - hw, cy + hh, z)]
    return TriMesh(np.array(v), np.array([(0, 1, 2), (0, 2, 3)]), name="quad")
