"""Triangle meshes: container, validation and OBJ I/O."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import MeshFormatError

logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Triangle mesh with float64 ``(V, 3)`` vertices and int64 ``(F, 3)`` faces.

    Faces are expected counter-clockwise when seen from outside. The arrays are
    made read-only on construction so instances can be shared between workers.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64, copy=True).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64, copy=True).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise MeshFormatError("mesh has non-finite vertex coordinates")
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                raise MeshFormatError(
                    f"face index out of range for {len(v)} vertices")
            areas = face_areas(v, f)
            bad = np.flatnonzero(areas <= DEGENERATE_AREA)
            if bad.size:
                raise MeshFormatError(
                    f"degenerate face {int(bad[0])} (area {areas[bad[0]]:.3g} m^2)")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def __eq__(self, other):
        if not isinstance(other, TriMesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.faces, other.faces))

    __hash__ = None

    def transformed(self, scale: float = 1.0, translation=(0.0, 0.0, 0.0)) -> np.ndarray:
        return transform_vertices(self.vertices, scale, translation)


def transform_vertices(vertices, scale=1.0, translation=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Apply ``v' = scale * v + translation``."""
    return np.asarray(vertices, dtype=np.float64) * float(scale) + np.asarray(
        translation, dtype=np.float64)


def face_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    tri = vertices[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


def edge_face_counts(faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges ``(E, 2)`` and the number of faces using each."""
    faces = np.asarray(faces, dtype=np.int64)
    if len(faces) == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    a = faces.ravel()
    b = faces[:, [1, 2, 0]].ravel()
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    base = int(faces.max()) + 1
    keys, counts = np.unique(lo * base + hi, return_counts=True)
    return np.stack([keys // base, keys % base], axis=1), counts


def validate_watertight(mesh: TriMesh) -> bool:
    """True iff every undirected edge is shared by exactly two faces."""
    cached = mesh.__dict__.get("_watertight")
    if cached is None:
        if mesh.n_faces == 0:
            cached = False
        else:
            _, counts = edge_face_counts(mesh.faces)
            cached = bool(np.all(counts == 2))
        object.__setattr__(mesh, "_watertight", cached)
    return cached


def euler_characteristic(mesh: TriMesh) -> int:
    edges, _ = edge_face_counts(mesh.faces)
    used = np.unique(mesh.faces).size
    return used - len(edges) + mesh.n_faces


def _parse_index(token: str, n_vertices: int, lineno: int) -> int:
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise MeshFormatError(f"line {lineno}: malformed face index {token!r}") from None
    if idx == 0:
        raise MeshFormatError(f"line {lineno}: face index 0 is invalid (OBJ is 1-based)")
    if idx < 0:
        idx = n_vertices + idx + 1
    if idx < 1 or idx > n_vertices:
        raise MeshFormatError(
            f"line {lineno}: face index {head} out of range ({n_vertices} vertices so far)")
    return idx - 1


def parse_obj(text: str, name: str = "") -> TriMesh:
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    ignored: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshFormatError(f"line {lineno}: vertex needs 3 coordinates")
            try:
                xyz = tuple(float(p) for p in parts[1:4])
            except ValueError:
                raise MeshFormatError(f"line {lineno}: malformed vertex {line!r}") from None
            if not all(math.isfinite(c) for c in xyz):
                raise MeshFormatError(f"line {lineno}: non-finite vertex coordinate")
            vertices.append(xyz)
        elif tag == "f":
            if len(parts) < 4:
                raise MeshFormatError(f"line {lineno}: face needs at least 3 indices")
            idx = [_parse_index(p, len(vertices), lineno) for p in parts[1:]]
            # fan triangulation
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
        else:
            ignored[tag] = ignored.get(tag, 0) + 1
    for tag, count in ignored.items():
        logger.warning("%s: ignored %d OBJ record(s) of type %r", name or "<obj>", count, tag)
    try:
        return TriMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3),
                       np.array(faces, dtype=np.int64).reshape(-1, 3), name=name)
    except MeshFormatError as exc:
        raise MeshFormatError(f"{name or '<obj>'}: {exc}") from None


def load_mesh(path: str | os.PathLike) -> TriMesh:
    with open(path, encoding="utf-8") as fh:
        return parse_obj(fh.read(), name=os.fspath(path))


def format_obj(mesh: TriMesh) -> str:
    lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in mesh.vertices.tolist()]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces.tolist()]
    return "\n".join(lines) + "\n"


def save_mesh(mesh: TriMesh, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_obj(mesh))
