"""Scenes, cameras, instance and depth rasters, and their file formats."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DuplicateIdError, MaskError, SceneFormatError
from .imageio import read_pgm16, write_pgm16
from .mesh import TriMesh, load_mesh, save_mesh, transform_vertices


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: ``u = f x / z + cx``, ``v = f y / z + cy``."""

    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        for name in ("f", "cx", "cy"):
            if not math.isfinite(getattr(self, name)):
                raise SceneFormatError(f"camera.{name} must be finite")
        if self.width <= 0 or self.height <= 0:
            raise SceneFormatError("camera width and height must be positive")
        if self.f <= 0:
            raise SceneFormatError("camera focal length must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise SceneFormatError("principal point must lie inside the image")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def project(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        z = p[..., 2]
        return np.stack([self.f * p[..., 0] / z + self.cx,
                         self.f * p[..., 1] / z + self.cy], axis=-1)


@dataclass(frozen=True)
class BodyInstance:
    id: int
    mesh: TriMesh
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    scale: float = 1.0
    mesh_path: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if isinstance(self.id, bool) or int(self.id) != self.id or self.id < 1:
            raise SceneFormatError(f"body id must be an integer >= 1, got {self.id!r}")
        t = tuple(float(c) for c in self.translation)
        if len(t) != 3 or not all(math.isfinite(c) for c in t):
            raise SceneFormatError(f"body {self.id}: translation must be 3 finite numbers")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise SceneFormatError(f"body {self.id}: scale must be positive")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", float(self.scale))

    def world_vertices(self) -> np.ndarray:
        return transform_vertices(self.mesh.vertices, self.scale, self.translation)

    def moved(self, translation) -> "BodyInstance":
        return replace(self, translation=tuple(float(c) for c in translation))


@dataclass(frozen=True)
class Scene:
    camera: Camera
    bodies: tuple[BodyInstance, ...] = ()

    def __post_init__(self):
        bodies = tuple(self.bodies)
        seen = set()
        for b in bodies:
            if b.id in seen:
                raise DuplicateIdError(f"duplicate body id {b.id}")
            seen.add(b.id)
        object.__setattr__(self, "bodies", bodies)

    @property
    def ids(self) -> list[int]:
        return [b.id for b in self.bodies]

    def body(self, body_id: int) -> BodyInstance:
        for b in self.bodies:
            if b.id == body_id:
                return b
        raise KeyError(body_id)

    def translations(self) -> dict[int, np.ndarray]:
        return {b.id: np.array(b.translation) for b in self.bodies}

    def with_translations(self, translations: dict[int, np.ndarray]) -> "Scene":
        bodies = tuple(b.moved(translations[b.id]) if b.id in translations else b
                       for b in self.bodies)
        return replace(self, bodies=bodies)


@dataclass(frozen=True, eq=False)
class InstanceMap:
    """``(H, W)`` person-index raster, 0 = background."""

    data: np.ndarray

    def __post_init__(self):
        d = np.array(self.data, dtype=np.int64, copy=True)
        if d.ndim != 2:
            raise MaskError("instance map must be 2-D")
        if d.size and d.min() < 0:
            raise MaskError("instance map values must be non-negative")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def ids(self) -> set[int]:
        return set(int(v) for v in np.unique(self.data) if v != 0)

    def counts(self) -> dict[int, int]:
        vals, cnt = np.unique(self.data, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt) if v != 0}

    def __eq__(self, other):
        if not isinstance(other, InstanceMap):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Camera-frame z per pixel; uncovered pixels hold ``+inf``."""

    data: np.ndarray

    def __post_init__(self):
        d = np.array(self.data, dtype=np.float64, copy=True)
        if d.ndim != 2:
            raise ValueError("depth map must be 2-D")
        cov = np.isfinite(d)
        if np.any(d[cov] <= 0):
            raise ValueError("covered depths must be positive")
        d[~cov] = np.inf
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def coverage(self) -> np.ndarray:
        return np.isfinite(self.data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _camera_from_json(obj) -> Camera:
    if not isinstance(obj, dict):
        raise SceneFormatError("'camera' must be an object")
    try:
        f, cx, cy = (float(obj[k]) for k in ("f", "cx", "cy"))
        w, h = obj["width"], obj["height"]
    except KeyError as exc:
        raise SceneFormatError(f"camera is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError):
        raise SceneFormatError("camera fields must be numbers") from None
    if not (isinstance(w, int) and isinstance(h, int)) or isinstance(w, bool) or isinstance(h, bool):
        raise SceneFormatError("camera width/height must be integers")
    return Camera(f, cx, cy, w, h)


def scene_from_dict(doc: dict, base_dir: str | os.PathLike = ".",
                    mesh_cache: dict | None = None) -> Scene:
    if not isinstance(doc, dict) or "camera" not in doc or "bodies" not in doc:
        raise SceneFormatError("scene must have 'camera' and 'bodies'")
    camera = _camera_from_json(doc["camera"])
    if not isinstance(doc["bodies"], list):
        raise SceneFormatError("'bodies' must be a list")
    cache = {} if mesh_cache is None else mesh_cache
    bodies = []
    seen = set()
    for k, entry in enumerate(doc["bodies"]):
        if not isinstance(entry, dict) or "id" not in entry or "mesh" not in entry:
            raise SceneFormatError(f"bodies[{k}] needs 'id' and 'mesh'")
        body_id = entry["id"]
        if not isinstance(body_id, int) or isinstance(body_id, bool):
            raise SceneFormatError(f"bodies[{k}].id must be an integer")
        if body_id in seen:
            raise DuplicateIdError(f"duplicate body id {body_id}")
        seen.add(body_id)
        rel = entry["mesh"]
        mesh_file = Path(base_dir) / rel
        if not mesh_file.is_file():
            raise SceneFormatError(f"bodies[{k}]: mesh file not found: {mesh_file}")
        key = os.path.realpath(mesh_file)
        if key not in cache:
            cache[key] = load_mesh(mesh_file)
        translation = entry.get("translation", [0.0, 0.0, 0.0])
        if not isinstance(translation, list) or len(translation) != 3:
            raise SceneFormatError(f"bodies[{k}].translation must be a 3-list")
        try:
            bodies.append(BodyInstance(body_id, cache[key],
                                       tuple(float(c) for c in translation),
                                       float(entry.get("scale", 1.0)), mesh_path=rel))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SceneFormatError):
                raise
            raise SceneFormatError(f"bodies[{k}]: {exc}") from None
    return Scene(camera, tuple(bodies))


def load_scene(path: str | os.PathLike) -> Scene:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: invalid JSON ({exc})") from None
    return scene_from_dict(doc, base_dir=path.parent)


def scene_to_dict(scene: Scene, mesh_paths: dict[int, str] | None = None) -> dict:
    mesh_paths = mesh_paths or {}
    cam = scene.camera
    return {
        "camera": {"f": cam.f, "cx": cam.cx, "cy": cam.cy,
                   "width": cam.width, "height": cam.height},
        "bodies": [{"id": b.id,
                    "mesh": mesh_paths.get(b.id, b.mesh_path),
                    "translation": list(b.translation),
                    "scale": b.scale} for b in scene.bodies],
    }


def save_scene(scene: Scene, path: str | os.PathLike, source_dir: str | os.PathLike | None = None) -> None:
    """Write scene JSON.

    Mesh paths are rewritten relative to the new file. Bodies without a known
    mesh file get one written next to the scene as ``<stem>_body_<id>.obj``.
    ``source_dir`` is the directory the existing relative mesh paths resolve
    against (defaults to the target directory).
    """
    path = Path(path)
    out_dir = path.parent
    src = Path(source_dir) if source_dir is not None else out_dir
    mesh_paths = {}
    for b in scene.bodies:
        if b.mesh_path is None:
            name = f"{path.stem}_body_{b.id}.obj"
            save_mesh(b.mesh, out_dir / name)
            mesh_paths[b.id] = name
        else:
            target = (src / b.mesh_path).resolve()
            mesh_paths[b.id] = os.path.relpath(target, out_dir.resolve())
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_dict(scene, mesh_paths), fh, indent=2)
        fh.write("\n")


def check_mask_ids(mask: InstanceMap, scene: Scene) -> None:
    if (mask.height, mask.width) != scene.camera.shape:
        raise MaskError(f"mask is {mask.width}x{mask.height}, camera is "
                        f"{scene.camera.width}x{scene.camera.height}")
    unknown = mask.ids() - set(scene.ids)
    if unknown:
        raise MaskError(f"mask contains unknown body id(s) {sorted(unknown)}")


def load_instance_mask(path: str | os.PathLike, scene: Scene) -> InstanceMap:
    mask = InstanceMap(read_pgm16(path))
    check_mask_ids(mask, scene)
    return mask


def save_instance_map(instance: InstanceMap, path: str | os.PathLike) -> None:
    write_pgm16(path, instance.data)
