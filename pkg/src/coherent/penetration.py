"""Pairwise interpenetration penalties and the robustified scene loss."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .scene import BodyInstance, Scene
from .sdf import (DEFAULT_PADDING, DEFAULT_RESOLUTION, Aabb, DistanceField,
                  compute_aabb, padded_aabb, voxelize_phi)


@dataclass(frozen=True)
class RobustifierConfig:
    sigma: float = 0.5

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError("robustifier sigma must be positive")


def geman_mcclure(x, sigma: float):
    """``sigma^2 x^2 / (x^2 + sigma^2)``; bounded by ``sigma^2``."""
    x2 = np.square(x)
    s2 = sigma * sigma
    return s2 * x2 / (x2 + s2)


def geman_mcclure_grad(x, sigma: float):
    s2 = sigma * sigma
    return 2.0 * s2 * s2 * x / np.square(np.square(x) + s2)


@dataclass
class PenetrationReport:
    pair_penalties: dict[tuple[int, int], float]
    loss: float
    colliding_pairs: set[tuple[int, int]]
    per_body_gradients: dict[int, np.ndarray]
    per_body_penalty: dict[int, float] = field(default_factory=dict)
    fields_built: list[int] = field(default_factory=list)

    @property
    def collision_count(self) -> int:
        return len(self.colliding_pairs)


def pair_penalty(field_i: DistanceField, mesh_j, scale_j: float = 1.0,
                 translation_j=(0.0, 0.0, 0.0)) -> tuple[float, np.ndarray]:
    """Sum of ``field_i`` sampled at the transformed vertices of ``mesh_j``.

    Returns the penalty and its gradient with respect to each transformed
    vertex. The field itself is treated as constant.
    """
    offset = np.asarray(translation_j, dtype=np.float64) - field_i.anchor
    return _penalty_local(field_i, mesh_j.vertices * float(scale_j) + offset)


def _penalty_local(field_i: DistanceField, points: np.ndarray) -> tuple[float, np.ndarray]:
    vals, grads = field_i.sample_local(points, want_grad=True)
    return float(np.sum(vals)), grads


def reanchored(field_i: DistanceField, translation) -> DistanceField:
    """The same node values attached to a body moved to ``translation``."""
    return replace(field_i, anchor=np.asarray(translation, dtype=np.float64))


_FIELD_CACHE_SIZE = 8


def body_field(body: BodyInstance, resolution: int = DEFAULT_RESOLUTION,
               padding_fraction: float = DEFAULT_PADDING) -> DistanceField:
    """Field of ``body`` at its current translation.

    Node values depend only on mesh, scale and grid settings (they are
    computed in the body frame), so they are memoized on the immutable mesh
    and re-anchored; the result is bit-identical to a fresh voxelization.
    """
    cache = body.mesh.__dict__.setdefault("_phi_cache", {})
    key = (float(body.scale), int(resolution), float(padding_fraction))
    local = cache.get(key)
    if local is None:
        local = voxelize_phi(body.mesh, body.scale, (0.0, 0.0, 0.0), resolution, padding_fraction)
        if len(cache) >= _FIELD_CACHE_SIZE:
            cache.pop(next(iter(cache)))
        cache[key] = local
    return reanchored(local, body.translation)


def scene_penetration(scene: Scene, resolution: int = DEFAULT_RESOLUTION,
                      robustifier: RobustifierConfig | None = None,
                      padding_fraction: float = DEFAULT_PADDING,
                      fields: dict[int, DistanceField] | None = None) -> PenetrationReport:
    """Robustified interpenetration loss of a scene and its translation gradients.

    For every ordered pair (i, j) whose padded grid box of i overlaps the
    vertex bounds of j, ``P_ij`` sums body i's field over body j's vertices;
    other pairs contribute exactly 0 and no field is built for them. The loss
    is ``sum_j rho(sum_i P_ij)``.

    ``fields`` supplies prebuilt (frozen) fields keyed by body id. They are
    re-anchored to each body's current translation, so moving a body moves
    its field without re-voxelizing; this is the differentiation contract of
    the returned gradients.
    """
    robustifier = robustifier or RobustifierConfig()
    sigma = robustifier.sigma
    bodies = sorted(scene.bodies, key=lambda b: b.id)
    ids = [b.id for b in bodies]
    t = {b.id: np.array(b.translation) for b in bodies}

    frozen = {}
    grid_box: dict[int, Aabb] = {}
    vert_box: dict[int, Aabb] = {}
    for b in bodies:
        vert_box[b.id] = compute_aabb(b.mesh, b.scale, b.translation)
        if fields is not None and b.id in fields:
            frozen[b.id] = reanchored(fields[b.id], b.translation)
            grid_box[b.id] = frozen[b.id].bounds()
        else:
            grid_box[b.id] = padded_aabb(b.mesh, b.scale, b.translation, padding_fraction)

    built: dict[int, DistanceField] = {}
    fields_built: list[int] = []

    def get_field(b: BodyInstance) -> DistanceField:
        if b.id in frozen:
            return frozen[b.id]
        if b.id not in built:
            built[b.id] = body_field(b, resolution, padding_fraction)
            fields_built.append(b.id)
        return built[b.id]

    pair = {}
    pair_grad = {}
    for bi in bodies:
        for bj in bodies:
            if bi.id == bj.id:
                continue
            key = (bi.id, bj.id)
            if not grid_box[bi.id].overlaps(vert_box[bj.id]):
                pair[key] = 0.0
                continue
            fi = get_field(bi)
            # relative offset keeps the result invariant to a joint translation
            pts = bj.mesh.vertices * bj.scale + (t[bj.id] - t[bi.id])
            p, g = _penalty_local(fi, pts)
            pair[key] = p
            pair_grad[key] = g.sum(axis=0)

    inner = {j: 0.0 for j in ids}
    for (i, j) in sorted(pair):
        inner[j] += pair[(i, j)]
    loss = 0.0
    for j in ids:
        loss += float(geman_mcclure(inner[j], sigma))

    grads = {j: np.zeros(3) for j in ids}
    for (i, j) in sorted(pair_grad):
        w = float(geman_mcclure_grad(inner[j], sigma)) * pair_grad[(i, j)]
        grads[j] = grads[j] + w
        grads[i] = grads[i] - w

    colliding = set()
    for (i, j), p in pair.items():
        if p > 0:
            colliding.add((min(i, j), max(i, j)))
    return PenetrationReport(pair_penalties=pair, loss=loss, colliding_pairs=colliding,
                             per_body_gradients=grads, per_body_penalty=inner,
                             fields_built=fields_built)
