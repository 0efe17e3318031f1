"""Scene rendering, ordinal depth loss and pairwise depth-order accuracy."""

from __future__ import annotations

import itertools
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import _raster_kernels as RK
from .errors import MaskError, NearPlaneError, ValidationError
from .scene import BodyInstance, Camera, DepthMap, InstanceMap, Scene

Z_NEAR = 1e-4


@dataclass
class RenderOutput:
    instance: InstanceMap
    depths: dict[int, DepthMap]
    scene_depth: DepthMap


@dataclass
class OrdinalDepthReport:
    loss: float
    disagreement_pixels: int
    skipped_pixels: int
    per_body_depth_gradients: dict[int, float]


def render_body_depth(camera: Camera, body: BodyInstance, out: np.ndarray | None = None) -> np.ndarray:
    """Depth raster of one body rendered alone (``+inf`` off-silhouette).

    ``out``, if given, is filled in place and returned.
    """
    v = body.world_vertices()
    z = v[:, 2]
    if np.any(~(z > Z_NEAR)):
        raise NearPlaneError(
            f"body {body.id} has vertices at or behind the near plane z={Z_NEAR}")
    sx = np.ascontiguousarray(camera.f * v[:, 0] / z + camera.cx)
    sy = np.ascontiguousarray(camera.f * v[:, 1] / z + camera.cy)
    invz = np.ascontiguousarray(1.0 / z)
    faces = np.ascontiguousarray(body.mesh.faces)
    ptr, items = RK.bin_faces(sx, sy, faces, camera.height, camera.width)
    if out is None:
        out = np.empty((camera.height, camera.width))
    out.fill(np.inf)
    return RK.rasterize_depth(sx, sy, invz, faces, camera.height, camera.width, ptr, items, out)


def composite(ids: Sequence[int], depth_stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Instance ids and z-buffer from per-body depths ordered by ascending id.

    Only a strictly nearer depth replaces the current one, so the lower id
    wins exact ties.
    """
    shape = depth_stack.shape[1:]
    inst = np.empty(shape, dtype=np.int64)
    zbuf = np.empty(shape)
    RK.composite(np.asarray(ids, dtype=np.int64), depth_stack, inst, zbuf)
    return inst, zbuf


def render(scene: Scene) -> RenderOutput:
    cam = scene.camera
    bodies = sorted(scene.bodies, key=lambda b: b.id)
    ids = [b.id for b in bodies]
    stack = np.empty((len(bodies), cam.height, cam.width))
    for k, b in enumerate(bodies):
        render_body_depth(cam, b, stack[k])
    inst, zbuf = composite(ids, stack)
    return RenderOutput(instance=InstanceMap(inst),
                        depths={i: DepthMap(stack[k]) for k, i in enumerate(ids)},
                        scene_depth=DepthMap(zbuf))


def disagreement_mask(rendered: np.ndarray, truth: np.ndarray) -> np.ndarray:
    return (truth > 0) & (rendered > 0) & (truth != rendered)


def _gather_depth(depths: Mapping[int, DepthMap], labels: np.ndarray, rows, cols) -> np.ndarray:
    out = np.full(labels.shape, np.inf)
    for body_id, dm in depths.items():
        sel = labels == body_id
        out[sel] = dm.data[rows[sel], cols[sel]]
    return out


def ordinal_depth_loss(rendered: RenderOutput, ground_truth: InstanceMap) -> OrdinalDepthReport:
    """Softplus of the depth gap at pixels where truth and render name different bodies.

    Pixels whose ground-truth body does not cover the pixel in its own render
    are skipped and counted. Sums run in row-major pixel order; gradients are
    with respect to each body's z-translation with coverage held fixed.
    """
    y_hat = rendered.instance.data
    y = ground_truth.data
    if y.shape != y_hat.shape:
        raise MaskError(f"ground truth is {y.shape[1]}x{y.shape[0]}, render is "
                        f"{y_hat.shape[1]}x{y_hat.shape[0]}")
    grads = {i: 0.0 for i in sorted(rendered.depths)}
    rows, cols = np.nonzero(disagreement_mask(y_hat, y))
    n_s = len(rows)
    if n_s == 0:
        return OrdinalDepthReport(0.0, 0, 0, grads)
    truth_ids = y[rows, cols]
    pred_ids = y_hat[rows, cols]
    d_true = _gather_depth(rendered.depths, truth_ids, rows, cols)
    d_pred = _gather_depth(rendered.depths, pred_ids, rows, cols)
    usable = np.isfinite(d_true)
    gap = d_true[usable] - d_pred[usable]
    terms = np.logaddexp(0.0, gap)
    loss = float(np.cumsum(terms)[-1]) if terms.size else 0.0
    s = expit(gap)
    t_ids, p_ids = truth_ids[usable], pred_ids[usable]
    for body_id in grads:
        # bincount-style sequential accumulation keeps row-major order
        plus = np.cumsum(np.where(t_ids == body_id, s, 0.0))
        minus = np.cumsum(np.where(p_ids == body_id, s, 0.0))
        grads[body_id] = float((plus[-1] if plus.size else 0.0) - (minus[-1] if minus.size else 0.0))
    return OrdinalDepthReport(loss=loss, disagreement_pixels=n_s,
                              skipped_pixels=int(n_s - usable.sum()),
                              per_body_depth_gradients=grads)


def representative_depths(scene: Scene) -> dict[int, float]:
    """Camera-frame z of each body's vertex centroid."""
    return {b.id: float(b.mesh.vertices[:, 2].mean() * b.scale + b.translation[2])
            for b in scene.bodies}


def mask_implied_ordering(rendered: RenderOutput, mask: InstanceMap) -> dict[tuple[int, int], int]:
    """Nearer body for each pair whose rendered silhouettes overlap.

    The mask's majority label over the overlap decides; pairs with no overlap,
    no votes or a tied vote are left out.
    """
    if mask.data.shape != rendered.instance.data.shape:
        raise MaskError("mask and render dimensions differ")
    order = {}
    ids = sorted(rendered.depths)
    cover = {i: rendered.depths[i].coverage for i in ids}
    for i, j in itertools.combinations(ids, 2):
        both = cover[i] & cover[j]
        if not both.any():
            continue
        labels = mask.data[both]
        vi = int(np.count_nonzero(labels == i))
        vj = int(np.count_nonzero(labels == j))
        if vi == vj:
            continue
        order[(i, j)] = i if vi > vj else j
    return order


def depth_order_counts(scene: Scene, reference) -> tuple[int, int]:
    """(correct, compared) unordered pairs against ``reference``.

    ``reference`` is a ground-truth Scene, a list of ids from nearest to
    farthest, or a mapping ``(i, j) -> nearer id``.
    """
    est = representative_depths(scene)
    if isinstance(reference, Scene):
        ref_depth = representative_depths(reference)
        if set(ref_depth) != set(est):
            raise ValidationError("reference scene has different body ids")
        pairs = {}
        for i, j in itertools.combinations(sorted(est), 2):
            gap = ref_depth[i] - ref_depth[j]
            if abs(gap) < 1e-6:
                continue
            pairs[(i, j)] = i if gap < 0 else j
    elif isinstance(reference, Mapping):
        pairs = {(min(k), max(k)): v for k, v in reference.items()}
        if not all(set(k) <= set(est) and v in k for k, v in pairs.items()):
            raise ValidationError("reference ordering names unknown body ids")
    else:
        ranked = list(reference)
        if sorted(ranked) != sorted(est):
            raise ValidationError("reference ordering must list exactly the scene's body ids")
        rank = {b: r for r, b in enumerate(ranked)}
        pairs = {(i, j): (i if rank[i] < rank[j] else j)
                 for i, j in itertools.combinations(sorted(est), 2)}
    correct = 0
    for (i, j), nearer in pairs.items():
        other = j if nearer == i else i
        if est[nearer] < est[other]:
            correct += 1
    return correct, len(pairs)


def depth_order_accuracy(scene: Scene, reference) -> float:
    """Fraction of comparable pairs ordered as in ``reference`` (1.0 if none)."""
    correct, total = depth_order_counts(scene, reference)
    return correct / total if total else 1.0
