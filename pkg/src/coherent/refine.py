"""Gradient-descent refinement of body translations.

The objective is ``lambda_p * L_P + lambda_d * L_D + lambda_anchor * sum_j |t_j - t_j0|^2``.
Every evaluation rebuilds distance fields and re-renders, so each trace entry
is a fresh evaluation of the scene it describes.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NearPlaneError, ValidationError
from .mesh import validate_watertight
from .penetration import PenetrationReport, RobustifierConfig, scene_penetration
from .raster import (OrdinalDepthReport, RenderOutput, depth_order_accuracy,
                     mask_implied_ordering, ordinal_depth_loss, render)
from .scene import InstanceMap, Scene, check_mask_ids
from .sdf import DEFAULT_PADDING, DEFAULT_RESOLUTION

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefineConfig:
    lambda_p: float = 1.0
    lambda_d: float = 0.1
    lambda_anchor: float = 0.01
    step_size: float = 0.02
    max_iters: int = 200
    convergence_tol: float = 1e-8
    voxel_resolution: int = DEFAULT_RESOLUTION
    # 0.5 saturates on overlaps of a few hundred vertices and the descent stalls
    robustifier: RobustifierConfig = field(default_factory=lambda: RobustifierConfig(5.0))
    optimize_xy: bool = True
    padding_fraction: float = DEFAULT_PADDING
    max_halvings: int = 20
    max_expansions: int = 10
    stop_when_coherent: bool = True

    def __post_init__(self):
        for name in ("lambda_p", "lambda_d", "lambda_anchor", "convergence_tol"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"{name} must be non-negative")
        if not self.step_size > 0:
            raise ValidationError("step_size must be positive")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be at least 1")
        if self.max_halvings < 0 or self.max_expansions < 0:
            raise ValidationError("max_halvings and max_expansions must be non-negative")


@dataclass
class IterationRecord:
    iteration: int
    loss_p: float
    loss_d: float
    anchor: float
    total: float
    collision_count: int | None
    depth_order_accuracy: float | None
    step: float
    translations: dict[int, list[float]]

    def to_json(self) -> str:
        d = asdict(self)
        d["translations"] = {str(k): v for k, v in self.translations.items()}
        return json.dumps(d)


@dataclass
class RefineTrace:
    records: list[IterationRecord]
    scene: Scene
    converged: bool
    reason: str

    @property
    def iterations(self) -> int:
        return len(self.records)

    def write_jsonl(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(rec.to_json() + "\n")


@dataclass
class Evaluation:
    total: float
    loss_p: float
    loss_d: float
    anchor: float
    gradients: dict[int, np.ndarray]
    penetration: PenetrationReport | None
    ordinal: OrdinalDepthReport | None
    rendered: RenderOutput | None
    accuracy: float | None

    @property
    def collision_count(self) -> int | None:
        return None if self.penetration is None else self.penetration.collision_count


def evaluate(scene: Scene, mask: InstanceMap | None, config: RefineConfig,
             anchors: dict[int, np.ndarray]) -> Evaluation:
    ids = sorted(scene.ids)
    grads = {i: np.zeros(3) for i in ids}
    pen = None
    if config.lambda_p > 0 or all(validate_watertight(b.mesh) for b in scene.bodies):
        pen = scene_penetration(scene, config.voxel_resolution, config.robustifier,
                                config.padding_fraction)
        if config.lambda_p > 0:
            for i in ids:
                g = config.lambda_p * pen.per_body_gradients[i]
                if not config.optimize_xy:
                    g = g * np.array([0.0, 0.0, 1.0])
                grads[i] = grads[i] + g
    ordinal = rendered = accuracy = None
    if mask is not None:
        rendered = render(scene)
        ordinal = ordinal_depth_loss(rendered, mask)
        accuracy = depth_order_accuracy(scene, mask_implied_ordering(rendered, mask))
        if config.lambda_d > 0:
            for i in ids:
                grads[i] = grads[i] + np.array(
                    [0.0, 0.0, config.lambda_d * ordinal.per_body_depth_gradients[i]])
    anchor = 0.0
    for b in sorted(scene.bodies, key=lambda b: b.id):
        d = np.array(b.translation) - anchors[b.id]
        anchor += float(d @ d)
        grads[b.id] = grads[b.id] + 2.0 * config.lambda_anchor * d
    loss_p = pen.loss if pen is not None else 0.0
    loss_d = ordinal.loss if ordinal is not None else 0.0
    total = config.lambda_p * loss_p + config.lambda_d * loss_d + config.lambda_anchor * anchor
    return Evaluation(total, loss_p, loss_d, anchor, grads, pen, ordinal, rendered, accuracy)


def _record(k: int, scene: Scene, ev: Evaluation, step: float) -> IterationRecord:
    return IterationRecord(iteration=k, loss_p=ev.loss_p, loss_d=ev.loss_d, anchor=ev.anchor,
                           total=ev.total, collision_count=ev.collision_count,
                           depth_order_accuracy=ev.accuracy, step=step,
                           translations={b.id: list(b.translation) for b in scene.bodies})


def _step(scene: Scene, ev: Evaluation, step: float) -> Scene:
    return scene.with_translations(
        {i: np.array(scene.body(i).translation) - step * g for i, g in ev.gradients.items()})


def _trial(scene, ev, step, mask, config, anchors):
    proposal = _step(scene, ev, step)
    try:
        return proposal, evaluate(proposal, mask, config, anchors)
    except NearPlaneError:
        # a step through the camera is simply not a descent step
        return proposal, None


def _line_search(scene, ev, mask, config, anchors):
    """Pick a step of the form ``step_size * 2**k`` that does not raise the total.

    Halve from ``step_size`` until the total does not increase. If the first
    trial is accepted, keep doubling while the total stays at or below the
    current one and keep the lowest. With ``stop_when_coherent`` the smallest
    accepted step that zeroes every weighted data term wins instead, since
    the anchor alone would otherwise settle at a slightly penetrating point.
    """
    step = config.step_size
    for _ in range(config.max_halvings + 1):
        proposal, trial = _trial(scene, ev, step, mask, config, anchors)
        if trial is not None and trial.total <= ev.total:
            break
        step *= 0.5
    else:
        return None
    best = (proposal, trial, step)
    if config.stop_when_coherent and _coherent(trial, config):
        return best
    if step == config.step_size:
        for _ in range(config.max_expansions):
            step *= 2.0
            proposal, trial = _trial(scene, ev, step, mask, config, anchors)
            if trial is None or not trial.total <= ev.total:
                break
            if config.stop_when_coherent and _coherent(trial, config):
                return proposal, trial, step
            if trial.total < best[1].total:
                best = (proposal, trial, step)
    return best


def _coherent(ev: Evaluation, config: RefineConfig) -> bool:
    """True once every weighted data term has reached exactly zero."""
    if config.lambda_p == 0 and config.lambda_d == 0:
        return False
    if config.lambda_p > 0 and ev.loss_p != 0.0:
        return False
    return not (config.lambda_d > 0 and ev.loss_d != 0.0)


def refine(scene: Scene, ground_truth_mask: InstanceMap | None = None,
           config: RefineConfig | None = None) -> tuple[Scene, RefineTrace]:
    """Descend the weighted objective over per-body translations.

    Each iteration line-searches over power-of-two multiples of the configured
    step, accepting only steps that do not increase the total, so the recorded
    totals never go up. Stops when the gradient vanishes, no step of at most
    ``max_halvings`` halvings helps, every weighted data term is exactly zero
    (``stop_when_coherent``), the decrease drops below ``convergence_tol``, or
    ``max_iters`` is reached.
    """
    config = config or RefineConfig()
    if config.lambda_d > 0 and ground_truth_mask is None:
        raise ValidationError("a ground-truth mask is required when lambda_d > 0")
    if ground_truth_mask is not None:
        check_mask_ids(ground_truth_mask, scene)
    anchors = scene.translations()
    current = scene
    ev = evaluate(current, ground_truth_mask, config, anchors)
    records = [_record(0, current, ev, 0.0)]
    reason = "max_iters"
    converged = False
    for k in range(1, config.max_iters + 1):
        if all(not np.any(g) for g in ev.gradients.values()):
            reason, converged = "zero_gradient", True
            break
        accepted = _line_search(current, ev, ground_truth_mask, config, anchors)
        if accepted is None:
            reason, converged = "no_descent_step", True
            break
        proposal, trial, step = accepted
        decrease = ev.total - trial.total
        current, ev = proposal, trial
        records.append(_record(k, current, ev, step))
        if config.stop_when_coherent and _coherent(ev, config):
            reason, converged = "coherent", True
            break
        if decrease < config.convergence_tol:
            reason, converged = "tolerance", True
            break
    logger.debug("refine stopped after %d iterations (%s)", len(records) - 1, reason)
    return current, RefineTrace(records=records, scene=current, converged=converged, reason=reason)
