"""Scene coherency metrics: collision count, losses and depth-order accuracy."""

from __future__ import annotations

from dataclasses import dataclass, field

from .penetration import RobustifierConfig, scene_penetration
from .raster import (depth_order_counts, mask_implied_ordering,
                     ordinal_depth_loss, render)
from .scene import InstanceMap, Scene, check_mask_ids
from .sdf import DEFAULT_RESOLUTION


@dataclass
class MetricsReport:
    collision_count: int
    loss_p: float
    pair_penalties: list[dict] = field(default_factory=list)
    loss_d: float | None = None
    depth_order_accuracy: float | None = None
    ordered_pairs_compared: int | None = None
    disagreement_pixels: int | None = None
    skipped_pixels: int | None = None

    def to_dict(self) -> dict:
        return {
            "collision_count": self.collision_count,
            "L_P": self.loss_p,
            "L_D": self.loss_d,
            "depth_order_accuracy": self.depth_order_accuracy,
            "ordered_pairs_compared": self.ordered_pairs_compared,
            "disagreement_pixels": self.disagreement_pixels,
            "skipped_pixels": self.skipped_pixels,
            "pairs": self.pair_penalties,
        }


def scene_metrics(scene: Scene, mask: InstanceMap | None = None, sigma: float = 0.5,
                  resolution: int = DEFAULT_RESOLUTION) -> MetricsReport:
    pen = scene_penetration(scene, resolution, RobustifierConfig(sigma))
    pairs = [{"i": i, "j": j, "penalty": p} for (i, j), p in sorted(pen.pair_penalties.items())]
    report = MetricsReport(collision_count=pen.collision_count, loss_p=pen.loss,
                           pair_penalties=pairs)
    if mask is not None:
        check_mask_ids(mask, scene)
        rendered = render(scene)
        od = ordinal_depth_loss(rendered, mask)
        correct, total = depth_order_counts(scene, mask_implied_ordering(rendered, mask))
        report.loss_d = od.loss
        report.disagreement_pixels = od.disagreement_pixels
        report.skipped_pixels = od.skipped_pixels
        report.depth_order_accuracy = correct / total if total else 1.0
        report.ordered_pairs_compared = total
    return report
