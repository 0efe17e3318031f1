"""Command-line entry point: ``coherent {voxelize,render,losses,metrics,refine}``.

Every command prints exactly one JSON document on stdout. Exit status is 0 on
success, 2 for invalid input or I/O failures and 1 for internal errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .imageio import write_pfm, write_pgm16
from .mesh import load_mesh
from .metrics import scene_metrics
from .penetration import RobustifierConfig
from .raster import render
from .refine import RefineConfig, refine
from .scene import load_instance_mask, load_scene, save_scene
from .sdf import DEFAULT_PADDING, DEFAULT_RESOLUTION, save_field, voxelize_phi

log = logging.getLogger("coherent")


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc) + "\n")


def cmd_voxelize(args) -> int:
    mesh = load_mesh(args.mesh)
    start = time.perf_counter()
    field = voxelize_phi(mesh, resolution=args.resolution, padding_fraction=args.padding)
    elapsed = time.perf_counter() - start
    save_field(field, args.out)
    _emit({"out": str(args.out), "resolution": field.resolution,
           "origin": field.origin.tolist(), "spacing": field.spacing.tolist(),
           "max_value": float(field.values.max()),
           "inside_voxels": int(np.count_nonzero(field.values)),
           "wall_time_s": elapsed})
    return 0


def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    out = render(scene)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_pgm16(out_dir / "instance.pgm", out.instance.data)
    write_pfm(out_dir / "depth_scene.pfm", out.scene_depth.data)
    for body_id, dm in out.depths.items():
        write_pfm(out_dir / f"depth_body_{body_id}.pfm", dm.data)
    _emit({"out_dir": str(out_dir), "width": scene.camera.width, "height": scene.camera.height,
           "visible_pixels": {str(k): v for k, v in out.instance.counts().items()},
           "covered_pixels": {str(k): int(dm.coverage.sum()) for k, dm in out.depths.items()}})
    return 0


def cmd_losses(args) -> int:
    scene = load_scene(args.scene)
    mask = load_instance_mask(args.mask, scene) if args.mask else None
    report = scene_metrics(scene, mask, sigma=args.sigma, resolution=args.resolution)
    _emit(report.to_dict())
    return 0


def cmd_refine(args) -> int:
    scene = load_scene(args.scene)
    mask = load_instance_mask(args.mask, scene) if args.mask else None
    defaults = RefineConfig()
    lambda_d = args.lambda_d if args.lambda_d is not None else (defaults.lambda_d if mask else 0.0)
    config = RefineConfig(
        lambda_p=args.lambda_p, lambda_d=lambda_d, lambda_anchor=args.lambda_anchor,
        step_size=args.step, max_iters=args.iters,
        voxel_resolution=args.resolution,
        robustifier=RobustifierConfig(args.sigma) if args.sigma else defaults.robustifier)
    refined, trace = refine(scene, mask, config)
    save_scene(refined, args.out, source_dir=Path(args.scene).parent)
    if args.trace:
        trace.write_jsonl(args.trace)
    last = trace.records[-1]
    _emit({"out": str(args.out), "converged": trace.converged, "reason": trace.reason,
           "iterations": len(trace.records) - 1, "total": last.total,
           "L_P": last.loss_p, "L_D": last.loss_d, "anchor": last.anchor,
           "collision_count": last.collision_count,
           "depth_order_accuracy": last.depth_order_accuracy})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coherent", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("voxelize", help="write the clamped distance field of a mesh (PHIF)")
    p.add_argument("--mesh", required=True)
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--padding", type=float, default=DEFAULT_PADDING)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_voxelize)

    p = sub.add_parser("render", help="render instance and depth maps")
    p.add_argument("--scene", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_render)

    for name, need_mask in (("losses", False), ("metrics", True)):
        p = sub.add_parser(name, help="interpenetration / depth-order losses and metrics")
        p.add_argument("--scene", required=True)
        p.add_argument("--mask", required=need_mask)
        p.add_argument("--sigma", type=float, default=RobustifierConfig().sigma)
        p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
        p.set_defaults(func=cmd_losses)

    d = RefineConfig()
    p = sub.add_parser("refine", help="optimize body translations")
    p.add_argument("--scene", required=True)
    p.add_argument("--mask")
    p.add_argument("--iters", type=int, default=d.max_iters)
    p.add_argument("--step", type=float, default=d.step_size)
    p.add_argument("--lambda-p", type=float, default=d.lambda_p)
    p.add_argument("--lambda-d", type=float, default=None,
                   help=f"default {d.lambda_d} with a mask, 0 without")
    p.add_argument("--lambda-anchor", type=float, default=d.lambda_anchor)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--resolution", type=int, default=d.voxel_resolution)
    p.add_argument("--trace")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refine)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
