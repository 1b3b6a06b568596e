'''
Module: cli.py
Description: simulate and calibrate subcommands

Usage:
- simulate(): render a scan to sequence.gts, gt_trajectory.txt and gt_mesh.ply
- calibrate(): ball-press dataset + calibration training, written as a TNET container
- add_subparser(): register simulate and calibrate
'''
from __future__ import annotations

import argparse
import dataclasses
import logging
from pathlib import Path
from typing import Union

import numpy as np
from rich import print as rprint

from ..errors import TacSlamError
from ..pipeline.cli import add_common_arguments, config_from_args
from ..pipeline.config import PipelineConfig
from ..pipeline.formats import GtsHeader, GtsWriter, PayloadKind, write_net, write_trajectory
from ..recon import write_mesh
from .calibration import BALL_DIAMETER, TrainReport, generate_ball_press_dataset, train_calibration
from .objects import make_object
from .sequence import ground_truth_mesh, ground_truth_poses, render_sequence
from .trajectory import KINDS, make_trajectory

log = logging.getLogger(__name__)


def simulate(cfg: PipelineConfig, out_dir: Union[str, Path]) -> dict[str, Path]:
    '''
    simulate(): render cfg.object along cfg.trajectory; deterministic under the configured seeds

    Parameters:
    cfg (PipelineConfig): object, trajectory, render and sensor settings; run.photometric stores RGB
    out_dir (str | Path): output directory

    Dependencies: tacslam.pipeline.formats (GtsWriter, write_trajectory), tacslam.recon.write_mesh
    '''
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = dataclasses.replace(cfg.sensor, frame_rate=cfg.trajectory.frame_rate)
    obj = make_object(cfg.object)
    traj = make_trajectory(obj, cfg.trajectory)
    renders = render_sequence(obj, traj, spec, cfg.render, cfg.run.seed, workers=cfg.run.workers)

    kind = PayloadKind.RGB if cfg.run.photometric else PayloadKind.NORMALS
    paths = {"sequence": out / "sequence.gts"}
    with GtsWriter(paths["sequence"], GtsHeader.for_spec(spec, kind)) as w:
        for t, res in zip(traj.timestamps.tolist(), renders):
            if kind is PayloadKind.RGB:
                w.write(t, np.clip(np.round(res.rgb * 255.0), 0, 255).astype(np.uint8))
            else:
                w.write(t, res.normal.astype(np.float32))

    poses = ground_truth_poses(traj)
    paths["trajectory"] = write_trajectory(out / "gt_trajectory.txt", dict(enumerate(poses)),
                                           dict(enumerate(traj.timestamps.tolist())),
                                           comment=f"ground truth, {traj.kind} scan of {cfg.object['kind']}")
    paths["mesh"] = write_mesh(ground_truth_mesh(obj, traj), out / "gt_mesh.ply")
    log.info("simulated %d frames (%d in contact) -> %s", len(traj), int(traj.in_contact.sum()), out)
    return paths


def calibrate(cfg: PipelineConfig, out: Union[str, Path], n_images: int = 50,
              ball_diameter: float = BALL_DIAMETER) -> tuple[Path, TrainReport]:
    '''
    calibrate(): simulate n_images ball presses, train the calibration net and save it

    Parameters:
    cfg (PipelineConfig): sensor and calibration (TrainParams) settings
    out (str | Path): net container path
    n_images (int, optional): ball presses (Default: 50)
    ball_diameter (float, optional): mm (Default: 6.31)
    '''
    data = generate_ball_press_dataset(cfg.sensor, ball_diameter, n_images, cfg.calibration.seed)
    net, report = train_calibration(data, cfg.calibration)
    return write_net(net, out), report


# ---------- Parsers ----------

def add_subparser(subparsers: argparse._SubParsersAction, formatter_class) -> None:
    # simulate
    p_sim = subparsers.add_parser("simulate", help="Render a synthetic tactile scan with ground truth",
                                  description="Render a synthetic tactile scan to sequence.gts, gt_trajectory.txt and gt_mesh.ply",
                                  formatter_class=formatter_class)
    p_sim.add_argument("-o", "--out-dir", type=str, default="sim_out", help="Output directory (Default: sim_out)")
    p_sim.add_argument("--object", type=str, help="Object kind (sphere, bumpy-sphere, superellipsoid); parameters via --set object.KEY=VALUE")
    p_sim.add_argument("--trajectory", choices=KINDS, help="Trajectory kind (Default: walk)")
    p_sim.add_argument("--frames", type=int, help="Number of frames (Default: 300)")
    p_sim.add_argument("--photometric", action="store_true", help="Store RGB images instead of normal maps")
    p_sim.add_argument("--workers", type=int, help="Render threads (Default: 1)")
    add_common_arguments(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    # calibrate
    p_cal = subparsers.add_parser("calibrate", help="Train the photometric calibration net on simulated ball presses",
                                  description="Train the photometric calibration net on simulated ball presses",
                                  formatter_class=formatter_class)
    p_cal.add_argument("-o", "--out", type=str, default="calibration.tnet", help="Net container (Default: calibration.tnet)")
    p_cal.add_argument("--images", type=int, default=50, help="Ball presses (Default: 50)")
    p_cal.add_argument("--ball", type=float, default=BALL_DIAMETER, help=f"Ball diameter in mm (Default: {BALL_DIAMETER})")
    add_common_arguments(p_cal)
    p_cal.set_defaults(func=_cmd_calibrate)


def _sim_overrides(args: argparse.Namespace) -> argparse.Namespace:
    sets = list(args.set or [])
    if args.object:
        sets.insert(0, ("object.kind", args.object))
    for key, value in (("trajectory.kind", args.trajectory), ("trajectory.n_frames", args.frames),
                       ("run.workers", args.workers)):
        if value is not None:
            sets.append((key, value))
    if args.photometric:
        sets.append(("run.photometric", True))
    return argparse.Namespace(config=args.config, seed=args.seed, set=sets)


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        cfg = config_from_args(_sim_overrides(args))
        paths = simulate(cfg, args.out_dir)
    except TacSlamError as e:
        rprint(f"[red]{type(e).__name__}: {e}[/red]")
        return 1
    for name, path in paths.items():
        rprint(f"[green]{name}[/green]: {path}")
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    try:
        cfg = config_from_args(args)
        path, report = calibrate(cfg, args.out, args.images, args.ball)
    except TacSlamError as e:
        rprint(f"[red]{type(e).__name__}: {e}[/red]")
        return 1
    except ValueError as e:
        rprint(f"[red]{e}[/red]")
        return 1
    rprint(f"holdout mean angular error: [bold]{report.holdout_angle_deg:.3f} deg[/bold] "
           f"({report.n_train} train / {report.n_holdout} holdout pixels, {report.epochs} epochs)")
    rprint(f"[green]wrote[/green] {path}")
    return 0
