'''
Module: cli.py
Description: slam, reconstruct, evaluate and concat subcommands

Usage:
[Shared flags]
- add_common_arguments(): --config, --seed, --set section.key=value
- config_from_args(): PipelineConfig from the shared and per-command flags

[Subcommands]
- add_subparser(): register slam, reconstruct, evaluate and concat
- _cmd_slam(), _cmd_reconstruct(), _cmd_evaluate(), _cmd_concat()
'''
from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
from typing import Any

from rich import print as rprint
from rich.console import Console
from rich.table import Table

from ..errors import TacSlamError
from ..graph import read_graph
from ..recon import read_mesh, write_mesh
from ..utils import parse_key_value
from .config import PipelineConfig, dump_yaml, load_config
from .evaluate import evaluate, plot_trajectories, report_table, write_report
from .formats import GtsReader, concat_gts, read_trajectory
from .slam import frames_from_gts, load_net, reconstruct_from_graph, run_report, run_slam, write_outputs

log = logging.getLogger(__name__)

SEED_KEYS = ("run.seed", "trajectory.seed", "calibration.seed", "loop.seed")


# ---------- Shared flags ----------

def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="YAML configuration file (section: {key: value})")
    parser.add_argument("--seed", type=int, help="Seed for simulation, training, RANSAC and the run (Default: 0)")
    parser.add_argument("--set", type=parse_key_value, action="append", metavar="SECTION.KEY=VALUE",
                        help="Override one configuration key (repeatable; e.g., tracking.k_pixels=3000)")


def add_pipeline_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=["offline", "online"], help="offline: loops for every keyframe; online: threaded, newest keyframe only")
    parser.add_argument("--solver", choices=["lm", "gnc"], help="Pose graph solver (Default: lm)")
    parser.add_argument("--profile", choices=["tracking", "reconstruction"], help="CCS/SCR threshold profile (Default: reconstruction)")


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    '''
    config_from_args(): defaults < user store < --config < --set < dedicated flags
    '''
    overrides: dict[str, Any] = dict(getattr(args, "set", None) or [])
    seed = getattr(args, "seed", None)
    if seed is not None:
        overrides.update({k: seed for k in SEED_KEYS})
    flags = {
        "run.mode": getattr(args, "mode", None),
        "graph.solver": getattr(args, "solver", None),
        "tracking.profile": getattr(args, "profile", None),
        "run.loop_delay": getattr(args, "loop_delay", None),
    }
    overrides.update({k: v for k, v in flags.items() if v is not None})
    if getattr(args, "no_loops", False):
        overrides["run.loops"] = False
    if getattr(args, "no_remesh", False):
        overrides["run.remesh"] = False
    if getattr(args, "no_realtime", False):
        overrides["run.realtime"] = False
    return load_config(getattr(args, "config", None), overrides)


# ---------- Parsers ----------

def add_subparser(subparsers: argparse._SubParsersAction, formatter_class) -> None:
    # slam
    p_slam = subparsers.add_parser("slam", help="Track, close loops, optimize and reconstruct a .gts sequence",
                                   description="Track, close loops, optimize and reconstruct a .gts sequence",
                                   formatter_class=formatter_class)
    p_slam.add_argument("sequence", type=str, help="Input .gts sequence")
    p_slam.add_argument("-o", "--out-dir", type=str, default="slam_out", help="Output directory (Default: slam_out)")
    p_slam.add_argument("--net", type=str, help="Calibration net (required for RGB sequences)")
    p_slam.add_argument("--no-loops", action="store_true", help="Tracking only; no loop closure")
    p_slam.add_argument("--no-remesh", action="store_true", help="Skip watertight re-meshing")
    p_slam.add_argument("--no-realtime", action="store_true", help="Online mode: do not pace frames at the frame rate")
    p_slam.add_argument("--loop-delay", type=float, help="Online mode: extra seconds per loop-closure batch")
    p_slam.add_argument("--dump-config", type=str, help="Also write the effective configuration as YAML")
    add_common_arguments(p_slam)
    add_pipeline_arguments(p_slam)
    p_slam.set_defaults(func=_cmd_slam)

    # reconstruct
    p_rec = subparsers.add_parser("reconstruct", help="Fuse and re-mesh from a sequence and a graph dump",
                                  description="Fuse and re-mesh from a sequence and a graph dump",
                                  formatter_class=formatter_class)
    p_rec.add_argument("sequence", type=str, help="Input .gts sequence")
    p_rec.add_argument("--graph", type=str, required=True, help="Pose graph dump (graph.txt)")
    p_rec.add_argument("-o", "--out-dir", type=str, default="recon_out", help="Output directory (Default: recon_out)")
    p_rec.add_argument("--net", type=str, help="Calibration net (required for RGB sequences)")
    p_rec.add_argument("--no-remesh", action="store_true", help="Skip watertight re-meshing")
    add_common_arguments(p_rec)
    p_rec.set_defaults(func=_cmd_reconstruct)

    # evaluate
    p_eval = subparsers.add_parser("evaluate", help="Trajectory MAE, Chamfer distance and normal cosine against ground truth",
                                   description="Trajectory MAE, Chamfer distance and normal cosine against ground truth",
                                   formatter_class=formatter_class)
    p_eval.add_argument("--trajectory", type=str, required=True, help="Estimated trajectory.txt")
    p_eval.add_argument("--gt-trajectory", type=str, required=True, help="Ground-truth trajectory")
    p_eval.add_argument("--mesh", type=str, help="Estimated mesh (.ply/.obj)")
    p_eval.add_argument("--gt-mesh", type=str, help="Ground-truth mesh (.ply/.obj)")
    p_eval.add_argument("--graph", type=str, help="Graph dump for false-loop counting")
    p_eval.add_argument("--run-report", type=str, help="run_report.json of the slam run")
    p_eval.add_argument("--no-align", action="store_true", help="Skip ICP pre-alignment of the meshes")
    p_eval.add_argument("--samples", type=int, help="Chamfer samples per mesh (Default: run.chamfer_samples)")
    p_eval.add_argument("--contacts", type=int, help="Normal cosine contact locations (Default: run.ncd_contacts)")
    p_eval.add_argument("--report", type=str, help="Write the metrics as JSON")
    p_eval.add_argument("--plot", type=str, help="Write a translation plot (png/pdf/svg)")
    add_common_arguments(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    # concat
    p_cat = subparsers.add_parser("concat", help="Merge .gts sequences into one",
                                  description="Merge .gts sequences into one; timestamps are re-based at the frame rate",
                                  formatter_class=formatter_class)
    p_cat.add_argument("inputs", nargs="+", help="Input .gts files in playback order")
    p_cat.add_argument("-o", "--out", type=str, required=True, help="Merged .gts")
    p_cat.set_defaults(func=_cmd_concat)


def run(args: argparse.Namespace) -> int:
    if hasattr(args, "func"):
        return args.func(args)
    rprint("[yellow]Choose a subcommand (slam|reconstruct|evaluate|concat).[/yellow]")
    return 1


# -------------------------
# Command implementations
# -------------------------

def _fail(e: TacSlamError) -> int:
    rprint(f"[red]{type(e).__name__}: {e}[/red]")
    return 1


def _summary(report: dict) -> Table:
    t = Table(title="SLAM run")
    t.add_column("Quantity")
    t.add_column("Value", justify="right")
    for key in ("mode", "frames", "tracked_frames", "keyframes", "sessions", "coverage", "fused_vertices", "watertight"):
        t.add_row(key, str(report[key]))
    loops = report["loops"]
    t.add_row("loops (candidates / accepted / rejected)",
              f"{loops['candidates']} / {loops['accepted']} / {loops['rejected']}")
    t.add_row("skipped loop detections", str(len(loops["skipped_keyframes"])))
    omitted = report["omitted_frames"]
    t.add_row("frames without a pose (no contact / unreachable)",
              f"{len(omitted['no_contact'])} / {len(omitted['unreachable'])}")
    for stage, sec in report["seconds"].items():
        t.add_row(f"{stage} (s)", f"{sec:.3f}")
    return t


def _cmd_slam(args: argparse.Namespace) -> int:
    try:
        cfg = config_from_args(args)
        reader = GtsReader(args.sequence)
        cfg = cfg.with_sensor(reader.header.sensor(cfg.sensor))
        if args.dump_config:
            dump_yaml(cfg, args.dump_config)
        frames = frames_from_gts(reader, cfg, load_net(args.net))
        result = run_slam(frames, cfg.sensor, cfg)
        paths = write_outputs(result, args.out_dir)
    except TacSlamError as e:
        return _fail(e)
    Console().print(_summary(run_report(result)))
    for name, path in paths.items():
        rprint(f"[green]{name}[/green]: {path}")
    return 0


def _cmd_reconstruct(args: argparse.Namespace) -> int:
    try:
        cfg = config_from_args(args)
        reader = GtsReader(args.sequence)
        cfg = cfg.with_sensor(reader.header.sensor(cfg.sensor))
        fused, mesh = reconstruct_from_graph(reader, read_graph(args.graph), cfg, load_net(args.net))
        out = Path(args.out_dir)
        written = [write_mesh(fused.mesh, out / "fused.ply")]
        if mesh is not None:
            written.append(write_mesh(mesh.mesh, out / "mesh.ply"))
    except TacSlamError as e:
        return _fail(e)
    except (OSError, ValueError) as e:
        rprint(f"[red]{e}[/red]")
        return 1
    rprint(f"fused {len(fused)} vertices" + ("" if mesh is None else f"; watertight: {mesh.watertight}"))
    for path in written:
        rprint(f"[green]wrote[/green] {path}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        cfg = config_from_args(args)
        est, _ = read_trajectory(args.trajectory)
        gt, _ = read_trajectory(args.gt_trajectory)
        est_mesh = read_mesh(args.mesh) if args.mesh else None
        gt_mesh = read_mesh(args.gt_mesh) if args.gt_mesh else None
        graph = read_graph(args.graph) if args.graph else None
        run = json.loads(Path(args.run_report).read_text()) if args.run_report else None
        report = evaluate(est, gt, est_mesh, gt_mesh, graph, run, cfg.sensor, align=not args.no_align,
                          samples=args.samples or cfg.run.chamfer_samples,
                          contacts=args.contacts or cfg.run.ncd_contacts, seed=cfg.run.seed)
    except TacSlamError as e:
        return _fail(e)
    except (OSError, ValueError) as e:
        rprint(f"[red]{e}[/red]")
        return 1
    Console().print(report_table(report))
    if args.report:
        rprint(f"[green]report[/green]: {write_report(report, args.report)}")
    if args.plot:
        rprint(f"[green]plot[/green]: {plot_trajectories(est, gt, args.plot)}")
    return 0


def _cmd_concat(args: argparse.Namespace) -> int:
    try:
        header = concat_gts(args.inputs, args.out)
    except TacSlamError as e:
        return _fail(e)
    rprint(f"[green]wrote[/green] {args.out}: {header.count} frames at {header.frame_rate:g} Hz")
    return 0
