'''
Module: evaluate.py
Description: Trajectory and reconstruction accuracy against simulator ground truth

Usage:
[Trajectory]
- trajectory_errors(): per-frame Euler rotation (deg) and translation (mm) errors as a DataFrame
- trajectory_mae(): per-axis mean absolute errors

[Loops]
- false_loops(): loop edges of a pose graph that disagree with ground truth

[Report]
- MetricsReport: MAE, CD, NCD, loop counts, keyframe/coverage counts, stage times
- evaluate(): assemble a MetricsReport from files already loaded
- report_table(): rich table of a MetricsReport
- write_report(): JSON dump
- plot_trajectories(): estimated vs ground-truth translation components (matplotlib)
'''
# Import packages
from __future__ import annotations
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np
import pandas as pd
import trimesh
from rich.table import Table
from scipy.spatial.transform import Rotation

from ..geometry import TransformSE3, pose_difference
from ..graph import PoseGraph
from ..recon import AlignmentDiverged, align_meshes, chamfer_distance, normal_cosine_distance
from ..surface import SensorSpec
from .formats import FrameMismatch

log = logging.getLogger(__name__)

AXES = ("x", "y", "z")
FALSE_LOOP_MM = 1.0
FALSE_LOOP_DEG = 5.0


# ---------- Trajectory ----------

def trajectory_errors(estimated: Mapping[int, TransformSE3], truth: Mapping[int, TransformSE3]) -> pd.DataFrame:
    '''
    trajectory_errors(): errors of every estimated frame after re-expressing both trajectories relative to the
    first frame they share

    Parameters:
    estimated (dict): frame id -> estimated pose
    truth (dict): frame id -> ground-truth pose (may hold extra frames)

    Returns:
    DataFrame indexed by frame with columns rx, ry, rz (deg) and tx, ty, tz (mm); the reference frame is omitted
    '''
    missing = sorted(f for f in estimated if f not in truth)
    if missing:
        raise FrameMismatch(f"{len(missing)} estimated frames have no ground truth (first {missing[:5]})",
                            missing=missing)
    frames = sorted(estimated)
    if not frames:
        raise FrameMismatch("estimated trajectory is empty", missing=[])
    ref = frames[0]
    e_ref, g_ref = estimated[ref].inverse(), truth[ref].inverse()

    rows = []
    for f in frames[1:]:
        E, G = e_ref @ estimated[f], g_ref @ truth[f]
        rot = np.abs(Rotation.from_matrix(G.rotation.T @ E.rotation).as_euler("xyz", degrees=True))
        rows.append([f, *rot, *np.abs(E.translation - G.translation)])
    cols = ["frame"] + [f"r{a}" for a in AXES] + [f"t{a}" for a in AXES]
    return pd.DataFrame(rows, columns=cols).set_index("frame")


def trajectory_mae(errors: pd.DataFrame) -> dict[str, float]:
    if errors.empty:
        return {c: 0.0 for c in [f"r{a}" for a in AXES] + [f"t{a}" for a in AXES]}
    return {c: float(v) for c, v in errors.mean().items()}


# ---------- Loops ----------

def false_loops(graph: PoseGraph, truth: Mapping[int, TransformSE3], max_mm: float = FALSE_LOOP_MM,
                max_deg: float = FALSE_LOOP_DEG) -> list[int]:
    '''
    false_loops(): indices of loop edges whose relative pose misses ground truth by more than max_mm or max_deg

    Parameters:
    graph (PoseGraph): graph dump with loop edges (source 'loop')
    truth (dict): frame id -> ground-truth pose
    max_mm (float, optional): translation tolerance (Default: 1.0)
    max_deg (float, optional): rotation tolerance (Default: 5.0)
    '''
    out = []
    for k in graph.loop_edges():
        e = graph.edges[k]
        if e.i not in truth or e.j not in truth:
            log.warning("loop edge %d -> %d has no ground truth; counted as false", e.i, e.j)
            out.append(k)
            continue
        rot, trans = pose_difference(e.transform, truth[e.j].inverse() @ truth[e.i])
        if rot > max_deg or trans > max_mm:
            log.info("false loop %d -> %d (%.2f deg, %.3f mm)", e.i, e.j, rot, trans)
            out.append(k)
    return out


# ---------- Report ----------

@dataclass
class MetricsReport:
    frames: int = 0
    rotation_mae: dict[str, float] = field(default_factory=dict)       # deg per axis
    translation_mae: dict[str, float] = field(default_factory=dict)    # mm per axis
    chamfer: Optional[float] = None                                    # mm
    ncd: Optional[float] = None
    aligned: Optional[bool] = None
    loops: dict[str, Optional[int]] = field(default_factory=dict)      # candidates, accepted, false
    keyframes: Optional[int] = None
    coverage: Optional[int] = None
    seconds: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(estimated: Mapping[int, TransformSE3], truth: Mapping[int, TransformSE3],
             est_mesh: Optional[trimesh.Trimesh] = None, gt_mesh: Optional[trimesh.Trimesh] = None,
             graph: Optional[PoseGraph] = None, run_report: Optional[dict] = None,
             spec: SensorSpec = SensorSpec(), align: bool = True, samples: int = 100_000,
             contacts: int = 100, seed: int = 0) -> MetricsReport:
    '''
    evaluate(): MetricsReport for one run

    Parameters:
    estimated (dict): estimated trajectory
    truth (dict): ground-truth trajectory
    est_mesh (trimesh.Trimesh, optional): reconstruction (Default: None)
    gt_mesh (trimesh.Trimesh, optional): reference mesh (Default: None)
    graph (PoseGraph, optional): graph dump for false-loop counting (Default: None)
    run_report (dict, optional): run_report.json of the slam run (Default: None)
    spec (SensorSpec, optional): simulated sensor for NCD (Default: SensorSpec())
    align (bool, optional): ICP pre-alignment of est_mesh onto gt_mesh (Default: True)
    samples (int, optional): Chamfer samples per mesh (Default: 100000)
    contacts (int, optional): NCD contact locations (Default: 100)
    seed (int, optional): sampling seed (Default: 0)

    Dependencies: pandas, scipy.spatial.transform, tacslam.recon
    '''
    errors = trajectory_errors(estimated, truth)
    mae = trajectory_mae(errors)
    report = MetricsReport(frames=len(estimated),
                           rotation_mae={a: mae[f"r{a}"] for a in AXES},
                           translation_mae={a: mae[f"t{a}"] for a in AXES})

    if est_mesh is not None and gt_mesh is not None:
        mesh = est_mesh.copy()
        report.aligned = False
        if align:
            try:
                mesh.apply_transform(align_meshes(mesh, gt_mesh, seed=seed).as_matrix())
                report.aligned = True
            except AlignmentDiverged as e:
                log.warning("%s; metrics use the unaligned mesh", e)
        report.chamfer = chamfer_distance(mesh, gt_mesh, samples, seed)
        report.ncd = normal_cosine_distance(mesh, gt_mesh, spec, contacts, seed=seed)

    run = run_report or {}
    loops = run.get("loops", {})
    report.loops = {"candidates": loops.get("candidates"), "accepted": loops.get("accepted"), "false": None}
    if graph is not None:
        report.loops["accepted"] = len(graph.loop_edges())
        report.loops["false"] = len(false_loops(graph, truth))
    report.keyframes = run.get("keyframes", len(graph) if graph is not None else None)
    report.coverage = run.get("coverage")
    report.seconds = dict(run.get("seconds", {}))
    return report


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def report_table(report: MetricsReport) -> Table:
    t = Table(title="Evaluation")
    t.add_column("Metric")
    t.add_column("x", justify="right")
    t.add_column("y", justify="right")
    t.add_column("z", justify="right")
    t.add_row("Rotation MAE (deg)", *[_fmt(report.rotation_mae.get(a)) for a in AXES])
    t.add_row("Translation MAE (mm)", *[_fmt(report.translation_mae.get(a)) for a in AXES])
    t.add_row("Frames", str(report.frames), "", "")
    if report.chamfer is not None:
        t.add_row("Chamfer distance (mm)", _fmt(report.chamfer), "", "")
        t.add_row("Normal cosine", _fmt(report.ncd), "", "")
    loops = report.loops
    t.add_row("Loops (candidates / accepted / false)",
              " / ".join("-" if loops.get(k) is None else str(loops[k]) for k in ("candidates", "accepted", "false")),
              "", "")
    if report.keyframes is not None:
        t.add_row("Keyframes / coverage", f"{report.keyframes} / {report.coverage if report.coverage is not None else '-'}", "", "")
    for stage, sec in report.seconds.items():
        t.add_row(f"{stage} (s)", f"{sec:.3f}", "", "")
    return t


def write_report(report: MetricsReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2))
    return path


def plot_trajectories(estimated: Mapping[int, TransformSE3], truth: Mapping[int, TransformSE3],
                      path: Union[str, Path]) -> Path:
    '''
    plot_trajectories(): three stacked panels (x, y, z translation vs frame) of both trajectories,
    each relative to the first estimated frame

    Dependencies: matplotlib
    '''
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    frames = sorted(estimated)
    ref = frames[0]
    est = np.array([(estimated[ref].inverse() @ estimated[f]).translation for f in frames])
    gt = np.array([(truth[ref].inverse() @ truth[f]).translation for f in frames])

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 7))
    for k, (ax, name) in enumerate(zip(axes, AXES)):
        ax.plot(frames, gt[:, k], color="black", lw=1.2, label="ground truth")
        ax.plot(frames, est[:, k], color="tab:red", lw=1.0, label="estimate")
        ax.set_ylabel(f"t{name} (mm)")
    axes[0].legend(loc="best", frameon=False)
    axes[-1].set_xlabel("frame")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
