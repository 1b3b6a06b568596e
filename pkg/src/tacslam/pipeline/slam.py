'''
Module: slam.py
Description: Tactile SLAM runs; tracking -> loop closure -> pose graph -> fusion -> re-meshing

Usage:
[Inputs]
- NoContactFrames: no frame of the sequence touches the object
- load_net(): calibration net for RGB sequences
- frames_from_gts(): decode a .gts sequence into Frames lazily

[Back end]
- SlamBackend: keyframe graph, loop detection, coverage admission, snapshots
- SlamResult: poses, graph, loop statistics, meshes and timings of one run

[Runs]
- run_offline(): every keyframe gets loop detection; deterministic
- run_online(): three threaded stages; loop detection only for the newest keyframe of each batch
- run_slam(): dispatch on run.mode, then final fusion and re-meshing
- reconstruct_from_graph(): fusion + re-meshing from a .gts and a saved pose graph
- omitted_frames(): frames left out of the trajectory, by reason
- write_outputs(): trajectory, graph dump, meshes and run_report.json
'''
# Import packages
from __future__ import annotations
import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from ..errors import TacSlamError
from ..geometry import TransformSE3
from ..graph import Edge, PoseGraph, SolveReport, optimize, recover_all_frame_poses, write_graph
from ..loop import CoverageSet, LoopConstraint, LoopDetector
from ..recon import FastFusion, FusedSurface, WatertightMesh, fuse_fast, remesh_watertight, write_mesh
from ..sim.calibration import CalibrationNet
from ..sim.sequence import frame_from_rgb
from ..surface import Frame, SensorSpec, frame_from_normals
from ..tracking import Keyframe, KeyframeConstraint, Tracker, TrackResult
from ..utils import StageTimer
from .config import PipelineConfig
from .formats import GtsReader, PayloadKind, UnreadableInput, read_net, write_trajectory
from .stages import END, NonBlockingSender, Stage, drain, join_all, put_latest

log = logging.getLogger(__name__)


class NoContactFrames(TacSlamError):
    """Raised when a sequence has no frame in contact with the object."""


# ---------- Inputs ----------

def load_net(path: Optional[Union[str, Path]]) -> Optional[CalibrationNet]:
    return read_net(path) if path is not None else None


def _decode(reader: GtsReader, cfg: PipelineConfig, net: Optional[CalibrationNet],
            ids: Iterable[int]) -> Iterator[Frame]:
    spec = reader.header.sensor(cfg.sensor)
    rgb = reader.header.kind is PayloadKind.RGB
    for i in ids:
        t, payload = reader.frame(i)
        if rgb:
            yield frame_from_rgb(i, t, payload.astype(float) / 255.0, spec, net, cfg.surface)
        else:
            yield frame_from_normals(i, t, payload.astype(float), None, cfg.surface)


def frames_from_gts(reader: GtsReader, cfg: PipelineConfig, net: Optional[CalibrationNet] = None,
                    ids: Optional[Iterable[int]] = None) -> Iterator[Frame]:
    '''
    frames_from_gts(): lazy Frames (normals, height, curvature, mask) for the stored payloads;
    the calibration check happens before the first frame is decoded

    Parameters:
    reader (GtsReader): open sequence
    cfg (PipelineConfig): surface settings; the sensor geometry comes from the header
    net (CalibrationNet, optional): required for RGB payloads (Default: None)
    ids (iterable of int, optional): frame indices to decode (Default: all)
    '''
    if reader.header.kind is PayloadKind.RGB and net is None:
        raise UnreadableInput(f"{reader.path}: RGB sequence needs a calibration net (--net)",
                              path=str(reader.path), reason="missing calibration")
    return _decode(reader, cfg, net, range(len(reader)) if ids is None else ids)


# ---------- Back end ----------

@dataclass(frozen=True, eq=False)
class Snapshot:
    keyframes: tuple[Keyframe, ...]
    poses: dict[int, TransformSE3]
    footprints: dict[int, np.ndarray]


class SlamBackend:
    '''
    SlamBackend: owns the pose graph and the loop detector; fed with tracker results in frame order

    Parameters:
    spec (SensorSpec): sensor geometry
    cfg (PipelineConfig): loop, graph and tracking settings
    timer (StageTimer, optional): wall-time accumulator (Default: new timer)
    '''
    def __init__(self, spec: SensorSpec, cfg: PipelineConfig, timer: Optional[StageTimer] = None):
        self.spec = spec
        self.cfg = cfg
        self.timer = timer or StageTimer()
        self.graph = PoseGraph()
        self.detector = LoopDetector(spec, cfg.thresholds, cfg.loop, cfg.tracking)
        self.keyframes: dict[int, Keyframe] = {}
        self.parent: dict[int, int] = {}             # keyframe -> previous keyframe of its session
        self.pending: list[int] = []                  # keyframes not yet admitted to coverage
        self.loops: list[LoopConstraint] = []
        self.report = SolveReport()
        self.solves = 0
        self.changed = False

    @property
    def loops_enabled(self) -> bool:
        return self.cfg.run.loops and self.cfg.loop.enabled

    def add_keyframe(self, kf: Keyframe, constraint: Optional[KeyframeConstraint]) -> None:
        '''
        add_keyframe(): new graph node; a promoted keyframe starts at T_prev (jT_i)^-1 with a tracking edge,
        a session's first keyframe starts at identity, unconnected
        '''
        if constraint is not None:
            init = self.graph.nodes[constraint.i] @ constraint.transform.inverse()
            self.graph.add_node(kf.id, init)
            self.graph.add_edge(Edge(constraint.i, constraint.j, constraint.transform, "tracking"))
            self.parent[kf.id] = constraint.i
        else:
            self.graph.add_node(kf.id, TransformSE3.identity())
            if len(self.graph) > 1:
                log.info("keyframe %d opens session %d, unconnected until a loop closes", kf.id, kf.session)
        self.keyframes[kf.id] = kf
        self.pending.append(kf.id)

    def detect(self, kf: Keyframe) -> list[LoopConstraint]:
        with self.timer("loop"):
            loops = self.detector.detect(kf, self.parent.get(kf.id))
        for lp in loops:
            self.graph.add_edge(Edge(lp.i, lp.j, lp.transform, "loop"))
        self.loops.extend(loops)
        if loops:
            self.solve()
        return loops

    def solve(self) -> SolveReport:
        with self.timer("graph"):
            _, self.report = optimize(self.graph, self.cfg.graph)
        self.solves += 1
        self.detector.coverage.set_poses(self.graph.nodes)
        self.changed = True
        return self.report

    def admit(self) -> None:
        """Move keyframes connected to the gauge into the coverage set, oldest first."""
        reach = self.graph.reachable()
        still = []
        for k in self.pending:
            if k not in reach:
                still.append(k)
                continue
            with self.timer("loop"):
                if self.detector.add_to_coverage(self.keyframes[k], self.graph.nodes[k]):
                    self.changed = True
        self.pending = still

    def process(self, results: Sequence[TrackResult], latest_only: bool = False) -> int:
        '''
        process(): add every new keyframe in results; loop detection for all of them, or only the newest

        Returns:
        number of keyframes added
        '''
        new: list[Keyframe] = []
        for res in results:
            by_j = {c.j: c for c in res.constraints}
            for kf in res.new_keyframes:
                self.add_keyframe(kf, by_j.get(kf.id))
                new.append(kf)
        if self.loops_enabled and new:
            targets = new[-1:] if latest_only else new
            for kf in new:
                if kf in targets:
                    self.detect(kf)
                else:
                    self.detector.skip(kf.id)
        self.admit()
        return len(new)

    def finish(self) -> SolveReport:
        if self.loops:
            self.solve()
        else:
            self.report = SolveReport(gauge=self.graph.gauge, unreachable=self.graph.unreachable())
        self.admit()
        if self.report.unreachable:
            log.warning("%d keyframes in sessions never connected to keyframe %s: %s",
                        len(self.report.unreachable), self.graph.gauge, self.report.unreachable)
        return self.report

    def snapshot(self) -> Snapshot:
        kfs = tuple(self.detector.coverage)
        self.changed = False
        return Snapshot(kfs, {kf.id: self.graph.nodes[kf.id] for kf in kfs}, self.detector.coverage.footprints())


@dataclass
class SlamResult:
    mode: str
    spec: SensorSpec
    frame_poses: dict[int, TransformSE3]
    timestamps: dict[int, float]
    graph: PoseGraph
    coverage: list[int]
    loops: list[LoopConstraint]
    report: SolveReport
    n_frames: int
    n_sessions: int
    skipped: list[int]
    candidates: int
    rejected: int
    timer: StageTimer
    coverage_keyframes: list[Keyframe] = field(default_factory=list)
    footprints: dict[int, np.ndarray] = field(default_factory=dict)
    fused: Optional[FusedSurface] = None
    mesh: Optional[WatertightMesh] = None
    snapshots: int = 0
    tracking_fps: float = 0.0
    max_backlog: int = 0
    backlog_overflows: int = 0
    frame_ids: list[int] = field(default_factory=list)      # every frame read
    anchored: list[int] = field(default_factory=list)       # frames tracked in some session

    @property
    def n_keyframes(self) -> int:
        return len(self.graph)


def _result(mode: str, spec: SensorSpec, tracker: Tracker, backend: SlamBackend, n_frames: int,
            timestamps: dict[int, float], timer: StageTimer) -> SlamResult:
    if not tracker.state.keyframes:
        raise NoContactFrames(f"none of the {n_frames} frames is in contact", n_frames=n_frames)
    reach = backend.graph.reachable()
    poses = {f: T for f, T in recover_all_frame_poses(backend.graph, tracker.state).items()
             if tracker.state.anchors[f][0] in reach}
    stats = backend.detector.stats
    cov = list(backend.detector.coverage)
    return SlamResult(mode, spec, poses, {f: timestamps[f] for f in poses}, backend.graph,
                      [kf.id for kf in cov], backend.loops, backend.report, n_frames, tracker.n_sessions,
                      list(stats.skipped), stats.candidates, stats.rejected, timer, cov,
                      footprints=backend.detector.coverage.footprints(), frame_ids=sorted(timestamps),
                      anchored=sorted(tracker.state.anchors))


# ---------- Runs ----------

def run_offline(frames: Iterable[Frame], spec: SensorSpec, cfg: PipelineConfig,
                timer: Optional[StageTimer] = None) -> SlamResult:
    '''
    run_offline(): single-threaded run; every keyframe is checked for loops

    Parameters:
    frames (iterable of Frame): sequence in frame order
    spec (SensorSpec): sensor geometry
    cfg (PipelineConfig): pipeline settings
    timer (StageTimer, optional): wall-time accumulator (Default: new timer)
    '''
    timer = timer or StageTimer()
    tracker = Tracker(spec, cfg.tracking)
    backend = SlamBackend(spec, cfg, timer)
    stamps, n = {}, 0
    for frame in frames:
        with timer("tracking"):
            res = tracker.track(frame)
        stamps[frame.id] = frame.timestamp
        n += 1
        if res.new_keyframes:
            backend.process([res])
    backend.finish()
    log.info("offline run: %d frames, %d keyframes, %d loops", n, len(backend.graph), len(backend.loops))
    return _result("offline", spec, tracker, backend, n, stamps, timer)


def run_online(frames: Iterable[Frame], spec: SensorSpec, cfg: PipelineConfig,
               timer: Optional[StageTimer] = None) -> SlamResult:
    '''
    run_online(): tracking, loop closure and fast fusion in three threads joined by bounded queues

    Parameters:
    frames (iterable of Frame): sequence in frame order, admitted at the frame rate when run.realtime
    spec (SensorSpec): sensor geometry
    cfg (PipelineConfig): pipeline settings (run.queue_size, run.loop_delay, run.snapshot_every)
    timer (StageTimer, optional): wall-time accumulator (Default: new timer)

    Dependencies: threading, queue, tacslam.pipeline.stages
    '''
    timer = timer or StageTimer()
    run = cfg.run
    stop = threading.Event()
    kf_queue: queue.Queue = queue.Queue(maxsize=run.queue_size)
    snap_queue: queue.Queue = queue.Queue(maxsize=1)
    tracker = Tracker(spec, cfg.tracking)
    backend = SlamBackend(spec, cfg, timer)
    fusion = FastFusion(spec, cfg.fusion)
    sender = NonBlockingSender(kf_queue)
    shared = {"frames": 0, "stamps": {}, "elapsed": 0.0, "snapshots": 0}

    def tracking() -> None:
        start = time.perf_counter()
        for n, frame in enumerate(frames):
            if stop.is_set():
                return
            if run.realtime:
                wait = start + n / spec.frame_rate - time.perf_counter()
                if wait > 0:
                    time.sleep(wait)
            with timer("tracking"):
                res = tracker.track(frame)
            shared["stamps"][frame.id] = frame.timestamp
            shared["frames"] += 1
            if res.new_keyframes:
                sender.send(res)
            else:
                sender.flush()
        shared["elapsed"] = time.perf_counter() - start
        sender.close(stop)

    def loop_closure() -> None:
        since = 0
        while True:
            items = drain(kf_queue, stop)
            done = items[-1] is END
            results = [r for r in items if r is not END]
            if results:
                since += backend.process(results, latest_only=True)
                if run.loop_delay > 0:
                    time.sleep(run.loop_delay)
                if since >= run.snapshot_every or backend.changed:
                    put_latest(snap_queue, backend.snapshot())
                    since = 0
            if done or stop.is_set():
                backend.finish()
                put_latest(snap_queue, END)
                return

    def reconstruction() -> None:
        while not stop.is_set():
            try:
                snap = snap_queue.get(timeout=0.1)
            except queue.Empty:
                continue
            if snap is END:
                return
            if snap.keyframes:
                with timer("fusion_online"):
                    fusion.update(snap.keyframes, snap.poses, snap.footprints)
                shared["snapshots"] += 1

    stages = [Stage("tracking", tracking, stop), Stage("loop", loop_closure, stop), Stage("recon", reconstruction, stop)]
    for s in stages:
        s.start()
    join_all(stages)

    result = _result("online", spec, tracker, backend, shared["frames"], shared["stamps"], timer)
    result.snapshots = shared["snapshots"]
    result.max_backlog = sender.max_backlog
    result.backlog_overflows = sender.overflows
    result.tracking_fps = shared["frames"] / shared["elapsed"] if shared["elapsed"] > 0 else 0.0
    log.info("online run: %d frames at %.1f fps, %d keyframes, %d loops, %d skipped detections",
             result.n_frames, result.tracking_fps, result.n_keyframes, len(result.loops), len(result.skipped))
    return result


def finalize(result: SlamResult, cfg: PipelineConfig) -> SlamResult:
    """Fuse the coverage keyframes at their final poses, then re-mesh (run.remesh)."""
    poses = {kf.id: result.graph.nodes[kf.id] for kf in result.coverage_keyframes}
    with result.timer("fusion"):
        result.fused = fuse_fast(result.coverage_keyframes, poses, result.spec, cfg.fusion,
                                footprints=result.footprints)
    if cfg.run.remesh:
        with result.timer("remesh"):
            result.mesh = remesh_watertight(result.fused, cfg.remesh)
    return result


def run_slam(frames: Iterable[Frame], spec: SensorSpec, cfg: PipelineConfig) -> SlamResult:
    '''
    run_slam(): offline or online run (cfg.run.mode) followed by fusion and re-meshing

    Parameters:
    frames (iterable of Frame): sequence in frame order
    spec (SensorSpec): sensor geometry (from the .gts header)
    cfg (PipelineConfig): pipeline settings
    '''
    timer = StageTimer()
    runner = run_online if cfg.run.mode == "online" else run_offline
    result = runner(frames, spec, cfg, timer)
    return finalize(result, cfg)


def reconstruct_from_graph(reader: GtsReader, graph: PoseGraph, cfg: PipelineConfig,
                           net: Optional[CalibrationNet] = None) -> tuple[FusedSurface, Optional[WatertightMesh]]:
    '''
    reconstruct_from_graph(): rebuild keyframes from the sequence, recompute the coverage set at the graph poses,
    then fuse and re-mesh

    Parameters:
    reader (GtsReader): the sequence the graph was built from
    graph (PoseGraph): saved pose graph (node ids are frame indices)
    cfg (PipelineConfig): coverage, fusion and re-meshing settings
    net (CalibrationNet, optional): calibration for RGB sequences (Default: None)
    '''
    spec = reader.header.sensor(cfg.sensor)
    reach = graph.reachable()
    ids = sorted(k for k in graph.nodes if k in reach)
    missing = [k for k in ids if k >= len(reader)]
    if missing:
        raise UnreadableInput(f"graph references frames {missing} beyond the sequence ({len(reader)} frames)",
                              path=str(reader.path), reason="frame range")
    cov = CoverageSet(spec, cfg.loop.area_min, cfg.loop.cell_size)
    for frame in frames_from_gts(reader, cfg, net, ids):
        cov.update(Keyframe(frame.id, 0, frame, graph.nodes[frame.id]), graph.nodes[frame.id])
    kfs = list(cov)
    fused = fuse_fast(kfs, {kf.id: graph.nodes[kf.id] for kf in kfs}, spec, cfg.fusion, footprints=cov.footprints())
    mesh = remesh_watertight(fused, cfg.remesh) if cfg.run.remesh else None
    return fused, mesh


# ---------- Outputs ----------

def omitted_frames(result: SlamResult) -> dict[str, list[int]]:
    """Frames left out of the trajectory: no contact, or in a session never joined to the gauge keyframe."""
    no_contact = sorted(set(result.frame_ids) - set(result.anchored))
    unreachable = sorted(set(result.anchored) - set(result.frame_poses))
    return {"no_contact": no_contact, "unreachable": unreachable}


def run_report(result: SlamResult) -> dict:
    rep = result.report
    return {
        "mode": result.mode,
        "frames": result.n_frames,
        "tracked_frames": len(result.frame_poses),
        "omitted_frames": omitted_frames(result),
        "keyframes": result.n_keyframes,
        "sessions": result.n_sessions,
        "coverage": len(result.coverage),
        "loops": {
            "candidates": result.candidates,
            "accepted": len(result.loops),
            "rejected": result.rejected,
            "skipped_keyframes": result.skipped,
        },
        "graph": {
            "iterations": rep.iterations,
            "initial_error": rep.initial_error,
            "final_error": rep.final_error,
            "gnc_rejected_edges": rep.rejected,
            "unreachable_keyframes": rep.unreachable,
        },
        "fused_vertices": len(result.fused) if result.fused is not None else 0,
        "watertight": result.mesh.watertight if result.mesh is not None else None,
        "online": {
            "snapshots": result.snapshots,
            "tracking_fps": round(result.tracking_fps, 3),
            "max_backlog": result.max_backlog,
            "backlog_overflows": result.backlog_overflows,
        },
        "seconds": result.timer.as_dict(),
    }


def write_outputs(result: SlamResult, out_dir: Union[str, Path]) -> dict[str, Path]:
    '''
    write_outputs(): trajectory.txt, graph.txt, fused.ply, mesh.ply (when re-meshed) and run_report.json
    '''
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trajectory": write_trajectory(out / "trajectory.txt", result.frame_poses, result.timestamps,
                                       comment=f"{result.mode} run, {result.n_keyframes} keyframes, "
                                               f"{result.n_frames - len(result.frame_poses)} frames without a pose"),
        "graph": write_graph(result.graph, out / "graph.txt"),
    }
    if result.fused is not None:
        paths["fused"] = write_mesh(result.fused.mesh, out / "fused.ply")
    if result.mesh is not None:
        paths["mesh"] = write_mesh(result.mesh.mesh, out / "mesh.ply")
    paths["report"] = out / "run_report.json"
    paths["report"].write_text(json.dumps(run_report(result), indent=2))
    return paths
