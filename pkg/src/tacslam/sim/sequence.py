'''
Module: sequence.py
Description: Render a scan trajectory into a tactile frame stream with ground truth

Usage:
[Rendering]
- render_sequence(): per-frame renders, each with its own seed-derived noise stream
- frame_from_rgb(): RGB -> normals (calibration net or ideal inverse) -> Frame

[Sequences]
- synthesize_sequence(): frames + ground-truth poses normalized to the first frame
- ground_truth_poses(): T_0^-1 T_i for every trajectory pose
- ground_truth_mesh(): object mesh expressed in the first sensor frame
'''
# Import packages
from __future__ import annotations
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
import trimesh

from ..geometry import TransformSE3
from ..surface import Frame, SensorSpec, SurfaceParams, frame_from_normals
from .calibration import CalibrationNet
from .objects import SyntheticObject
from .photometric import PhotometricModel
from .render import RenderParams, RenderResult, render_frame
from .trajectory import ScanTrajectory

log = logging.getLogger(__name__)


def frame_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def render_sequence(obj: SyntheticObject, traj: ScanTrajectory, spec: SensorSpec,
                    params: RenderParams = RenderParams(), seed: int = 0,
                    model: PhotometricModel = PhotometricModel(), workers: int = 1) -> list[RenderResult]:
    '''
    render_sequence(): render every trajectory pose; results are independent of workers

    Parameters:
    obj (SyntheticObject): scanned object
    traj (ScanTrajectory): sensor poses
    spec (SensorSpec): sensor geometry
    params (RenderParams, optional): renderer settings (Default: RenderParams())
    seed (int, optional): base of the per-frame noise streams (Default: 0)
    model (PhotometricModel, optional): illumination (Default: PhotometricModel())
    workers (int, optional): render threads (Default: 1)

    Dependencies: concurrent.futures.ThreadPoolExecutor
    '''
    obj.validate(spec)

    def _one(i: int) -> RenderResult:
        return render_frame(obj, traj.poses[i], spec, params, frame_rng(seed, i), model)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_one, range(len(traj))))
    return [_one(i) for i in range(len(traj))]


def rgb_delta(rgb: np.ndarray, model: PhotometricModel = PhotometricModel()) -> np.ndarray:
    """Summed absolute intensity change against the no-contact image."""
    return np.abs(np.asarray(rgb, dtype=float) - model.flat_image(rgb.shape[:2])).sum(axis=-1)


def frame_from_rgb(id: int, timestamp: float, rgb: np.ndarray, spec: SensorSpec,
                   net: Optional[CalibrationNet] = None, surface: SurfaceParams = SurfaceParams(),
                   model: PhotometricModel = PhotometricModel()) -> Frame:
    '''
    frame_from_rgb(): photometric path; the net predicts gradients, otherwise the ideal inverse is used
    '''
    normals = net.predict_normals(rgb, spec) if net is not None else model.invert(rgb)
    return frame_from_normals(id, timestamp, normals, rgb_delta(rgb, model), surface)


def ground_truth_poses(traj: ScanTrajectory) -> list[TransformSE3]:
    if len(traj) == 0:
        return []
    ref = traj.poses[0].inverse()
    return [TransformSE3.identity()] + [ref @ p for p in traj.poses[1:]]


def ground_truth_mesh(obj: SyntheticObject, traj: ScanTrajectory, resolution: float = 0.12) -> trimesh.Trimesh:
    mesh = obj.to_mesh(resolution)
    mesh.apply_transform(traj.poses[0].inverse().as_matrix())
    return mesh


def synthesize_sequence(obj: SyntheticObject, traj: ScanTrajectory, spec: SensorSpec,
                        use_photometric: bool = False, net: Optional[CalibrationNet] = None,
                        surface: SurfaceParams = SurfaceParams(), params: RenderParams = RenderParams(),
                        seed: int = 0, model: PhotometricModel = PhotometricModel(),
                        workers: int = 1) -> tuple[list[Frame], list[TransformSE3]]:
    '''
    synthesize_sequence(): frame stream and ground-truth poses (pose 0 = identity)

    Parameters:
    obj (SyntheticObject): scanned object
    traj (ScanTrajectory): sensor trajectory
    spec (SensorSpec): sensor geometry
    use_photometric (bool, optional): derive normals from rendered RGB (Default: False)
    net (CalibrationNet, optional): calibration used on the photometric path (Default: ideal inverse)
    surface (SurfaceParams, optional): map derivation settings (Default: SurfaceParams())
    params (RenderParams, optional): renderer settings (Default: RenderParams())
    seed (int, optional): noise seed (Default: 0)
    model (PhotometricModel, optional): illumination (Default: PhotometricModel())
    workers (int, optional): render threads (Default: 1)
    '''
    renders = render_sequence(obj, traj, spec, params, seed, model, workers)
    frames = []
    for i, (t, res) in enumerate(zip(traj.timestamps.tolist(), renders)):
        if use_photometric:
            frames.append(frame_from_rgb(i, t, res.rgb, spec, net, surface, model))
        else:
            frames.append(frame_from_normals(i, t, res.normal, None, surface))
    log.info("synthesized %d frames (%d in contact)", len(frames), sum(not f.is_empty() for f in frames))
    return frames, ground_truth_poses(traj)
