'''
Module: trajectory.py
Description: Scan trajectories of the simulated sensor over a synthetic object

Usage:
[Types]
- TrajectoryParams: kind, length, speed, press depth, tilt/roll limits, contact breaks
- ScanTrajectory: timestamps, sensor poses (sensor -> object) and in-contact flags

[Generators]
- make_trajectory(): dispatch on TrajectoryParams.kind
- line_directions(), walk_path(), band_directions(), figure8_directions(), spiral_directions()
- contact_pose(): sensor pose pressing depth mm into the surface at a point
'''
# Import packages
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from ..geometry import TransformSE3
from .objects import SyntheticObject

log = logging.getLogger(__name__)

KINDS = ("line", "walk", "band", "figure8", "spiral")


@dataclass(frozen=True)
class TrajectoryParams:
    kind: str = "walk"
    n_frames: int = 300
    frame_rate: float = 25.0          # Hz
    speed: float = 3.0                # mm/s along the surface
    depth: float = 1.0                # mm pressed into the gel
    max_tilt_deg: float = 15.0
    max_roll_deg: float = 15.0
    ou_theta: float = 0.5             # 1/s, mean reversion of the walk velocity
    ou_sigma: float = 2.0             # mm/s/sqrt(s)
    figure8_size: float = 6.0         # mm, lobe half-width
    spiral_pitch: float = 2.5         # mm between spiral turns
    start: tuple[float, float, float] = (0.0, 0.0, 1.0)
    breaks: tuple[tuple[int, int], ...] = ()   # (first frame, n frames) lifted off
    lift: float = 5.0                 # mm above the surface during a break
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown trajectory kind {self.kind!r}; choose from {KINDS}")
        if self.n_frames < 1 or self.frame_rate <= 0 or self.speed < 0 or self.depth <= 0:
            raise ValueError("n_frames, frame_rate and depth must be positive, speed non-negative")


@dataclass(eq=False)
class ScanTrajectory:
    timestamps: np.ndarray
    poses: list[TransformSE3]
    in_contact: np.ndarray
    kind: str = "walk"

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float)
        self.in_contact = np.asarray(self.in_contact, dtype=bool)
        if not (len(self.timestamps) == len(self.poses) == len(self.in_contact)):
            raise ValueError("timestamps, poses and contact flags must have equal length")
        if len(self.timestamps) > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.poses)

    def __iter__(self) -> Iterator[tuple[float, TransformSE3, bool]]:
        return iter(zip(self.timestamps.tolist(), self.poses, self.in_contact.tolist()))

    def is_uniform(self, frame_rate: float, tol: float = 1e-9) -> bool:
        """Timestamps sit on the 1/frame_rate grid."""
        return bool(np.allclose(self.timestamps, np.arange(len(self)) / frame_rate + self.timestamps[0], atol=tol))

    def path_length(self) -> float:
        t = np.array([p.translation for p in self.poses])
        return float(np.linalg.norm(np.diff(t, axis=0), axis=1).sum()) if len(t) > 1 else 0.0


# ---------- Poses ----------

def _tangent_frame(normal: np.ndarray, x_hint: np.ndarray) -> np.ndarray:
    """Columns (x, y, z=normal) with x the hint projected onto the tangent plane."""
    x = x_hint - np.dot(x_hint, normal) * normal
    if np.linalg.norm(x) < 1e-6:
        x = np.cross(normal, [1.0, 0.0, 0.0] if abs(normal[0]) < 0.9 else [0.0, 1.0, 0.0])
    x /= np.linalg.norm(x)
    return np.column_stack([x, np.cross(normal, x), normal])


def contact_pose(point: np.ndarray, normal: np.ndarray, x_hint: np.ndarray, depth: float,
                 tilt: Sequence[float] = (0.0, 0.0), roll: float = 0.0) -> TransformSE3:
    '''
    contact_pose(): sensor pose whose gel plane is pressed depth mm into the surface at point

    Parameters:
    point (array 3): surface point (object frame, mm)
    normal (array 3): outward unit normal there
    x_hint (array 3): preferred sensor x axis (parallel transport of the previous one)
    depth (float): indentation (mm)
    tilt (pair, optional): rotation vector (rad) about the sensor x/y axes (Default: (0, 0))
    roll (float, optional): rotation about the sensor z axis in rad (Default: 0)
    '''
    R = (_tangent_frame(np.asarray(normal, float), np.asarray(x_hint, float))
         @ Rotation.from_rotvec([0.0, 0.0, roll]).as_matrix()
         @ Rotation.from_rotvec([tilt[0], tilt[1], 0.0]).as_matrix())
    return TransformSE3(R, np.asarray(point, float) - depth * R[:, 2])


def _lifted(pose: TransformSE3, depth: float, lift: float) -> TransformSE3:
    return pose @ TransformSE3(np.eye(3), np.array([0.0, 0.0, depth + lift]))


# ---------- Direction paths (unit vectors from the object origin) ----------

def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _exp_at(base: np.ndarray, a: float, b: float) -> np.ndarray:
    """Point on the unit sphere at tangent offset (a, b) rad from base."""
    frame = _tangent_frame(base, np.array([1.0, 0.0, 0.0]))
    r = np.hypot(a, b)
    if r < 1e-15:
        return base.copy()
    return _unit(np.cos(r) * base + np.sin(r) * (a * frame[:, 0] + b * frame[:, 1]) / r)


def band_directions(n: int, step: float, base: np.ndarray) -> np.ndarray:
    '''
    band_directions(): great circle through base, step rad per frame; revisits after 2*pi/step frames
    '''
    frame = _tangent_frame(base, np.array([1.0, 0.0, 0.0]))
    phi = step * np.arange(n)
    return np.cos(phi)[:, None] * base + np.sin(phi)[:, None] * frame[:, 0]


def figure8_directions(n: int, step: float, base: np.ndarray, size: float) -> np.ndarray:
    '''
    figure8_directions(): lemniscate of half-width size (rad) centered on base; crosses itself at base
    '''
    perimeter = 5.244 * size
    s = 2 * np.pi * step * np.arange(n) / max(perimeter, 1e-12)
    den = 1.0 + np.sin(s) ** 2
    a = size * np.cos(s) / den
    b = size * np.sin(s) * np.cos(s) / den
    # start at the crossing point rather than a lobe tip
    a = a - size
    return np.array([_exp_at(base, ai, bi) for ai, bi in zip(a, b)])


def spiral_directions(n: int, step: float, pitch: float, margin: float = 0.15) -> np.ndarray:
    '''
    spiral_directions(): pole-to-pole spiral with pitch rad between turns; may stop before n frames
    '''
    theta, phi = margin, 0.0
    out = []
    slope = pitch / (2 * np.pi)
    while len(out) < n and theta <= np.pi - margin:
        out.append([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
        dphi = step / np.sqrt(slope**2 + np.sin(theta) ** 2)
        phi += dphi
        theta += slope * dphi
    return np.array(out)


def walk_path(n: int, dt: float, radius: float, params: TrajectoryParams,
              rng: np.random.Generator, base: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    walk_path(): Ornstein-Uhlenbeck walk of directions plus bounded tilt and roll

    Returns:
    (directions n x 3, tilts n x 2 rad, rolls n rad)
    '''
    max_tilt = np.radians(params.max_tilt_deg)
    max_roll = np.radians(params.max_roll_deg)
    d = _unit(base)
    vel = np.zeros(3)
    tilt = np.zeros(2)
    roll = 0.0
    dirs, tilts, rolls = [], [], []
    for _ in range(n):
        dirs.append(d.copy())
        tilts.append(tilt.copy())
        rolls.append(roll)
        vel += -params.ou_theta * vel * dt + params.ou_sigma * np.sqrt(dt) * rng.normal(size=3)
        vel -= np.dot(vel, d) * d
        speed = np.linalg.norm(vel)
        if speed > 0:
            # keep the commanded surface speed, let OU steer the heading
            vel *= params.speed / speed
        d = _unit(d + vel * dt / radius)
        tilt = np.clip(tilt + 0.2 * max_tilt * np.sqrt(dt) * rng.normal(size=2) - params.ou_theta * tilt * dt,
                       -max_tilt, max_tilt)
        roll = float(np.clip(roll + 0.2 * max_roll * np.sqrt(dt) * rng.normal() - params.ou_theta * roll * dt,
                             -max_roll, max_roll))
    return np.array(dirs), np.array(tilts), np.array(rolls)


# ---------- Trajectories ----------

def _break_flags(n: int, breaks: Sequence[tuple[int, int]]) -> np.ndarray:
    flags = np.ones(n, dtype=bool)
    for first, count in breaks:
        flags[max(first, 0):max(first + count, 0)] = False
    return flags


def make_trajectory(obj: SyntheticObject, params: TrajectoryParams = TrajectoryParams()) -> ScanTrajectory:
    '''
    make_trajectory(): sample a scan trajectory over obj

    Parameters:
    obj (SyntheticObject): object to scan (star-shaped about its origin)
    params (TrajectoryParams, optional): kind and motion statistics (Default: TrajectoryParams())
    '''
    n = params.n_frames
    dt = 1.0 / params.frame_rate
    step_mm = params.speed * dt
    radius = obj.bounding_radius()
    base = _unit(np.asarray(params.start, dtype=float))
    rng = np.random.default_rng(params.seed)
    tilts = np.zeros((n, 2))
    rolls = np.zeros(n)

    if params.kind == "line":
        p, nu = obj.surface_point(base)
        start = contact_pose(p, nu, np.array([1.0, 0.0, 0.0]), params.depth)
        poses = [start @ TransformSE3(np.eye(3), np.array([k * step_mm, 0.0, 0.0])) for k in range(n)]
    else:
        if params.kind == "walk":
            dirs, tilts, rolls = walk_path(n, dt, radius, params, rng, base)
        elif params.kind == "band":
            dirs = band_directions(n, step_mm / radius, base)
        elif params.kind == "figure8":
            dirs = figure8_directions(n, step_mm / radius, base, params.figure8_size / radius)
        else:
            dirs = spiral_directions(n, step_mm / radius, params.spiral_pitch / radius)
            tilts, rolls = tilts[:len(dirs)], rolls[:len(dirs)]
        poses = []
        x_hint = np.array([1.0, 0.0, 0.0])
        for d, tilt, roll in zip(dirs, tilts, rolls):
            p, nu = obj.surface_point(d)
            poses.append(contact_pose(p, nu, x_hint, params.depth, tilt, roll))
            # transport the roll/tilt-free axis so neither accumulates
            x_hint = _tangent_frame(nu, x_hint)[:, 0]

    m = len(poses)
    contact = _break_flags(m, params.breaks)
    poses = [pose if c else _lifted(pose, params.depth, params.lift) for pose, c in zip(poses, contact)]
    if m < n:
        log.info("%s trajectory ended after %d of %d frames", params.kind, m, n)
    return ScanTrajectory(np.arange(m) / params.frame_rate, poses, contact, params.kind)
