'''
Module: tracker.py
Description: Keyframe-based tracking sessions on top of NormalFlow

Usage:
[Parameters]
- FailureThresholds: CCS/SCR acceptance; 'tracking' and 'reconstruction' profiles
- TrackingParams: NormalFlow budget/pixels + thresholds

[State]
- Keyframe: frame promoted to the sparse keyframe set, with its session pose
- KeyframeConstraint: NormalFlow estimate between consecutive keyframes
- TrackerState: keyframes, sessions, per-frame anchors and constraints

[Tracking]
- track_frame(): one step of the state machine (Tracked | NewKeyframe | TrackingLost)
- Tracker: convenience wrapper holding state, spec and params
'''
# Import packages
from __future__ import annotations
import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

from ..geometry import TransformSE3
from ..surface import Frame, SensorSpec
from .normalflow import K_PIXELS, MIN_PIXELS, NormalFlowResult, normalflow

log = logging.getLogger(__name__)

PROFILES = {
    "tracking": (0.85, 0.3),
    "reconstruction": (0.7, 0.3),
}


@dataclass(frozen=True)
class FailureThresholds:
    ccs_min: float = 0.85
    scr_min: float = 0.3

    def __post_init__(self):
        if not (0.0 < self.ccs_min < 1.0 and 0.0 < self.scr_min < 1.0):
            raise ValueError(f"thresholds must lie in (0, 1), got ccs {self.ccs_min}, scr {self.scr_min}")

    @classmethod
    def profile(cls, name: str) -> "FailureThresholds":
        if name not in PROFILES:
            raise ValueError(f"unknown threshold profile {name!r}; choose from {sorted(PROFILES)}")
        return cls(*PROFILES[name])

    def accepts(self, result: NormalFlowResult) -> bool:
        return result.ccs >= self.ccs_min and result.scr >= self.scr_min


@dataclass(frozen=True)
class TrackingParams:
    k_pixels: int = K_PIXELS
    max_iterations: int = 50
    tolerance: float = 1e-6
    min_pixels: int = MIN_PIXELS
    profile: str = "reconstruction"
    ccs_min: Optional[float] = None
    scr_min: Optional[float] = None

    @property
    def thresholds(self) -> FailureThresholds:
        base = FailureThresholds.profile(self.profile)
        return FailureThresholds(self.ccs_min if self.ccs_min is not None else base.ccs_min,
                                 self.scr_min if self.scr_min is not None else base.scr_min)


class TrackEvent(enum.Enum):
    TRACKED = "tracked"
    NEW_KEYFRAME = "new_keyframe"
    TRACKING_LOST = "tracking_lost"


@dataclass(frozen=True, eq=False)
class Keyframe:
    id: int
    session: int
    frame: Frame
    pose: TransformSE3          # session-relative, first keyframe = identity


@dataclass(frozen=True, eq=False)
class KeyframeConstraint:
    i: int                      # earlier keyframe
    j: int                      # promoted keyframe
    transform: TransformSE3     # jT_i
    source: str = "tracking"


@dataclass(frozen=True, eq=False)
class TrackResult:
    frame_id: int
    event: Optional[TrackEvent]                 # None while idle between sessions
    pose: Optional[TransformSE3] = None         # session-relative pose of the frame
    new_keyframes: tuple[Keyframe, ...] = ()
    constraints: tuple[KeyframeConstraint, ...] = ()
    registration: Optional[NormalFlowResult] = None


@dataclass
class TrackerState:
    keyframes: list[int] = field(default_factory=list)
    session: int = -1
    keyframe: Optional[Keyframe] = None          # latest keyframe of the active session
    active: bool = False
    prev_frame: Optional[Frame] = None
    prev_rel: TransformSE3 = field(default_factory=TransformSE3.identity)   # (t-1)T_k
    prev_pose: TransformSE3 = field(default_factory=TransformSE3.identity)
    constraints: list[KeyframeConstraint] = field(default_factory=list)
    anchors: dict[int, tuple[int, TransformSE3]] = field(default_factory=dict)  # frame -> (keyframe, fT_k)
    keyframe_poses: dict[int, TransformSE3] = field(default_factory=dict)
    sessions: dict[int, int] = field(default_factory=dict)                      # keyframe -> session
    lost_events: int = 0

    def frame_pose(self, frame_id: int, keyframe_poses: Optional[dict[int, TransformSE3]] = None) -> TransformSE3:
        """T_f = T_k (fT_k)^-1, optionally with re-optimized keyframe poses."""
        k, rel = self.anchors[frame_id]
        poses = self.keyframe_poses if keyframe_poses is None else keyframe_poses
        return poses[k] @ rel.inverse()


def _register(kf: Keyframe, frame: Frame, init: TransformSE3, spec: SensorSpec,
              params: TrackingParams) -> NormalFlowResult:
    return normalflow(kf.frame, frame, init, spec, budget=params.max_iterations,
                      k_pixels=params.k_pixels, tol=params.tolerance, min_pixels=params.min_pixels)


def _add_keyframe(state: TrackerState, frame: Frame, pose: TransformSE3) -> Keyframe:
    kf = Keyframe(frame.id, state.session, frame, pose)
    state.keyframes.append(frame.id)
    state.keyframe = kf
    state.keyframe_poses[frame.id] = pose
    state.sessions[frame.id] = state.session
    state.anchors[frame.id] = (frame.id, TransformSE3.identity())
    return kf


def _promote_previous(state: TrackerState) -> tuple[Keyframe, KeyframeConstraint]:
    prev, old = state.prev_frame, state.keyframe
    c = KeyframeConstraint(old.id, prev.id, state.prev_rel)
    kf = _add_keyframe(state, prev, state.prev_pose)
    state.constraints.append(c)
    state.prev_rel = TransformSE3.identity()
    log.info("keyframe %d promoted (session %d)", prev.id, state.session)
    return kf, c


def _start_session(state: TrackerState, frame: Frame) -> Keyframe:
    state.session += 1
    state.active = True
    kf = _add_keyframe(state, frame, TransformSE3.identity())
    state.prev_frame, state.prev_rel, state.prev_pose = frame, TransformSE3.identity(), TransformSE3.identity()
    log.info("session %d started at frame %d", state.session, frame.id)
    return kf


def track_frame(state: TrackerState, frame: Frame, thresholds: FailureThresholds, spec: SensorSpec,
                params: TrackingParams = TrackingParams()) -> tuple[TrackerState, TrackResult]:
    '''
    track_frame(): register frame against the latest keyframe; promote t-1 or open a new session on failure

    Parameters:
    state (TrackerState): tracker state, updated in place and returned
    frame (Frame): next frame in time order
    thresholds (FailureThresholds): CCS/SCR acceptance
    spec (SensorSpec): sensor geometry
    params (TrackingParams, optional): NormalFlow settings (Default: TrackingParams())
    '''
    if state.prev_frame is not None and frame.id <= state.prev_frame.id:
        raise ValueError(f"frame {frame.id} must come after frame {state.prev_frame.id}")

    if frame.is_empty():
        if not state.active:
            state.prev_frame = frame
            return state, TrackResult(frame.id, None)
        new_kfs, cons = [], []
        if state.prev_frame.id != state.keyframe.id:
            kf, c = _promote_previous(state)
            new_kfs.append(kf)
            cons.append(c)
        state.active = False
        state.prev_frame = frame
        state.lost_events += 1
        log.warning("tracking lost at frame %d (no contact)", frame.id)
        return state, TrackResult(frame.id, TrackEvent.TRACKING_LOST, None, tuple(new_kfs), tuple(cons))

    if not state.active:
        kf = _start_session(state, frame)
        return state, TrackResult(frame.id, TrackEvent.NEW_KEYFRAME, kf.pose, (kf,))

    res = _register(state.keyframe, frame, state.prev_rel, spec, params)
    new_kfs, cons = [], []
    event = TrackEvent.TRACKED
    if not thresholds.accepts(res) and state.prev_frame.id != state.keyframe.id:
        kf, c = _promote_previous(state)
        new_kfs.append(kf)
        cons.append(c)
        event = TrackEvent.NEW_KEYFRAME
        res = _register(state.keyframe, frame, TransformSE3.identity(), spec, params)

    if not thresholds.accepts(res):
        log.warning("tracking lost at frame %d (ccs %.3f, scr %.3f)", frame.id, res.ccs, res.scr)
        state.lost_events += 1
        kf = _start_session(state, frame)
        new_kfs.append(kf)
        return state, TrackResult(frame.id, TrackEvent.TRACKING_LOST, kf.pose, tuple(new_kfs), tuple(cons), res)

    k = state.keyframe
    pose = k.pose @ res.transform.inverse()
    state.anchors[frame.id] = (k.id, res.transform)
    state.prev_frame, state.prev_rel, state.prev_pose = frame, res.transform, pose
    log.debug("frame %d tracked against keyframe %d (ccs %.3f, scr %.3f, %d it)",
              frame.id, k.id, res.ccs, res.scr, res.iterations)
    return state, TrackResult(frame.id, event, pose, tuple(new_kfs), tuple(cons), res)


class Tracker:
    """Stateful front end: feed frames in order, collect TrackResults."""

    def __init__(self, spec: SensorSpec, params: TrackingParams = TrackingParams()):
        self.spec = spec
        self.params = params
        self.thresholds = params.thresholds
        self.state = TrackerState()

    def track(self, frame: Frame) -> TrackResult:
        self.state, result = track_frame(self.state, frame, self.thresholds, self.spec, self.params)
        return result

    def session_poses(self) -> dict[int, TransformSE3]:
        """Session-relative pose of every tracked frame."""
        return {f: self.state.frame_pose(f) for f in sorted(self.state.anchors)}

    @property
    def n_sessions(self) -> int:
        return self.state.session + 1
