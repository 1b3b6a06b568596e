'''
Module: detector.py
Description: Two-stage loop detection between a new keyframe and the coverage set

Usage:
[Parameters / types]
- LoopParams: coverage, matching and RANSAC settings
- LoopCandidate: stage-1 result (inlier matches + Rigid2D, new -> coverage pixels)
- LoopConstraint: accepted 6-DOF loop (i = new keyframe, j = coverage keyframe, jT_i)

[Stage 1]
- ransac_rigid2d(): seeded two-point RANSAC over planar rigid transforms
- match_and_verify(): SIFT matches on curvature + RANSAC; candidate iff inliers > inlier_min

[Stage 2]
- lift_rigid2d(): pixel-space Rigid2D -> SE(3) NormalFlow initialization
- refine_loop(): NormalFlow from the lifted init; accepted iff CCS/SCR pass

[Driver]
- process_keyframe(): both stages against every coverage member
- LoopDetector: keypoint cache + counters used by the pipeline
'''
# Import packages
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from ..geometry import DegenerateFit, Rigid2D, TransformSE3, rigid2d_fit, rigid2d_residuals
from ..surface import Frame, SensorSpec
from ..tracking import FailureThresholds, Keyframe, TrackingParams, normalflow
from .coverage import CoverageSet
from .features import Keypoints, extract_keypoints, match_descriptors

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoopParams:
    enabled: bool = True
    area_min: float = 0.2             # mm^2
    cell_size: float = 0.25           # mm
    ratio: float = 0.75
    ransac_iterations: int = 500
    ransac_threshold: float = 3.0     # px
    inlier_min: int = 8               # candidates need strictly more
    contrast_threshold: float = 0.01
    n_octave_layers: int = 3
    seed: int = 0
    exclude_previous: bool = True


@dataclass(frozen=True, eq=False)
class LoopCandidate:
    new_id: int
    cov_id: int
    matches: np.ndarray       # inlier (new index, coverage index) pairs
    rigid: Rigid2D            # new pixels -> coverage pixels

    @property
    def n_inliers(self) -> int:
        return len(self.matches)


@dataclass(frozen=True, eq=False)
class LoopConstraint:
    i: int                    # new keyframe
    j: int                    # coverage keyframe
    transform: TransformSE3   # jT_i
    ccs: float
    scr: float
    source: str = "loop"


# Stage 1
def ransac_rigid2d(src: np.ndarray, dst: np.ndarray, iterations: int = 500, threshold: float = 3.0,
                   seed: int = 0) -> tuple[Optional[Rigid2D], np.ndarray]:
    '''
    ransac_rigid2d(): best-consensus Rigid2D (src -> dst) refit on its inliers

    Parameters:
    src (array N x 2): source points
    dst (array N x 2): destination points
    iterations (int, optional): hypotheses (Default: 500)
    threshold (float, optional): inlier radius in px (Default: 3.0)
    seed (int, optional): sampling seed (Default: 0)
    '''
    n = len(src)
    best = np.zeros(n, dtype=bool)
    if n < 2:
        return None, best
    rng = np.random.default_rng(seed)
    for _ in range(iterations):
        pick = rng.choice(n, size=2, replace=False)
        try:
            T = rigid2d_fit(src[pick], dst[pick])
        except DegenerateFit:
            continue
        inl = rigid2d_residuals(T, src, dst) < threshold
        if inl.sum() > best.sum():
            best = inl
    if best.sum() < 2:
        return None, best
    T = rigid2d_fit(src[best], dst[best])
    refined = rigid2d_residuals(T, src, dst) < threshold
    if refined.sum() >= best.sum():
        best = refined
        T = rigid2d_fit(src[best], dst[best])
    return T, best


def keypoints_for(frame: Frame, params: LoopParams, cache: Optional[dict[int, Keypoints]] = None) -> Keypoints:
    if cache is not None and frame.id in cache:
        return cache[frame.id]
    kp = extract_keypoints(frame.curvature, frame.mask, params.contrast_threshold, params.n_octave_layers)
    if cache is not None:
        cache[frame.id] = kp
    return kp


def match_and_verify(new_kf: Frame, cov_kf: Frame, params: LoopParams = LoopParams(),
                     cache: Optional[dict[int, Keypoints]] = None) -> Optional[LoopCandidate]:
    '''
    match_and_verify(): ratio-test SIFT matches + RANSAC; None when inliers <= inlier_min

    Parameters:
    new_kf (Frame): new keyframe
    cov_kf (Frame): coverage keyframe
    params (LoopParams, optional): matching settings (Default: LoopParams())
    cache (dict, optional): frame id -> Keypoints (Default: None)
    '''
    a = keypoints_for(new_kf, params, cache)
    b = keypoints_for(cov_kf, params, cache)
    pairs = match_descriptors(a, b, params.ratio)
    if len(pairs) <= params.inlier_min:
        return None
    src = a.positions[pairs[:, 0]]
    dst = b.positions[pairs[:, 1]]
    T, inl = ransac_rigid2d(src, dst, params.ransac_iterations, params.ransac_threshold, params.seed)
    if T is None or inl.sum() <= params.inlier_min:
        return None
    return LoopCandidate(new_kf.id, cov_kf.id, pairs[inl], T)


# Stage 2
def lift_rigid2d(T: Rigid2D, spec: SensorSpec) -> TransformSE3:
    '''
    lift_rigid2d(): in-plane rotation + pitch-scaled translation about the image center, zero tilt/height
    '''
    c = np.array(spec.center)
    R = np.eye(3)
    R[:2, :2] = T.rotation
    t = np.zeros(3)
    t[:2] = spec.pitch * (T.rotation @ c + T.translation - c)
    return TransformSE3(R, t)


def refine_loop(candidate: LoopCandidate, new_kf: Frame, cov_kf: Frame, spec: SensorSpec,
                thresholds: FailureThresholds, params: TrackingParams = TrackingParams()) -> Optional[LoopConstraint]:
    '''
    refine_loop(): NormalFlow (new -> coverage) from the lifted candidate; None unless CCS and SCR pass
    '''
    res = normalflow(new_kf, cov_kf, lift_rigid2d(candidate.rigid, spec), spec, budget=params.max_iterations,
                     k_pixels=params.k_pixels, tol=params.tolerance, min_pixels=params.min_pixels)
    if not thresholds.accepts(res):
        log.debug("loop %d -> %d rejected (ccs %.3f, scr %.3f)", candidate.new_id, candidate.cov_id, res.ccs, res.scr)
        return None
    return LoopConstraint(candidate.new_id, candidate.cov_id, res.transform, res.ccs, res.scr)


# Driver
@dataclass
class LoopStats:
    detections: int = 0
    candidates: int = 0
    accepted: int = 0
    rejected: int = 0
    skipped: list[int] = field(default_factory=list)


def process_keyframe(new_kf: Keyframe, cov: CoverageSet, thresholds: FailureThresholds, spec: SensorSpec,
                     params: LoopParams = LoopParams(), tracking: TrackingParams = TrackingParams(),
                     exclude: Iterable[int] = (), cache: Optional[dict[int, Keypoints]] = None,
                     stats: Optional[LoopStats] = None) -> list[LoopConstraint]:
    '''
    process_keyframe(): match new_kf against every coverage member, refine candidates by inlier count

    Parameters:
    new_kf (Keyframe): keyframe to close loops from
    cov (CoverageSet): coverage set (new_kf itself is skipped if present)
    thresholds (FailureThresholds): CCS/SCR acceptance
    spec (SensorSpec): sensor geometry
    params (LoopParams, optional): matching settings (Default: LoopParams())
    tracking (TrackingParams, optional): NormalFlow settings (Default: TrackingParams())
    exclude (iterable, optional): keyframe ids never used as partners (Default: ())
    cache (dict, optional): keypoint cache (Default: None)
    stats (LoopStats, optional): counters to update (Default: None)
    '''
    stats = stats if stats is not None else LoopStats()
    stats.detections += 1
    skip = set(exclude) | {new_kf.id}
    candidates = []
    for member in cov:
        if member.id in skip:
            continue
        cand = match_and_verify(new_kf.frame, member.frame, params, cache)
        if cand is not None:
            log.debug("loop candidate %d -> %d (%d inliers)", cand.new_id, cand.cov_id, cand.n_inliers)
            candidates.append((cand, member))
    candidates.sort(key=lambda cm: -cm[0].n_inliers)
    stats.candidates += len(candidates)

    accepted = []
    for cand, member in candidates:
        loop = refine_loop(cand, new_kf.frame, member.frame, spec, thresholds, tracking)
        if loop is None:
            stats.rejected += 1
            continue
        log.info("loop accepted %d -> %d (ccs %.3f, scr %.3f)", loop.i, loop.j, loop.ccs, loop.scr)
        accepted.append(loop)
    stats.accepted += len(accepted)
    return accepted


class LoopDetector:
    """Coverage set + keypoint cache + counters for one SLAM run."""

    def __init__(self, spec: SensorSpec, thresholds: FailureThresholds, params: LoopParams = LoopParams(),
                 tracking: TrackingParams = TrackingParams()):
        self.spec = spec
        self.thresholds = thresholds
        self.params = params
        self.tracking = tracking
        self.coverage = CoverageSet(spec, params.area_min, params.cell_size)
        self.cache: dict[int, Keypoints] = {}
        self.stats = LoopStats()

    def detect(self, kf: Keyframe, previous: Optional[int] = None) -> list[LoopConstraint]:
        exclude = [previous] if (previous is not None and self.params.exclude_previous) else []
        return process_keyframe(kf, self.coverage, self.thresholds, self.spec, self.params,
                                self.tracking, exclude, self.cache, self.stats)

    def skip(self, kf_id: int) -> None:
        self.stats.skipped.append(kf_id)
        log.info("loop detection skipped for intermediate keyframe %d", kf_id)

    def add_to_coverage(self, kf: Keyframe, pose: TransformSE3) -> bool:
        added = self.coverage.update(kf, pose)
        for gone in [k for k in self.cache if k not in self.coverage and k != kf.id]:
            del self.cache[gone]
        return added
