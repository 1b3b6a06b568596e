'''
src/tacslam/tracking/
├── __init__.py             Initializer
├── normalflow.py           NormalFlow registration, shared region, CCS/SCR
└── tracker.py              keyframe sessions (Tracked | NewKeyframe | TrackingLost)
'''
from .normalflow import (EmptyOverlap, NormalFlowResult, normalflow, compute_ccs, compute_scr,
                         shared_region, bilinear_sample, residual_and_jacobian, curvature_order)
from .tracker import (FailureThresholds, TrackingParams, TrackEvent, Keyframe, KeyframeConstraint,
                      TrackResult, TrackerState, Tracker, track_frame)

__all__ = [
    "EmptyOverlap", "NormalFlowResult", "normalflow", "compute_ccs", "compute_scr",
    "shared_region", "bilinear_sample", "residual_and_jacobian", "curvature_order",
    "FailureThresholds", "TrackingParams", "TrackEvent", "Keyframe", "KeyframeConstraint",
    "TrackResult", "TrackerState", "Tracker", "track_frame",
]
