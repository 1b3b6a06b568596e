'''
src/tacslam/loop/
├── __init__.py             Initializer
├── coverage.py             coverage set (greedy add / prune over surface cells)
├── features.py             SIFT keypoints on curvature maps, ratio-test matching
└── detector.py             two-stage loop detection (SIFT + RANSAC, then NormalFlow)
'''
from .coverage import CoverageSet, coverage_update, cell_keys
from .features import Keypoints, extract_keypoints, curvature_to_uint8, match_descriptors
from .detector import (LoopParams, LoopCandidate, LoopConstraint, LoopStats, LoopDetector,
                       ransac_rigid2d, match_and_verify, lift_rigid2d, refine_loop, process_keyframe)

__all__ = [
    "CoverageSet", "coverage_update", "cell_keys",
    "Keypoints", "extract_keypoints", "curvature_to_uint8", "match_descriptors",
    "LoopParams", "LoopCandidate", "LoopConstraint", "LoopStats", "LoopDetector",
    "ransac_rigid2d", "match_and_verify", "lift_rigid2d", "refine_loop", "process_keyframe",
]
