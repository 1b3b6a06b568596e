'''
Module: features.py
Description: SIFT keypoints on curvature maps

Usage:
- Keypoints: positions (u, v), scales, orientations, unit descriptors
- curvature_to_uint8(): per-frame normalization of the curvature map to 8 bits
- extract_keypoints(): DoG detection + 128-D descriptors restricted to the contact mask
- match_descriptors(): nearest neighbours with the ratio test
'''
# Import packages
from __future__ import annotations
from dataclasses import dataclass, field

import cv2
import numpy as np

from ..surface import CurvatureMap, ContactMask


@dataclass(frozen=True, eq=False)
class Keypoints:
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))          # (u, v) px
    scales: np.ndarray = field(default_factory=lambda: np.zeros(0))
    orientations: np.ndarray = field(default_factory=lambda: np.zeros(0))            # rad
    descriptors: np.ndarray = field(default_factory=lambda: np.zeros((0, 128), dtype=np.float32))

    def __len__(self) -> int:
        return len(self.positions)


def curvature_to_uint8(curv: CurvatureMap, mask: ContactMask) -> np.ndarray:
    """Min/max over the contact region mapped to 0..255; zero image when there is no range."""
    out = np.zeros(curv.shape, dtype=np.uint8)
    if not mask.any():
        return out
    vals = curv[mask]
    lo, hi = float(vals.min()), float(vals.max())
    if hi - lo < 1e-12:
        return out
    scaled = np.clip((curv - lo) / (hi - lo), 0.0, 1.0) * 255.0
    return np.rint(scaled).astype(np.uint8)


def extract_keypoints(curv: CurvatureMap, mask: ContactMask, contrast_threshold: float = 0.01,
                      n_octave_layers: int = 3) -> Keypoints:
    '''
    extract_keypoints(): SIFT on the 8-bit curvature image; keypoints outside the mask are dropped

    Parameters:
    curv (CurvatureMap): curvature map
    mask (ContactMask): contact region
    contrast_threshold (float, optional): DoG contrast threshold (Default: 0.01)
    n_octave_layers (int, optional): scales per octave (Default: 3)

    Dependencies: cv2.SIFT_create
    '''
    img = curvature_to_uint8(curv, mask)
    if not img.any():
        return Keypoints()
    sift = cv2.SIFT_create(nOctaveLayers=n_octave_layers, contrastThreshold=contrast_threshold)
    kps, desc = sift.detectAndCompute(img, mask.astype(np.uint8) * 255)
    if not kps or desc is None:
        return Keypoints()

    pos = np.array([kp.pt for kp in kps], dtype=float)
    H, W = mask.shape
    iu = np.clip(np.rint(pos[:, 0]).astype(int), 0, W - 1)
    iv = np.clip(np.rint(pos[:, 1]).astype(int), 0, H - 1)
    keep = mask[iv, iu]
    desc = desc.astype(np.float32)
    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    desc = desc / np.maximum(norms, 1e-12)
    return Keypoints(pos[keep],
                     np.array([kp.size for kp in kps])[keep],
                     np.radians([kp.angle for kp in kps])[keep],
                     desc[keep])


def match_descriptors(a: Keypoints, b: Keypoints, ratio: float = 0.75) -> np.ndarray:
    '''
    match_descriptors(): (index in a, index in b) pairs passing the ratio test, sorted by index in a

    Dependencies: cv2.BFMatcher
    '''
    if len(a) == 0 or len(b) < 2:
        return np.zeros((0, 2), dtype=int)
    matcher = cv2.BFMatcher(cv2.NORM_L2)
    pairs = []
    for m in matcher.knnMatch(a.descriptors, b.descriptors, k=2):
        if len(m) == 2 and m[0].distance < ratio * m[1].distance:
            pairs.append((m[0].queryIdx, m[0].trainIdx))
    return np.array(sorted(pairs), dtype=int).reshape(-1, 2)
