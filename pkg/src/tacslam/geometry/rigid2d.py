'''
Module: rigid2d.py
Description: Planar rigid transforms in pixel coordinates and their least-squares fit

Usage:
- Rigid2D: angle + translation; apply(), inverse(), compose()
- rigid2d_fit(): weighted Kabsch fit of dst ~ R src + t
- rigid2d_residuals(): per-point distances after applying a fit
- DegenerateFit: source points do not constrain the fit
'''
from __future__ import annotations
from dataclasses import dataclass, field

import numpy as np

from ..errors import TacSlamError


class DegenerateFit(TacSlamError):
    """Raised when the source points do not constrain a rigid fit."""


@dataclass(frozen=True, eq=False)
class Rigid2D:
    """x' = R(angle) x + translation, pixel coordinates (u, v)."""
    angle: float = 0.0
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(2))

    @property
    def rotation(self) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> "Rigid2D":
        return Rigid2D(-self.angle, -(self.rotation.T @ self.translation))

    def compose(self, other: "Rigid2D") -> "Rigid2D":
        return Rigid2D(self.angle + other.angle, self.rotation @ other.translation + self.translation)


def rigid2d_fit(src: np.ndarray, dst: np.ndarray, weights: np.ndarray | None = None) -> Rigid2D:
    """
    rigid2d_fit(): least-squares rotation + translation (scale fixed to 1) mapping src onto dst

    Parameters:
    src (array N x 2): source points (px)
    dst (array N x 2): destination points (px)
    weights (array N, optional): non-negative per-pair weights (Default: uniform)
    """
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    if len(src) != len(dst):
        raise ValueError(f"point count mismatch: {len(src)} vs {len(dst)}")
    if len(src) < 2:
        raise DegenerateFit("need at least two point pairs", n=len(src))
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()

    cs = w @ src
    cd = w @ dst
    a = src - cs
    b = dst - cd
    if np.max(np.abs(a)) < 1e-12:
        raise DegenerateFit("all source points coincide", n=len(src))

    # Procrustes in 2D reduces to one angle
    num = np.sum(w * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))
    den = np.sum(w * (a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]))
    angle = np.arctan2(num, den)
    c, s = np.cos(angle), np.sin(angle)
    R = np.array([[c, -s], [s, c]])
    return Rigid2D(angle, cd - R @ cs)


def rigid2d_residuals(T: Rigid2D, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Per-pair Euclidean residual |T(src) - dst| in pixels."""
    return np.linalg.norm(T.apply(src) - np.asarray(dst, dtype=float), axis=1)
