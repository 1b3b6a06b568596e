'''
Module: se3.py
Description: SE(3)/so(3) algebra on 3x3 rotation matrices (lengths in mm)

Usage:
[Types]
- TransformSE3: rigid transform, rotation (3x3) + translation (mm)
- Twist6: 6D tangent vector (omega rad, v mm)

[so(3)]
- hat(): 3-vector -> skew-symmetric matrix
- vee(): skew-symmetric matrix -> 3-vector
- so3_exp(): Rodrigues rotation
- so3_log(): rotation -> axis-angle vector

[se(3)]
- se3_exp(): twist -> transform
- se3_log(): transform -> twist
- adjoint(): 6x6 adjoint of a transform
- ad(): 6x6 adjoint of a twist
- jr_inv(), jl_inv(): second order inverse right/left Jacobians
'''
# Import packages
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np
from scipy.spatial.transform import Rotation

from ..errors import TacSlamError

_SMALL = 1e-8
PI_MARGIN = 1e-6


class AngleNearPi(TacSlamError):
    """Raised when a rotation is too close to pi for a unique logarithm."""


# ---------- Types ----------

@dataclass(frozen=True, eq=False)
class Twist6:
    """6D twist: rotational part omega (rad), translational part v (mm)."""
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.v])

    @classmethod
    def from_vector(cls, xi: Iterable[float]) -> "Twist6":
        xi = np.asarray(xi, dtype=float).reshape(6)
        return cls(xi[:3], xi[3:])

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


TwistLike = Union[Twist6, np.ndarray, Iterable[float]]


def _as_vector(xi: TwistLike) -> np.ndarray:
    if isinstance(xi, Twist6):
        return xi.vector
    return np.asarray(xi, dtype=float).reshape(6)


@dataclass(frozen=True, eq=False)
class TransformSE3:
    """Rigid transform p' = R p + t with t in millimeters.

    Poses T_i map sensor-frame points into the object frame; relative
    estimates jT_i map points of frame i into frame j.
    """
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    # constructors
    @classmethod
    def identity(cls) -> "TransformSE3":
        return cls()

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "TransformSE3":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3], m[:3, 3])

    @classmethod
    def from_quaternion(cls, translation: Iterable[float], quat_xyzw: Iterable[float]) -> "TransformSE3":
        quat = np.asarray(quat_xyzw, dtype=float)
        return cls(Rotation.from_quat(quat).as_matrix(), translation)

    @classmethod
    def from_rotvec(cls, rotvec: Iterable[float], translation: Iterable[float] = (0.0, 0.0, 0.0)) -> "TransformSE3":
        return cls(so3_exp(np.asarray(rotvec, dtype=float)), translation)

    # algebra
    def compose(self, other: "TransformSE3") -> "TransformSE3":
        return TransformSE3(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "TransformSE3") -> "TransformSE3":
        return self.compose(other)

    def inverse(self) -> "TransformSE3":
        rt = self.rotation.T
        return TransformSE3(rt, -rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points (..., 3)."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def rotate(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    # views
    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def as_quaternion(self) -> np.ndarray:
        """Unit quaternion (x, y, z, w) with w >= 0."""
        q = Rotation.from_matrix(self.rotation).as_quat()
        return -q if q[3] < 0 else q

    def angle(self) -> float:
        """Rotation angle in radians."""
        return float(np.linalg.norm(so3_log(self.rotation, check=False)))

    def is_valid(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        return bool(np.all(np.abs(r.T @ r - np.eye(3)) < tol) and abs(np.linalg.det(r) - 1.0) < tol
                    and np.all(np.isfinite(self.translation)))

    def allclose(self, other: "TransformSE3", rot_tol: float = 1e-9, trans_tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.rotation, other.rotation, rtol=0.0, atol=rot_tol)
                    and np.allclose(self.translation, other.translation, rtol=0.0, atol=trans_tol))

    def __repr__(self) -> str:
        rv = so3_log(self.rotation, check=False)
        return f"TransformSE3(rotvec={np.round(rv, 6).tolist()}, t={np.round(self.translation, 6).tolist()})"


def pose_difference(a: TransformSE3, b: TransformSE3) -> tuple[float, float]:
    """Rotation (deg) and translation (mm) distance between two transforms."""
    d = a.inverse() @ b
    return float(np.degrees(d.angle())), float(np.linalg.norm(a.translation - b.translation))


# ---------- so(3) ----------

def hat(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.array([[0.0, -w[2], w[1]],
                     [w[2], 0.0, -w[0]],
                     [-w[1], w[0], 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def so3_exp(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(3)
    theta = np.linalg.norm(w)
    W = hat(w)
    if theta < _SMALL:
        return np.eye(3) + W + 0.5 * W @ W
    return np.eye(3) + np.sin(theta) / theta * W + (1.0 - np.cos(theta)) / theta**2 * W @ W


def so3_log(R: np.ndarray, check: bool = True) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    s_vec = 0.5 * vee(R - R.T)
    s = np.linalg.norm(s_vec)
    c = 0.5 * (np.trace(R) - 1.0)
    theta = np.arctan2(s, c)
    if check and theta > np.pi - PI_MARGIN:
        raise AngleNearPi(f"rotation angle {theta:.9f} rad too close to pi", angle=float(theta))
    if theta < _SMALL:
        return s_vec
    if np.pi - theta < 1e-3:
        # sin(theta) vanishes; recover the axis from the symmetric part
        M = (0.5 * (R + R.T) - c * np.eye(3)) / (1.0 - c)  # u u^T
        i = int(np.argmax(np.diag(M)))
        axis = M[:, i] / np.sqrt(M[i, i])
        axis /= np.linalg.norm(axis)
        if axis @ s_vec < 0:
            axis = -axis
        return theta * axis
    return theta / s * s_vec


def so3_left_jacobian(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(3)
    theta = np.linalg.norm(w)
    W = hat(w)
    if theta < _SMALL:
        return np.eye(3) + 0.5 * W + W @ W / 6.0
    return (np.eye(3) + (1.0 - np.cos(theta)) / theta**2 * W
            + (theta - np.sin(theta)) / theta**3 * W @ W)


def so3_left_jacobian_inv(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(3)
    theta = np.linalg.norm(w)
    W = hat(w)
    if theta < 1e-5:
        return np.eye(3) - 0.5 * W + W @ W / 12.0
    half = 0.5 * theta
    coef = (1.0 - half * np.cos(half) / np.sin(half)) / theta**2
    return np.eye(3) - 0.5 * W + coef * W @ W


# ---------- se(3) ----------

def se3_exp(xi: TwistLike) -> TransformSE3:
    """Exponential map; translation through the SO(3) left Jacobian."""
    vec = _as_vector(xi)
    w, v = vec[:3], vec[3:]
    return TransformSE3(so3_exp(w), so3_left_jacobian(w) @ v)


def se3_log(T: TransformSE3) -> Twist6:
    """Inverse of se3_exp; raises AngleNearPi beyond pi - 1e-6."""
    w = so3_log(T.rotation)
    return Twist6(w, so3_left_jacobian_inv(w) @ T.translation)


def adjoint(T: TransformSE3) -> np.ndarray:
    """Ad_T for twists ordered (omega, v)."""
    R = T.rotation
    A = np.zeros((6, 6))
    A[:3, :3] = R
    A[3:, 3:] = R
    A[3:, :3] = hat(T.translation) @ R
    return A


def ad(xi: TwistLike) -> np.ndarray:
    vec = _as_vector(xi)
    A = np.zeros((6, 6))
    Wx = hat(vec[:3])
    A[:3, :3] = Wx
    A[3:, 3:] = Wx
    A[3:, :3] = hat(vec[3:])
    return A


def jr_inv(xi: TwistLike) -> np.ndarray:
    """Inverse right Jacobian of SE(3), second order in ad(xi)."""
    a = ad(xi)
    return np.eye(6) + 0.5 * a + a @ a / 12.0


def jl_inv(xi: TwistLike) -> np.ndarray:
    """Inverse left Jacobian of SE(3), second order in ad(xi)."""
    a = ad(xi)
    return np.eye(6) - 0.5 * a + a @ a / 12.0


def random_transform(rng: np.random.Generator, max_angle: float = np.pi / 2, max_translation: float = 10.0) -> TransformSE3:
    """Uniform axis, angle in [0, max_angle], translation in a cube (mm)."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, max_angle)
    return TransformSE3(so3_exp(axis * angle), rng.uniform(-max_translation, max_translation, size=3))
