'''
Module: objects.py
Description: Synthetic objects the simulated sensor presses against

Usage:
[Objects]
- SyntheticObject: base (height field under a sensor pose, mesh export)
- ImplicitObject: analytic implicit surface f(p) < 0 inside, star-shaped about the origin
  (Sphere, BumpySphere, Superellipsoid)
- MeshObject: closed triangle mesh (rendered by z-buffer rasterization)

[Construction]
- make_object(): build an object from a plain spec dict (CLI / YAML)

Object coordinates are millimeters. A sensor pose T maps sensor-frame points
into the object frame; the gel plane is z = 0 in the sensor frame and the
object presses in from z < 0, so the height field is the highest object z
along each pixel column, clamped to [0, max_indentation].
'''
from __future__ import annotations
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
import trimesh
from skimage import measure

from ..errors import TacSlamError
from ..geometry import TransformSE3
from ..surface import SensorSpec


class InvalidObjectSpec(TacSlamError):
    """Raised for object parameters outside their valid range."""


# ---------- Base ----------

class SyntheticObject(ABC):
    texture_amplitude: float = 0.0
    texture_frequency: float = 0.0

    @abstractmethod
    def heightfield(self, pose: TransformSE3, spec: SensorSpec) -> np.ndarray:
        """Indentation (mm) per pixel, clamped to [0, max_indentation]."""

    @abstractmethod
    def to_mesh(self, resolution: float = 0.12) -> trimesh.Trimesh:
        """Closed triangle mesh of the surface in the object frame."""

    @abstractmethod
    def surface_point(self, direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Surface point hit by a ray from the origin, and the outward unit normal there."""

    @abstractmethod
    def bounding_radius(self) -> float:
        ...

    def validate(self, spec: SensorSpec) -> None:
        if self.texture_amplitude > 0.5 * spec.max_indentation:
            raise InvalidObjectSpec(
                f"texture amplitude {self.texture_amplitude} mm exceeds half the max indentation",
                amplitude=self.texture_amplitude)


def _column_points(pose: TransformSE3, spec: SensorSpec) -> tuple[np.ndarray, np.ndarray]:
    """Object-frame base points of every pixel column at z = 0, and the column direction."""
    u, v = spec.pixel_grid()
    base = pose.apply(spec.lift(u, v, np.zeros_like(u)))
    return base, pose.rotation[:, 2]


# ---------- Implicit objects ----------

class ImplicitObject(SyntheticObject):

    @abstractmethod
    def implicit(self, p: np.ndarray) -> np.ndarray:
        """Signed implicit value at points (..., 3); negative inside."""

    def heightfield(self, pose: TransformSE3, spec: SensorSpec, iterations: int = 24) -> np.ndarray:
        base, axis = _column_points(pose, spec)
        zmax = spec.max_indentation
        h = np.zeros(spec.shape)

        # Columns outside at the gel plane carry no contact; the inside
        # interval of a column is assumed to contain z = 0 when it reaches above it.
        inside = self.implicit(base) <= 0.0
        if not inside.any():
            return h
        p0 = base[inside]
        full = self.implicit(p0 + zmax * axis) <= 0.0

        lo = np.zeros(len(p0))
        hi = np.full(len(p0), zmax)
        todo = ~full
        for _ in range(iterations):
            mid = 0.5 * (lo[todo] + hi[todo])
            ins = self.implicit(p0[todo] + mid[:, None] * axis) <= 0.0
            lo_t, hi_t = lo[todo], hi[todo]
            lo_t[ins] = mid[ins]
            hi_t[~ins] = mid[~ins]
            lo[todo], hi[todo] = lo_t, hi_t
        depth = np.where(full, zmax, 0.5 * (lo + hi))
        h[inside] = depth
        return h

    def surface_point(self, direction: np.ndarray, iterations: int = 60) -> tuple[np.ndarray, np.ndarray]:
        """Surface point along a ray from the origin and its outward unit normal."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        lo, hi = 0.0, 1.5 * self.bounding_radius()
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if self.implicit(mid * d) <= 0.0:
                lo = mid
            else:
                hi = mid
        p = 0.5 * (lo + hi) * d
        return p, self.normal_at(p)

    def normal_at(self, p: np.ndarray, eps: float = 1e-5) -> np.ndarray:
        offsets = np.eye(3) * eps
        grad = np.array([(self.implicit(p + o) - self.implicit(p - o)) / (2 * eps) for o in offsets])
        return grad / np.linalg.norm(grad)

    def to_mesh(self, resolution: float = 0.12) -> trimesh.Trimesh:
        r = 1.05 * self.bounding_radius() + 3 * resolution
        axis = np.arange(-r, r + resolution, resolution)
        Y, Z = np.meshgrid(axis, axis, indexing="ij")
        values = np.empty((len(axis),) * 3)
        for i, x in enumerate(axis):  # slab-wise to bound memory
            values[i] = self.implicit(np.stack([np.full_like(Y, x), Y, Z], axis=-1))
        verts, faces, _, _ = measure.marching_cubes(values, level=0.0, spacing=(resolution,) * 3)
        mesh = trimesh.Trimesh(verts + axis[0], faces, process=True)
        mesh.fix_normals()
        return mesh


@dataclass
class Sphere(ImplicitObject):
    radius: float = 8.0

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidObjectSpec("sphere radius must be positive", radius=self.radius)

    def implicit(self, p):
        return np.linalg.norm(p, axis=-1) - self.radius

    def bounding_radius(self):
        return self.radius


@dataclass(eq=False)
class BumpySphere(ImplicitObject):
    """Sphere with a quasi-periodic sinusoidal texture (RMS height = amplitude)."""
    radius: float = 8.0
    amplitude: float = 0.1          # mm
    frequency: float = 0.5          # cycles / mm
    n_waves: int = 6
    seed: int = 0
    _dirs: np.ndarray = field(init=False, repr=False)
    _freqs: np.ndarray = field(init=False, repr=False)
    _phases: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.radius <= 0 or self.amplitude < 0 or self.frequency < 0 or self.n_waves < 1:
            raise InvalidObjectSpec("invalid bumpy sphere parameters", radius=self.radius,
                                    amplitude=self.amplitude, frequency=self.frequency)
        if self.amplitude >= 0.25 * self.radius:
            raise InvalidObjectSpec("texture amplitude too large for the radius", amplitude=self.amplitude)
        rng = np.random.default_rng(self.seed)
        dirs = rng.normal(size=(self.n_waves, 3))
        self._dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
        # spread frequencies so the texture never repeats exactly
        self._freqs = self.frequency * rng.uniform(0.75, 1.25, size=self.n_waves)
        self._phases = rng.uniform(0.0, 2 * np.pi, size=self.n_waves)

    @property
    def texture_amplitude(self) -> float:
        return self.amplitude

    @property
    def texture_frequency(self) -> float:
        return self.frequency

    def texture(self, q: np.ndarray) -> np.ndarray:
        """Texture height (mm) at points q on the base sphere."""
        arg = 2 * np.pi * (q @ self._dirs.T) * self._freqs + self._phases
        return self.amplitude * np.sqrt(2.0 / self.n_waves) * np.sin(arg).sum(axis=-1)

    def implicit(self, p):
        r = np.linalg.norm(p, axis=-1)
        q = p * (self.radius / np.maximum(r, 1e-12))[..., None]
        return r - self.radius - self.texture(q)

    def bounding_radius(self):
        return self.radius + self.amplitude * np.sqrt(2.0 * self.n_waves)


@dataclass
class Superellipsoid(ImplicitObject):
    a: float = 8.0
    b: float = 6.0
    c: float = 5.0
    e1: float = 0.8
    e2: float = 0.8

    def __post_init__(self):
        if min(self.a, self.b, self.c) <= 0 or not (0.1 <= self.e1 <= 2.0 and 0.1 <= self.e2 <= 2.0):
            raise InvalidObjectSpec("invalid superellipsoid parameters", a=self.a, b=self.b, c=self.c)

    def implicit(self, p):
        x = np.abs(p[..., 0] / self.a)
        y = np.abs(p[..., 1] / self.b)
        z = np.abs(p[..., 2] / self.c)
        xy = (x ** (2 / self.e2) + y ** (2 / self.e2)) ** (self.e2 / self.e1)
        f = (xy + z ** (2 / self.e1)) ** (self.e1 / 2)
        return (f - 1.0) * min(self.a, self.b, self.c)

    def bounding_radius(self):
        return float(np.sqrt(self.a**2 + self.b**2 + self.c**2))


# ---------- Mesh objects ----------

@dataclass(eq=False)
class MeshObject(SyntheticObject):
    mesh: trimesh.Trimesh

    def __post_init__(self):
        if len(self.mesh.faces) == 0:
            raise InvalidObjectSpec("mesh has no faces")

    def to_mesh(self, resolution: float = 0.12) -> trimesh.Trimesh:
        return self.mesh.copy()

    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.mesh.vertices, axis=1).max())

    def surface_point(self, direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Farthest ray/triangle hit along direction (Moller-Trumbore over all faces)."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        tri = self.mesh.triangles
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        p = np.cross(d, e2)
        det = np.einsum("ij,ij->i", e1, p)
        ok = np.abs(det) > 1e-12
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        s = -tri[:, 0]
        a = np.einsum("ij,ij->i", s, p) * inv
        q = np.cross(s, e1)
        b = (q @ d) * inv
        t = np.einsum("ij,ij->i", e2, q) * inv
        hit = ok & (a >= 0) & (b >= 0) & (a + b <= 1) & (t > 0)
        if not hit.any():
            raise InvalidObjectSpec("mesh is not star-shaped about its origin", direction=d)
        k = np.flatnonzero(hit)[np.argmax(t[hit])]
        return t[k] * d, np.asarray(self.mesh.face_normals[k], dtype=float)

    def heightfield(self, pose: TransformSE3, spec: SensorSpec) -> np.ndarray:
        tri = pose.inverse().apply(self.mesh.vertices)[self.mesh.faces]  # (F, 3, 3) sensor frame
        cu, cv = spec.center
        pu = tri[..., 0] / spec.pitch + cu
        pv = tri[..., 1] / spec.pitch + cv
        keep = ((tri[..., 2].max(axis=1) > 0.0)
                & (pu.max(axis=1) >= 0) & (pu.min(axis=1) <= spec.width - 1)
                & (pv.max(axis=1) >= 0) & (pv.min(axis=1) <= spec.height - 1))
        zbuf = np.zeros(spec.shape)
        for k in np.flatnonzero(keep):
            _rasterize_max(zbuf, pu[k], pv[k], tri[k, :, 2])
        return np.clip(zbuf, 0.0, spec.max_indentation)


def _rasterize_max(zbuf: np.ndarray, pu: np.ndarray, pv: np.ndarray, z: np.ndarray) -> None:
    H, W = zbuf.shape
    u0, u1 = max(int(np.ceil(pu.min())), 0), min(int(np.floor(pu.max())), W - 1)
    v0, v1 = max(int(np.ceil(pv.min())), 0), min(int(np.floor(pv.max())), H - 1)
    if u0 > u1 or v0 > v1:
        return
    uu, vv = np.meshgrid(np.arange(u0, u1 + 1, dtype=float), np.arange(v0, v1 + 1, dtype=float))
    det = (pv[1] - pv[2]) * (pu[0] - pu[2]) + (pu[2] - pu[1]) * (pv[0] - pv[2])
    if abs(det) < 1e-12:
        return
    l0 = ((pv[1] - pv[2]) * (uu - pu[2]) + (pu[2] - pu[1]) * (vv - pv[2])) / det
    l1 = ((pv[2] - pv[0]) * (uu - pu[2]) + (pu[0] - pu[2]) * (vv - pv[2])) / det
    l2 = 1.0 - l0 - l1
    inside = (l0 >= -1e-9) & (l1 >= -1e-9) & (l2 >= -1e-9)
    if not inside.any():
        return
    zz = l0 * z[0] + l1 * z[1] + l2 * z[2]
    block = zbuf[v0:v1 + 1, u0:u1 + 1]
    np.maximum(block, np.where(inside, zz, 0.0), out=block)


# ---------- Factory ----------

_KINDS = {
    "sphere": Sphere,
    "bumpy-sphere": BumpySphere,
    "superellipsoid": Superellipsoid,
}


def make_object(spec: Mapping[str, Any]) -> SyntheticObject:
    """
    make_object(): build an object from {'kind': ..., **parameters}; kind 'mesh' takes a 'path'
    """
    params = dict(spec)
    kind = params.pop("kind", "bumpy-sphere")
    if kind == "mesh":
        path = params.pop("path", None)
        if path is None:
            raise InvalidObjectSpec("mesh object needs a path")
        mesh = trimesh.load(path, force="mesh")
        if not mesh.is_watertight:
            raise InvalidObjectSpec(f"mesh {path} is not watertight", path=path)
        return MeshObject(mesh)
    if kind not in _KINDS:
        raise InvalidObjectSpec(f"unknown object kind {kind!r}; choose from {sorted(_KINDS) + ['mesh']}", kind=kind)
    try:
        return _KINDS[kind](**params)
    except TypeError as e:
        raise InvalidObjectSpec(f"bad parameters for {kind}: {e}", kind=kind) from e
