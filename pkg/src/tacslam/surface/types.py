'''
Module: types.py
Description: Sensor description and the per-frame differential maps

Usage:
[Sensor]
- SensorSpec: width, height, pitch, max_indentation, frame_rate; pixel grid, lift() and project()
- SurfaceParams: thresholds and filters used to derive maps from normals

[Maps]
- GradientMap: (g_u, g_v) pair; zeros() and from_height()
- Frame: id, timestamp and the normal, height, curvature and contact maps of one reading

Map conventions:
- arrays are indexed [v, u] (row, column); u grows to the right, v downwards
- heights are in pixel units (multiply by pitch for mm), positive into the gel
- normals are (g_u, g_v, -1) normalized, so n_z < 0 everywhere
- the sensor frame origin sits at the image center on the undeformed gel plane
'''
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# Plain ndarray aliases; shapes are (H, W, 3), (H, W), (H, W), (H, W) bool
NormalMap = np.ndarray
HeightMap = np.ndarray
CurvatureMap = np.ndarray
ContactMask = np.ndarray


@dataclass(frozen=True)
class SensorSpec:
    width: int = 320
    height: int = 240
    pitch: float = 0.0625          # mm / px
    max_indentation: float = 2.0   # mm
    frame_rate: float = 25.0       # Hz

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ValueError(f"sensor must be at least 3x3 pixels, got {self.width}x{self.height}")
        if self.pitch <= 0 or self.max_indentation <= 0 or self.frame_rate <= 0:
            raise ValueError("pitch, max_indentation and frame_rate must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def center(self) -> tuple[float, float]:
        """Principal pixel (cu, cv)."""
        return ((self.width - 1) / 2.0, (self.height - 1) / 2.0)

    @property
    def area_mm(self) -> tuple[float, float]:
        return (self.width * self.pitch, self.height * self.pitch)

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """(u, v) coordinate arrays of shape (H, W)."""
        return np.meshgrid(np.arange(self.width, dtype=float), np.arange(self.height, dtype=float))

    def lift(self, u: np.ndarray, v: np.ndarray, h: np.ndarray) -> np.ndarray:
        """Pixel coordinates + height (px) -> sensor-frame points (mm)."""
        cu, cv = self.center
        return np.stack([(np.asarray(u) - cu) * self.pitch,
                         (np.asarray(v) - cv) * self.pitch,
                         np.asarray(h) * self.pitch], axis=-1)

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Sensor-frame points (mm) -> pixel coordinates, dropping z."""
        cu, cv = self.center
        points = np.asarray(points)
        return points[..., 0] / self.pitch + cu, points[..., 1] / self.pitch + cv


@dataclass(frozen=True)
class SurfaceParams:
    height_threshold: float = 0.4    # px
    rgb_threshold: float = 0.02      # summed |delta I| over channels
    curvature_sigma: float = 1.5
    curvature_truncate: float = 2.0  # radius 3 -> 7x7 support
    opening_size: int = 3
    min_abs_nz: float = 1e-3


@dataclass(frozen=True, eq=False)
class GradientMap:
    gu: np.ndarray
    gv: np.ndarray

    def __post_init__(self):
        gu = np.asarray(self.gu, dtype=float)
        gv = np.asarray(self.gv, dtype=float)
        if gu.shape != gv.shape or gu.ndim != 2:
            raise ValueError(f"gradient components must share a 2D shape, got {gu.shape} and {gv.shape}")
        if not (np.all(np.isfinite(gu)) and np.all(np.isfinite(gv))):
            raise ValueError("gradient map contains non-finite values")
        object.__setattr__(self, "gu", gu)
        object.__setattr__(self, "gv", gv)

    @property
    def shape(self) -> tuple[int, int]:
        return self.gu.shape

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "GradientMap":
        return cls(np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_height(cls, height: np.ndarray) -> "GradientMap":
        """Central-difference gradients of a height field (px)."""
        gv, gu = np.gradient(np.asarray(height, dtype=float))
        return cls(gu, gv)


@dataclass(frozen=True, eq=False)
class Frame:
    """One tactile observation; immutable once built."""
    id: int
    timestamp: float
    normal: NormalMap
    height: HeightMap
    curvature: CurvatureMap
    mask: ContactMask
    gradients: Optional[GradientMap] = field(default=None, repr=False)

    def __post_init__(self):
        shape = self.height.shape
        if self.normal.shape != shape + (3,) or self.curvature.shape != shape or self.mask.shape != shape:
            raise ValueError("frame maps must share dimensions")

    @property
    def shape(self) -> tuple[int, int]:
        return self.height.shape

    @property
    def contact_pixels(self) -> int:
        return int(np.count_nonzero(self.mask))

    def is_empty(self) -> bool:
        return not self.mask.any()

    def lift(self, spec: SensorSpec, mask: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
        """Sensor-frame points (mm) of masked pixels plus their (v, u) indices."""
        sel = self.mask if mask is None else mask
        v, u = np.nonzero(sel)
        return spec.lift(u, v, self.height[v, u]), np.stack([v, u], axis=1)
