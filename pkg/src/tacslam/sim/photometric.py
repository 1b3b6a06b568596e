'''
Module: photometric.py
Description: Three-light Lambertian stand-in for the gel illumination

Red, green and blue directional lights sit 120 degrees apart in azimuth at 45 degrees elevation;
each channel sees one light plus an ambient term:

    I_c = ambient + (1 - ambient) * max(0, l_c . m),   m = -n (faces the camera)

Usage:
- PhotometricModel.render(): normals -> RGB in [0, 1]
- PhotometricModel.invert(): RGB -> normals (ideal calibration)
- PhotometricModel.flat_image(): RGB of the undeformed gel
- PhotometricModel.is_injective(): sampled check that distinct tilts give distinct colors
'''
from __future__ import annotations
from dataclasses import dataclass, field

import numpy as np


def _default_lights() -> np.ndarray:
    az = np.radians([90.0, 210.0, 330.0])
    el = np.radians(45.0)
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.full(3, np.sin(el))], axis=1)


@dataclass(frozen=True, eq=False)
class PhotometricModel:
    directions: np.ndarray = field(default_factory=_default_lights)   # (3 lights, xyz)
    colors: np.ndarray = field(default_factory=lambda: np.eye(3))      # (3 lights, rgb)
    ambient: float = 0.1

    def shading(self, normals: np.ndarray) -> np.ndarray:
        m = -np.asarray(normals, dtype=float)
        return np.maximum(m @ self.directions.T, 0.0)

    def render(self, normals: np.ndarray) -> np.ndarray:
        """Float RGB in [0, 1] for a normal map (..., 3)."""
        rgb = self.ambient + (1.0 - self.ambient) * (self.shading(normals) @ self.colors)
        return np.clip(rgb, 0.0, 1.0)

    def flat_image(self, shape: tuple[int, int]) -> np.ndarray:
        flat = np.zeros(shape + (3,))
        flat[..., 2] = -1.0
        return self.render(flat)

    def invert(self, rgb: np.ndarray) -> np.ndarray:
        """Ideal inverse on the lit cone: unit normals from RGB."""
        s = (np.asarray(rgb, dtype=float) - self.ambient) / (1.0 - self.ambient)
        lc = self.colors.T @ self.directions           # rgb <- m
        m = s @ np.linalg.inv(lc).T
        m /= np.linalg.norm(m, axis=-1, keepdims=True)
        return -m

    def is_injective(self, max_tilt_deg: float = 40.0, n_samples: int = 20000, seed: int = 0) -> bool:
        """Every light sees every normal of the cone, so the linear inverse is exact."""
        if abs(np.linalg.det(self.colors.T @ self.directions)) < 1e-9:
            return False
        rng = np.random.default_rng(seed)
        tilt = np.radians(max_tilt_deg) * np.sqrt(rng.uniform(size=n_samples))
        az = rng.uniform(0, 2 * np.pi, size=n_samples)
        m = np.stack([np.sin(tilt) * np.cos(az), np.sin(tilt) * np.sin(az), np.cos(tilt)], axis=1)
        return bool(np.all(m @ self.directions.T > 0.0))
