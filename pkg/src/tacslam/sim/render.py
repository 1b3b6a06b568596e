'''
Module: render.py
Description: Render one simulated tactile observation of a synthetic object

Usage:
[Parameters]
- RenderParams: gel smoothing, normal noise, empty-frame policy

[Rendering]
- render_frame(): indentation -> gel blur -> normals (+ noise) -> RGB
- perturb_normals(): zero-mean angular noise on a normal map
'''
# Import packages
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from ..errors import TacSlamError
from ..geometry import TransformSE3
from ..surface import SensorSpec, GradientMap, normals_from_gradients
from .objects import SyntheticObject
from .photometric import PhotometricModel


class NoContact(TacSlamError):
    """Raised when the object never reaches the gel plane and empty frames are not allowed."""


@dataclass(frozen=True)
class RenderParams:
    gel_sigma: float = 1.0      # px
    noise_deg: float = 0.5      # angular normal noise
    allow_empty: bool = True


@dataclass(frozen=True, eq=False)
class RenderResult:
    normal: np.ndarray          # (H, W, 3) observed normals
    height: np.ndarray          # (H, W) ground-truth indentation after gel smoothing (px)
    mask: np.ndarray            # (H, W) ground-truth contact (raw penetration > 0)
    rgb: np.ndarray             # (H, W, 3) float in [0, 1]

    @property
    def in_contact(self) -> bool:
        return bool(self.mask.any())


def perturb_normals(normals: np.ndarray, noise_deg: float, rng: np.random.Generator) -> np.ndarray:
    '''
    perturb_normals(): tangent-plane Gaussian perturbation, renormalized

    Parameters:
    normals (array H x W x 3): unit normals
    noise_deg (float): per-axis angular standard deviation (deg)
    rng (numpy Generator): noise stream
    '''
    if noise_deg <= 0:
        return normals
    xi = rng.normal(0.0, np.radians(noise_deg), size=normals.shape)
    xi -= np.sum(xi * normals, axis=-1, keepdims=True) * normals
    out = normals + xi
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def render_frame(obj: SyntheticObject, pose: TransformSE3, spec: SensorSpec,
                 params: RenderParams = RenderParams(),
                 rng: Optional[np.random.Generator] = None,
                 model: PhotometricModel = PhotometricModel()) -> RenderResult:
    '''
    render_frame(): simulate the sensor at pose against obj

    Parameters:
    obj (SyntheticObject): object in its own frame (mm)
    pose (TransformSE3): sensor pose, sensor frame -> object frame
    spec (SensorSpec): sensor geometry
    params (RenderParams, optional): smoothing/noise (Default: RenderParams())
    rng (numpy Generator, optional): noise stream (Default: seeded with 0)
    model (PhotometricModel, optional): illumination (Default: PhotometricModel())
    '''
    raw = obj.heightfield(pose, spec)
    mask = raw > 0.0
    if not mask.any() and not params.allow_empty:
        raise NoContact("object does not reach the gel plane", pose=pose)

    height = raw / spec.pitch
    if params.gel_sigma > 0:
        height = ndimage.gaussian_filter(height, sigma=params.gel_sigma, mode="nearest")
    normal = normals_from_gradients(GradientMap.from_height(height))
    if params.noise_deg > 0:
        normal = perturb_normals(normal, params.noise_deg, rng if rng is not None else np.random.default_rng(0))
    return RenderResult(normal, height, mask, model.render(normal))
