'''
Module: maps.py
Description: Differential maps of one tactile frame (gradients, normals, height, curvature, contact)

Usage:
[Discrete operators]
- divergence(): central-difference divergence of a gradient map
- laplacian5(): 5-point Laplacian on interior pixels

[Maps]
- integrate_height(): fast Poisson solve (DST-I, zero Dirichlet border)
- compute_curvature(): -div(g) followed by a 7x7 Gaussian
- compute_contact_mask(): height/intensity thresholds + 3x3 opening
- normals_from_gradients(): (g_u, g_v, -1) normalized
- gradients_from_normals(): inverse of the above, guarded on |n_z|
- frame_from_normals(): bundle all maps into a Frame
'''
# Import packages
from __future__ import annotations
from typing import Optional

import numpy as np
from scipy import ndimage
from scipy.fft import dstn, idstn

from ..errors import TacSlamError
from .types import Frame, GradientMap, SurfaceParams, NormalMap, HeightMap, CurvatureMap, ContactMask


class DegenerateNormal(TacSlamError):
    """Raised when normals are too close to the gel plane to invert."""


# Discrete operators
def divergence(g: GradientMap) -> np.ndarray:
    '''
    divergence(): du g_u + dv g_v with central differences (one-sided on the border)
    '''
    return np.gradient(g.gu, axis=1) + np.gradient(g.gv, axis=0)


def laplacian5(h: np.ndarray) -> np.ndarray:
    '''
    laplacian5(): 5-point Laplacian evaluated on interior pixels, shape (H-2, W-2)
    '''
    return (h[2:, 1:-1] + h[:-2, 1:-1] + h[1:-1, 2:] + h[1:-1, :-2] - 4.0 * h[1:-1, 1:-1])


# Maps
def integrate_height(g: GradientMap, mask: Optional[ContactMask] = None) -> HeightMap:
    '''
    integrate_height(): solve lap(H) = div(g) with H = 0 on the image border

    Parameters:
    g (GradientMap): surface gradients (px/px)
    mask (bool array, optional): support; gradients and height outside it are zeroed (Default: None)

    Dependencies: scipy.fft.dstn/idstn
    '''
    if mask is not None:
        g = GradientMap(np.where(mask, g.gu, 0.0), np.where(mask, g.gv, 0.0))
    f = divergence(g)
    H, W = f.shape
    out = np.zeros((H, W))
    if H < 3 or W < 3:
        return out

    rhs = f[1:-1, 1:-1]
    m, n = rhs.shape
    # eigenvalues of the 5-point Laplacian under DST-I
    ev_v = 2.0 * np.cos(np.pi * np.arange(1, m + 1) / (m + 1)) - 2.0
    ev_u = 2.0 * np.cos(np.pi * np.arange(1, n + 1) / (n + 1)) - 2.0
    denom = ev_v[:, None] + ev_u[None, :]

    coeff = dstn(rhs, type=1, norm="ortho") / denom
    out[1:-1, 1:-1] = idstn(coeff, type=1, norm="ortho")
    if mask is not None:
        out[~np.asarray(mask, dtype=bool)] = 0.0
    return out


def compute_curvature(g: GradientMap, sigma: float = 1.5, truncate: float = 2.0) -> CurvatureMap:
    '''
    compute_curvature(): scalar curvature, positive for bumps pressing into the gel

    Parameters:
    g (GradientMap): surface gradients
    sigma (float, optional): Gaussian sigma in px (Default: 1.5)
    truncate (float, optional): kernel radius in sigmas; 2.0 gives a 7x7 kernel (Default: 2.0)
    '''
    lap = -divergence(g)
    return ndimage.gaussian_filter(lap, sigma=sigma, truncate=truncate, mode="nearest")


def compute_contact_mask(h: HeightMap, rgb_delta: Optional[np.ndarray] = None,
                         height_threshold: float = 0.4, rgb_threshold: float = 0.02,
                         opening_size: int = 3) -> ContactMask:
    '''
    compute_contact_mask(): contact iff height > threshold (and intensity change > threshold)

    Parameters:
    h (HeightMap): heights (px)
    rgb_delta (array H x W, optional): per-pixel intensity change vs. the no-contact image (Default: None)
    height_threshold (float, optional): px (Default: 0.4)
    rgb_threshold (float, optional): intensity units (Default: 0.02)
    opening_size (int, optional): side of the square opening element (Default: 3)
    '''
    mask = np.asarray(h) > height_threshold
    if rgb_delta is not None:
        mask &= np.asarray(rgb_delta) > rgb_threshold
    if opening_size > 1 and mask.any():
        mask = ndimage.binary_opening(mask, structure=np.ones((opening_size, opening_size), dtype=bool))
    return mask


def normals_from_gradients(g: GradientMap) -> NormalMap:
    n = np.stack([g.gu, g.gv, -np.ones_like(g.gu)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def gradients_from_normals(normal: NormalMap, min_abs_nz: float = 1e-3) -> GradientMap:
    nz = normal[..., 2]
    bad = np.abs(nz) < min_abs_nz
    if bad.any():
        raise DegenerateNormal(f"{int(bad.sum())} pixels with |n_z| < {min_abs_nz}",
                               count=int(bad.sum()), min_abs_nz=min_abs_nz)
    return GradientMap(-normal[..., 0] / nz, -normal[..., 1] / nz)


def frame_from_normals(id: int, timestamp: float, normal_map: NormalMap,
                       rgb_delta: Optional[np.ndarray] = None,
                       params: SurfaceParams = SurfaceParams()) -> Frame:
    '''
    frame_from_normals(): derive gradients, height, curvature and mask from a normal map

    Parameters:
    id (int): frame id
    timestamp (float): seconds
    normal_map (array H x W x 3): unit normals with n_z < 0
    rgb_delta (array H x W, optional): intensity change gate for the mask (Default: None)
    params (SurfaceParams, optional): thresholds/filters (Default: SurfaceParams())
    '''
    normal_map = np.asarray(normal_map, dtype=float)
    g = gradients_from_normals(normal_map, params.min_abs_nz)
    height = integrate_height(g)
    curvature = compute_curvature(g, params.curvature_sigma, params.curvature_truncate)
    mask = compute_contact_mask(height, rgb_delta, params.height_threshold,
                                params.rgb_threshold, params.opening_size)
    return Frame(int(id), float(timestamp), normal_map, height, curvature, mask, g)
