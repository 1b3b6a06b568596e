'''
Module: normalflow.py
Description: NormalFlow registration of two tactile frames + curvature-based failure scores

Usage:
[Sampling]
- bilinear_sample(): values and exact derivatives of the bilinear interpolant
- warp_pixels(): lift reference pixels, transform, project into the target image
- shared_region(): reference pixels landing inside the target contact

[Registration]
- residual_and_jacobian(): normal residuals N_j(W(q)) - R n_i and their 6-DOF Jacobian
- normalflow(): deterministic Gauss-Newton on the highest-curvature shared pixels
- NormalFlowResult: transform (ref -> tgt), ccs, scr, iterations, converged, shared mask

[Scores]
- compute_ccs(): cosine similarity of warped target curvature and reference curvature
- compute_scr(): share of reference |curvature| inside the shared region
'''
# Import packages
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import TacSlamError
from ..geometry import TransformSE3, se3_exp
from ..surface import Frame, SensorSpec

log = logging.getLogger(__name__)

K_PIXELS = 3000
MIN_PIXELS = 200


class EmptyOverlap(TacSlamError):
    """Raised when two frames share no contact under a transform."""


@dataclass(frozen=True, eq=False)
class NormalFlowResult:
    transform: TransformSE3      # reference -> target
    ccs: float
    scr: float
    iterations: int
    converged: bool
    shared_mask: np.ndarray

    @property
    def shared_pixels(self) -> int:
        return int(np.count_nonzero(self.shared_mask))


# Sampling
def bilinear_sample(img: np.ndarray, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    bilinear_sample(): bilinear values at (u, v) and their derivatives d/du, d/dv

    Parameters:
    img (array H x W or H x W x C): image indexed [v, u]
    u (array N): column coordinates inside [0, W-1]
    v (array N): row coordinates inside [0, H-1]
    '''
    H, W = img.shape[:2]
    u0 = np.clip(np.floor(u).astype(int), 0, W - 2)
    v0 = np.clip(np.floor(v).astype(int), 0, H - 2)
    fu = u - u0
    fv = v - v0
    if img.ndim == 3:
        fu, fv = fu[:, None], fv[:, None]
    f00 = img[v0, u0]
    f10 = img[v0, u0 + 1]
    f01 = img[v0 + 1, u0]
    f11 = img[v0 + 1, u0 + 1]
    val = (1 - fu) * (1 - fv) * f00 + fu * (1 - fv) * f10 + (1 - fu) * fv * f01 + fu * fv * f11
    d_u = (1 - fv) * (f10 - f00) + fv * (f11 - f01)
    d_v = (1 - fu) * (f01 - f00) + fu * (f11 - f10)
    return val, d_u, d_v


def warp_pixels(ref: Frame, pix: np.ndarray, T: TransformSE3, spec: SensorSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    warp_pixels(): reference pixels (v, u) -> transformed points p (mm) and target coordinates (u', v')
    '''
    v, u = pix[:, 0], pix[:, 1]
    p = T.apply(spec.lift(u.astype(float), v.astype(float), ref.height[v, u]))
    uw, vw = spec.project(p)
    return p, uw, vw


def _inside_target(tgt: Frame, uw: np.ndarray, vw: np.ndarray) -> np.ndarray:
    H, W = tgt.shape
    ok = (uw >= 0) & (uw <= W - 1) & (vw >= 0) & (vw <= H - 1)
    hit = np.zeros(len(uw), dtype=bool)
    hit[ok] = tgt.mask[np.rint(vw[ok]).astype(int), np.rint(uw[ok]).astype(int)]
    return hit


def shared_region(ref: Frame, tgt: Frame, T: TransformSE3, spec: SensorSpec) -> np.ndarray:
    '''
    shared_region(): boolean map over the reference image of contact pixels warping into target contact
    '''
    v, u = np.nonzero(ref.mask)
    pix = np.stack([v, u], axis=1)
    _, uw, vw = warp_pixels(ref, pix, T, spec)
    shared = np.zeros(ref.shape, dtype=bool)
    hit = _inside_target(tgt, uw, vw)
    shared[v[hit], u[hit]] = True
    return shared


def curvature_order(ref: Frame) -> np.ndarray:
    """Reference contact pixels (v, u) sorted by |curvature|, highest first, ties by raster order."""
    v, u = np.nonzero(ref.mask)
    order = np.argsort(-np.abs(ref.curvature[v, u]), kind="stable")
    return np.stack([v[order], u[order]], axis=1)


# Registration
def residual_and_jacobian(ref: Frame, tgt: Frame, T: TransformSE3, pix: np.ndarray,
                          spec: SensorSpec) -> tuple[np.ndarray, np.ndarray]:
    '''
    residual_and_jacobian(): r = N_j(W(q)) - R n_i per pixel and dr/d(omega, v) under T <- exp(delta) T

    Returns:
    (residuals N x 3, Jacobian N x 3 x 6)
    '''
    v, u = pix[:, 0], pix[:, 1]
    p, uw, vw = warp_pixels(ref, pix, T, spec)
    nj, dnu, dnv = bilinear_sample(tgt.normal, uw, vw)
    rn = ref.normal[v, u] @ T.rotation.T
    r = nj - rn

    G = np.stack([dnu, dnv], axis=2) / spec.pitch            # N x 3 x 2, d N / d (x, y) in mm
    skew_p = hat_batch(p)
    J = np.zeros((len(pix), 3, 6))
    J[:, :, :3] = -G @ skew_p[:, :2, :] + hat_batch(rn)
    J[:, :, 3:5] = G
    return r, J


def hat_batch(w: np.ndarray) -> np.ndarray:
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1], out[..., 0, 2] = -w[..., 2], w[..., 1]
    out[..., 1, 0], out[..., 1, 2] = w[..., 2], -w[..., 0]
    out[..., 2, 0], out[..., 2, 1] = -w[..., 1], w[..., 0]
    return out


def _align_depth(ref: Frame, tgt: Frame, T: TransformSE3, pix: np.ndarray, spec: SensorSpec) -> TransformSE3:
    """Closed-form z translation: normals carry no information about it."""
    p, uw, vw = warp_pixels(ref, pix, T, spec)
    hj, _, _ = bilinear_sample(tgt.height, uw, vw)
    dz = float(np.mean(hj * spec.pitch - p[:, 2]))
    return TransformSE3(T.rotation, T.translation + np.array([0.0, 0.0, dz]))


def _select(order: np.ndarray, ref: Frame, tgt: Frame, T: TransformSE3, spec: SensorSpec,
            k_pixels: int) -> np.ndarray:
    _, uw, vw = warp_pixels(ref, order, T, spec)
    hit = _inside_target(tgt, uw, vw)
    return order[hit][:k_pixels]


def normalflow(ref: Frame, tgt: Frame, init: TransformSE3, spec: SensorSpec,
               budget: int = 50, k_pixels: int = K_PIXELS, tol: float = 1e-6,
               min_pixels: int = MIN_PIXELS) -> NormalFlowResult:
    '''
    normalflow(): estimate the transform mapping reference points into the target frame

    Parameters:
    ref (Frame): reference frame i
    tgt (Frame): target frame j
    init (TransformSE3): initial jT_i
    spec (SensorSpec): sensor geometry
    budget (int, optional): Gauss-Newton iteration cap (Default: 50)
    k_pixels (int, optional): highest-curvature shared pixels used per iteration (Default: 3000)
    tol (float, optional): update norm for convergence (Default: 1e-6)
    min_pixels (int, optional): fewer shared pixels is treated as no overlap (Default: 200)
    '''
    if ref.is_empty() or tgt.is_empty():
        raise EmptyOverlap("normalflow needs two frames in contact", shared_pixels=0)
    if not init.is_valid(1e-6):
        raise ValueError("normalflow initial transform is not a finite rigid transform")

    order = curvature_order(ref)
    T = init
    converged = False
    it = 0
    for it in range(1, budget + 1):
        pix = _select(order, ref, tgt, T, spec, k_pixels)
        if len(pix) < min_pixels:
            log.debug("normalflow: %d shared pixels at iteration %d", len(pix), it)
            if it == 1:
                return NormalFlowResult(T, 0.0, 0.0, 0, False, np.zeros(ref.shape, dtype=bool))
            it -= 1
            break
        T = _align_depth(ref, tgt, T, pix, spec)
        r, J = residual_and_jacobian(ref, tgt, T, pix, spec)
        A = J[:, :, :5].reshape(-1, 5)
        delta5, *_ = np.linalg.lstsq(A, -r.reshape(-1), rcond=None)
        delta = np.concatenate([delta5, [0.0]])
        T = se3_exp(delta) @ T
        if np.linalg.norm(delta) < tol:
            converged = True
            break

    shared = shared_region(ref, tgt, T, spec)
    v, u = np.nonzero(shared)
    if len(v):
        T = _align_depth(ref, tgt, T, np.stack([v, u], axis=1), spec)
        shared = shared_region(ref, tgt, T, spec)
    if not shared.any():
        return NormalFlowResult(T, 0.0, 0.0, it, False, shared)
    return NormalFlowResult(T, _ccs(ref, tgt, T, shared, spec), _scr(ref, shared), it, converged, shared)


# Scores
def _ccs(ref: Frame, tgt: Frame, T: TransformSE3, shared: np.ndarray, spec: SensorSpec) -> float:
    v, u = np.nonzero(shared)
    _, uw, vw = warp_pixels(ref, np.stack([v, u], axis=1), T, spec)
    lj, _, _ = bilinear_sample(tgt.curvature, uw, vw)
    li = ref.curvature[v, u]
    den = np.linalg.norm(lj) * np.linalg.norm(li)
    return float(np.dot(lj, li) / den) if den > 0 else 0.0


def _scr(ref: Frame, shared: np.ndarray) -> float:
    total = np.abs(ref.curvature[ref.mask]).sum()
    return float(np.abs(ref.curvature[shared]).sum() / total) if total > 0 else 0.0


def compute_ccs(ref: Frame, tgt: Frame, T: TransformSE3, spec: SensorSpec,
                shared: Optional[np.ndarray] = None) -> float:
    '''
    compute_ccs(): <L_j', L_i> / (|L_j'| |L_i|) over the shared region; EmptyOverlap if there is none
    '''
    shared = shared_region(ref, tgt, T, spec) if shared is None else shared
    if not shared.any():
        raise EmptyOverlap("no shared contact region", shared_pixels=0)
    return _ccs(ref, tgt, T, shared, spec)


def compute_scr(ref: Frame, tgt: Frame, T: TransformSE3, spec: SensorSpec,
                shared: Optional[np.ndarray] = None) -> float:
    '''
    compute_scr(): sum of |L_i| over the shared region divided by its sum over the reference contact
    '''
    if ref.is_empty():
        raise ValueError("SCR needs a reference frame in contact")
    shared = shared_region(ref, tgt, T, spec) if shared is None else shared
    return _scr(ref, shared)
