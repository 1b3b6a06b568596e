'''
Module: align.py
Description: Rigid pre-alignment of a reconstruction onto a reference mesh

Usage:
- initial_guesses(): centroid shift + principal-axes rotations (proper sign flips)
- icp_point_to_plane(): Gauss-Newton point-to-plane ICP against the closest mesh points
- align_meshes(): best ICP result over all initial guesses; raises AlignmentDiverged if it ends worse than it started
'''
# Import packages
from __future__ import annotations
import itertools
import logging

import numpy as np
import trimesh

from ..errors import TacSlamError
from ..geometry import TransformSE3, se3_exp
from .metrics import closest_on_mesh, sample_mesh

log = logging.getLogger(__name__)


class AlignmentDiverged(TacSlamError):
    """Raised when alignment leaves the meshes farther apart than before."""


def _principal_axes(points: np.ndarray) -> np.ndarray:
    cov = np.cov((points - points.mean(axis=0)).T)
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, ::-1]


def initial_guesses(pa: np.ndarray, pb: np.ndarray) -> list[TransformSE3]:
    '''
    initial_guesses(): identity rotation first, then the four proper principal-axes alignments, all centroid-matched
    '''
    ca, cb = pa.mean(axis=0), pb.mean(axis=0)
    Ea, Eb = _principal_axes(pa), _principal_axes(pb)
    out = [TransformSE3(np.eye(3), cb - ca)]
    for signs in itertools.product((1.0, -1.0), repeat=3):
        R = Eb @ np.diag(signs) @ Ea.T
        if np.linalg.det(R) < 0:
            continue
        out.append(TransformSE3(R, cb - R @ ca))
    return out


def icp_point_to_plane(points: np.ndarray, mesh: trimesh.Trimesh, samples: np.ndarray, sample_faces: np.ndarray,
                       init: TransformSE3, max_iterations: int = 50, tol: float = 1e-8) -> tuple[TransformSE3, float]:
    '''
    icp_point_to_plane(): refine init so that init.apply(points) lies on mesh

    Parameters:
    points (array N x 3): source points
    mesh (trimesh.Trimesh): target surface
    samples (array M x 3): target surface samples (closest-face search)
    sample_faces (array M): face of each sample
    init (TransformSE3): starting transform
    max_iterations (int, optional): Gauss-Newton steps (Default: 50)
    tol (float, optional): stop when the mean distance changes by less than this fraction (Default: 1e-8)
    '''
    T = init
    prev = np.inf
    for it in range(max_iterations):
        p = T.apply(points)
        q, dist, faces = closest_on_mesh(p, mesh, samples, sample_faces)
        n = np.asarray(mesh.face_normals[faces], dtype=float)
        err = float(dist.mean())
        if prev < np.inf and abs(prev - err) <= tol * max(prev, 1e-12):
            break
        prev = err
        r = np.einsum("ij,ij->i", n, p - q)
        J = np.hstack([np.cross(p, n), n])        # d r / d(omega, v), left perturbation
        delta, *_ = np.linalg.lstsq(J, -r, rcond=None)
        T = se3_exp(delta) @ T
        if np.linalg.norm(delta) < 1e-12:
            break
    p = T.apply(points)
    final = float(closest_on_mesh(p, mesh, samples, sample_faces)[1].mean())
    log.debug("ICP: %d iterations, mean distance %.6f mm", it + 1, final)
    return T, final


def align_meshes(mesh_a: trimesh.Trimesh, mesh_b: trimesh.Trimesh, samples: int = 5000,
                 max_iterations: int = 50, tol: float = 1e-8, seed: int = 0) -> TransformSE3:
    '''
    align_meshes(): transform mapping mesh_a onto mesh_b

    Parameters:
    mesh_a (trimesh.Trimesh): mesh to move (reconstruction)
    mesh_b (trimesh.Trimesh): reference mesh
    samples (int, optional): source samples; the target gets four times as many (Default: 5000)
    max_iterations (int, optional): ICP steps per initial guess (Default: 50)
    tol (float, optional): relative convergence threshold (Default: 1e-8)
    seed (int, optional): sampling seed (Default: 0)

    Dependencies: trimesh.sample, trimesh.triangles, scipy.spatial.cKDTree
    '''
    pa, _ = sample_mesh(mesh_a, samples, seed)
    pb, fb = sample_mesh(mesh_b, 4 * samples, seed + 1)
    before = float(closest_on_mesh(pa, mesh_b, pb, fb)[1].mean())

    best_T, best_err = None, np.inf
    for init in initial_guesses(pa, pb):
        T, err = icp_point_to_plane(pa, mesh_b, pb, fb, init, max_iterations, tol)
        if err < best_err - 1e-12:
            best_T, best_err = T, err
    if best_T is None or best_err > before:
        raise AlignmentDiverged(f"alignment ended at {best_err:.4f} mm from {before:.4f} mm",
                                initial=before, final=best_err)
    log.info("aligned meshes: mean surface distance %.4f -> %.4f mm", before, best_err)
    return best_T
