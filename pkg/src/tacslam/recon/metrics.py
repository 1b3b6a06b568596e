'''
Module: metrics.py
Description: Mesh-to-mesh reconstruction metrics

Usage:
[Chamfer]
- sample_mesh(): seeded area-weighted surface samples with their faces
- closest_on_mesh() / point_to_mesh(): closest surface point and distance (exact over candidate faces)
- chamfer_distance(): symmetric mean point-to-surface distance (mm)

[Normal cosine]
- contact_locations(): uniform surface contacts, pressed along the outward normal
- render_contact_normals(): simulated contact normal maps of one mesh
- normal_cosine_distance(): mean per-pixel cosine between two meshes' contact normal maps
'''
# Import packages
from __future__ import annotations
import logging
from typing import Optional

import numpy as np
import trimesh
from scipy.spatial import cKDTree

from ..geometry import TransformSE3
from ..sim.objects import MeshObject
from ..sim.render import RenderParams, render_frame
from ..sim.trajectory import contact_pose
from ..surface import SensorSpec

log = logging.getLogger(__name__)


# ---------- Chamfer ----------

def sample_mesh(mesh: trimesh.Trimesh, count: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """(points, face indices) drawn uniformly by area; the same seed gives the same draw."""
    points, faces = trimesh.sample.sample_surface(mesh, count, seed=seed)
    return np.asarray(points, dtype=float), np.asarray(faces, dtype=int)


def closest_on_mesh(points: np.ndarray, mesh: trimesh.Trimesh, samples: np.ndarray, sample_faces: np.ndarray,
                    k: int = 8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    closest_on_mesh(): closest surface point, distance and face for each query, searching the triangles
    that own its k nearest mesh samples

    Parameters:
    points (array N x 3): query points
    mesh (trimesh.Trimesh): target surface
    samples (array M x 3): points sampled on mesh
    sample_faces (array M): face of each sample
    k (int, optional): nearest samples whose faces are tested (Default: 8)
    '''
    k = min(k, len(samples))
    n = len(points)
    _, idx = cKDTree(samples).query(points, k=k)
    faces = sample_faces[idx.reshape(n, k)]                    # (N, k)
    rep = np.repeat(points, k, axis=0)
    closest = trimesh.triangles.closest_point(mesh.triangles[faces.ravel()], rep).reshape(n, k, 3)
    dist = np.linalg.norm(closest - points[:, None, :], axis=2)
    best = np.argmin(dist, axis=1)
    rows = np.arange(n)
    return closest[rows, best], dist[rows, best], faces[rows, best]


def point_to_mesh(points: np.ndarray, mesh: trimesh.Trimesh, samples: np.ndarray, sample_faces: np.ndarray,
                  k: int = 8) -> np.ndarray:
    return closest_on_mesh(points, mesh, samples, sample_faces, k)[1]


def chamfer_distance(mesh_a: trimesh.Trimesh, mesh_b: trimesh.Trimesh, samples: int = 100_000,
                     seed: int = 0) -> float:
    '''
    chamfer_distance(): 0.5 * (mean d(a -> B) + mean d(b -> A)) over area-weighted samples

    Parameters:
    mesh_a (trimesh.Trimesh): first mesh
    mesh_b (trimesh.Trimesh): second mesh
    samples (int, optional): samples per mesh (Default: 100000)
    seed (int, optional): sampling seed, shared by both meshes (Default: 0)

    Dependencies: trimesh.sample, trimesh.triangles, scipy.spatial.cKDTree
    '''
    if len(mesh_a.faces) == 0 or len(mesh_b.faces) == 0:
        raise ValueError("chamfer distance needs two non-empty meshes")
    pa, fa = sample_mesh(mesh_a, samples, seed)
    pb, fb = sample_mesh(mesh_b, samples, seed)
    ab = float(point_to_mesh(pa, mesh_b, pb, fb).mean())
    ba = float(point_to_mesh(pb, mesh_a, pa, fa).mean())
    log.debug("chamfer: a->b %.4f mm, b->a %.4f mm", ab, ba)
    return 0.5 * (ab + ba)


# ---------- Normal cosine ----------

def contact_locations(mesh: trimesh.Trimesh, n_contacts: int = 100, depth: float = 0.5,
                      seed: int = 0) -> list[TransformSE3]:
    """Sensor poses pressing depth (mm) into mesh at uniform surface points, touch along the outward normal."""
    points, faces = sample_mesh(mesh, n_contacts, seed)
    normals = np.asarray(mesh.face_normals[faces], dtype=float)
    rng = np.random.default_rng(seed)
    hints = rng.normal(size=(n_contacts, 3))
    return [contact_pose(p, n, h, depth) for p, n, h in zip(points, normals, hints)]


def render_contact_normals(mesh: trimesh.Trimesh, poses: list[TransformSE3],
                           spec: SensorSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Noise-free (normal map, contact mask) of mesh at each pose."""
    obj = MeshObject(mesh)
    params = RenderParams(noise_deg=0.0)
    out = []
    for pose in poses:
        r = render_frame(obj, pose, spec, params)
        out.append((r.normal, r.mask))
    return out


def normal_cosine_distance(mesh_a: trimesh.Trimesh, mesh_b: trimesh.Trimesh, spec: SensorSpec,
                           n_contacts: int = 100, depth: float = 0.5, seed: int = 0,
                           renders: Optional[list] = None) -> float:
    '''
    normal_cosine_distance(): mean per-pixel cosine between contact normal maps of two pre-aligned meshes

    Parameters:
    mesh_a (trimesh.Trimesh): reconstruction
    mesh_b (trimesh.Trimesh): reference; contacts are sampled on its surface
    spec (SensorSpec): simulated sensor
    n_contacts (int, optional): contact locations (Default: 100)
    depth (float, optional): press depth in mm (Default: 0.5)
    seed (int, optional): contact sampling seed (Default: 0)
    renders (list, optional): filled with (normals_a, normals_b, shared mask) per contact (Default: None)

    Dependencies: tacslam.sim (MeshObject, render_frame, contact_pose)
    '''
    poses = contact_locations(mesh_b, n_contacts, depth, seed)
    ra = render_contact_normals(mesh_a, poses, spec)
    rb = render_contact_normals(mesh_b, poses, spec)
    total, count = 0.0, 0
    for (na, ma), (nb, mb) in zip(ra, rb):
        shared = ma & mb
        if renders is not None:
            renders.append((na, nb, shared))
        if not shared.any():
            continue
        total += float(np.sum(np.einsum("ij,ij->i", na[shared], nb[shared])))
        count += int(shared.sum())
    if count == 0:
        log.warning("normal cosine distance: no shared contact pixels over %d contacts", n_contacts)
        return 0.0
    return total / count
