'''
Module: remesh.py
Description: Watertight re-meshing of a fused surface

Usage:
- RemeshParams: voxel size, band width, neighbour count
- signed_distance(): point-to-plane distance from the k nearest fused points (inverse-distance weights)
- remesh_watertight(): narrow-band distance field, marching cubes, largest component, consistent normals
- boundary_edge_count() / largest_component(): mesh checks used by the above
- OpenScan: raised in strict mode when boundary edges remain
'''
from __future__ import annotations
import logging
import itertools
from dataclasses import dataclass

import numpy as np
import trimesh
from scipy.spatial import cKDTree
from skimage import measure

from ..errors import TacSlamError
from .fusion import FusedSurface

log = logging.getLogger(__name__)


class OpenScan(TacSlamError):
    """Raised (strict mode only) when the re-meshed surface still has boundary edges."""


@dataclass(frozen=True)
class RemeshParams:
    voxel: float = 0.2          # mm
    k: int = 12
    band: float = 4.0           # voxels
    strict: bool = False


@dataclass(frozen=True, eq=False)
class WatertightMesh:
    mesh: trimesh.Trimesh
    voxel: float
    watertight: bool
    boundary_edges: int = 0

    @property
    def volume(self) -> float:
        return float(self.mesh.volume) if self.watertight else float("nan")


def signed_distance(query: np.ndarray, points: np.ndarray, normals: np.ndarray, k: int = 12,
                    tree: cKDTree | None = None) -> np.ndarray:
    """Inverse-distance weighted mean of n_i . (x - p_i) over the k nearest points; positive outside."""
    tree = cKDTree(points) if tree is None else tree
    k = min(k, len(points))
    d, idx = tree.query(query, k=k)
    if k == 1:
        d, idx = d[:, None], idx[:, None]
    w = 1.0 / (d + 1e-9)
    plane = np.einsum("qkc,qkc->qk", normals[idx], query[:, None, :] - points[idx])
    return np.sum(w * plane, axis=1) / np.sum(w, axis=1)


def boundary_edge_count(mesh: trimesh.Trimesh) -> int:
    return len(trimesh.grouping.group_rows(mesh.edges_sorted, require_count=1))


def largest_component(mesh: trimesh.Trimesh) -> trimesh.Trimesh:
    parts = mesh.split(only_watertight=False)
    if len(parts) <= 1:
        return mesh
    log.debug("re-mesh: %d components, keeping the largest", len(parts))
    return max(parts, key=lambda m: m.area)


def remesh_watertight(fused: FusedSurface, params: RemeshParams = RemeshParams()) -> WatertightMesh:
    '''
    remesh_watertight(): SDF from the fused points and normals -> marching cubes -> largest component

    Parameters:
    fused (FusedSurface): fused vertices with outward normals
    params (RemeshParams, optional): voxel size, neighbourhood, band width, strictness (Default: RemeshParams())

    Dependencies: scipy.spatial.cKDTree, skimage.measure.marching_cubes, trimesh
    '''
    if len(fused) < 4:
        raise OpenScan("too few fused points to re-mesh", n_points=len(fused))
    pts = np.asarray(fused.vertices, dtype=float)
    nrm = np.asarray(fused.normals, dtype=float)
    nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    v = params.voxel
    pad = (params.band + 2) * v
    origin = pts.min(axis=0) - pad
    dims = np.ceil((pts.max(axis=0) + pad - origin) / v).astype(int) + 1

    axes = [origin[a] + v * np.arange(dims[a]) for a in range(3)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    tree = cKDTree(pts)
    nearest, _ = tree.query(grid, k=1)
    band = nearest <= params.band * v

    sdf = np.full(len(grid), params.band * v)
    sdf[band] = signed_distance(grid[band], pts, nrm, params.k, tree)
    sdf = sdf.reshape(dims)
    band = band.reshape(dims)
    if sdf[band].min() >= 0 or sdf[band].max() <= 0:
        raise OpenScan("signed distance has no zero crossing", n_points=len(pts))

    # a cube is evaluated only when all eight corners carry a band value
    cubes = band[:-1, :-1, :-1].copy()
    for dx, dy, dz in itertools.product((0, 1), repeat=3):
        cubes &= band[dx:dx + dims[0] - 1, dy:dy + dims[1] - 1, dz:dz + dims[2] - 1]
    cube_mask = np.zeros_like(band)
    cube_mask[:-1, :-1, :-1] = cubes

    verts, faces, _, _ = measure.marching_cubes(sdf, level=0.0, spacing=(v, v, v), mask=cube_mask,
                                                gradient_direction="ascent")
    mesh = trimesh.Trimesh(verts + origin, faces, process=True)
    mesh = largest_component(mesh)
    trimesh.repair.fix_normals(mesh)

    open_edges = boundary_edge_count(mesh)
    watertight = bool(mesh.is_watertight)
    if not watertight:
        log.warning("re-meshed surface is open (%d boundary edges); the scan does not cover the object", open_edges)
        if params.strict:
            raise OpenScan("re-meshed surface is not watertight", boundary_edges=open_edges)
    log.info("re-mesh: %d vertices, %d faces, watertight=%s", len(mesh.vertices), len(mesh.faces), watertight)
    return WatertightMesh(mesh, v, watertight, open_edges)
