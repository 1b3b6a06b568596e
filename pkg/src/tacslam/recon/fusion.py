'''
Module: fusion.py
Description: Fast fusion of coverage keyframes into one surface by boundary-weighted reprojection averaging

Usage:
[Weights]
- sigmoid_weight(): 1 / (1 + exp(-(d - d0) / s))
- boundary_weights(): per-pixel weight from the distance to the contact boundary

[Patches]
- SurfacePatch: averaged grid of 3D points of one keyframe + validity + grid triangulation
- FusedSurface: merged mesh with per-vertex provenance
- find_overlaps(): keyframe pairs sharing surface cells
- fuse_patch(): average one keyframe's points with every overlapping keyframe
- fuse_fast(): all patches, merged
- FastFusion: online variant re-fusing only patches whose poses moved
'''
# Import packages
from __future__ import annotations
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
import trimesh
from scipy import ndimage

from ..errors import TacSlamError
from ..geometry import TransformSE3, pose_difference
from ..loop import cell_keys
from ..surface import SensorSpec
from ..tracking import Keyframe, bilinear_sample

log = logging.getLogger(__name__)


class NoPoses(TacSlamError):
    """Raised when fusion is asked for before any keyframe pose exists."""


@dataclass(frozen=True)
class FusionParams:
    d0: float = 6.0                 # px
    s: float = 2.0                  # px
    max_edge_factor: float = 3.0    # triangles with an edge longer than this x pitch are dropped
    cell_size: float = 0.25         # mm, overlap discovery
    refresh_translation: float = 0.01   # mm
    refresh_rotation_deg: float = 0.05


# ---------- Weights ----------

def sigmoid_weight(d: np.ndarray, d0: float = 6.0, s: float = 2.0) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-(np.asarray(d, dtype=float) - d0) / s))


def boundary_weights(mask: np.ndarray, d0: float = 6.0, s: float = 2.0) -> np.ndarray:
    """Sigmoid of the Euclidean distance (px) to the nearest non-contact pixel; zero outside contact."""
    d = ndimage.distance_transform_edt(mask)
    return np.where(mask, sigmoid_weight(d, d0, s), 0.0)


# ---------- Types ----------

@dataclass(frozen=True, eq=False)
class SurfacePatch:
    keyframe: int
    points: np.ndarray          # (H, W, 3) object frame, mm
    normals: np.ndarray         # (H, W, 3) outward unit normals, object frame
    valid: np.ndarray           # (H, W)
    weights: np.ndarray         # (H, W) summed fusion weight
    contributors: np.ndarray    # (H, W) number of keyframes averaged
    faces: np.ndarray           # (F, 3) indices into the flattened grid

    def vertex_ids(self) -> np.ndarray:
        return np.flatnonzero(self.valid.ravel())


@dataclass(frozen=True, eq=False)
class FusedSurface:
    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    source_keyframe: np.ndarray
    n_contributors: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("fused surface contains non-finite vertices")

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def mesh(self) -> trimesh.Trimesh:
        return trimesh.Trimesh(self.vertices, self.faces, vertex_normals=self.normals, process=False)


# ---------- Patches ----------

def grid_faces(valid: np.ndarray, points: np.ndarray, max_edge: float) -> np.ndarray:
    '''
    grid_faces(): two triangles per 2x2 block of valid pixels, wound so the normal faces +z of the sensor;
    triangles with an edge longer than max_edge (mm) are dropped
    '''
    H, W = valid.shape
    idx = np.arange(H * W).reshape(H, W)
    a, b = idx[:-1, :-1], idx[:-1, 1:]
    c, d = idx[1:, :-1], idx[1:, 1:]
    va, vb = valid[:-1, :-1], valid[:-1, 1:]
    vc, vd = valid[1:, :-1], valid[1:, 1:]
    tris = np.concatenate([np.stack([a[va & vb & vc], b[va & vb & vc], c[va & vb & vc]], axis=1),
                           np.stack([b[vb & vd & vc], d[vb & vd & vc], c[vb & vd & vc]], axis=1)])
    if len(tris) == 0:
        return np.zeros((0, 3), dtype=int)
    p = points.reshape(-1, 3)[tris]
    edges = np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2)
    return tris[edges.max(axis=1) <= max_edge]


def _global_points(kf: Keyframe, pose: TransformSE3, spec: SensorSpec) -> np.ndarray:
    u, v = spec.pixel_grid()
    return pose.apply(spec.lift(u, v, kf.frame.height))


def find_overlaps(keyframes: Sequence[Keyframe], poses: dict[int, TransformSE3], spec: SensorSpec,
                  cell_size: float = 0.25, footprints: Optional[Mapping[int, np.ndarray]] = None) -> dict[int, list[int]]:
    '''
    find_overlaps(): keyframe id -> other keyframes whose contact footprints share a surface cell

    Parameters:
    keyframes (sequence of Keyframe): keyframes to pair up
    poses (dict): keyframe id -> object-frame pose
    spec (SensorSpec): sensor geometry
    cell_size (float, optional): cell edge in mm for footprints computed here (Default: 0.25)
    footprints (dict, optional): keyframe id -> cell keys, as kept by CoverageSet.footprints() (Default: computed)
    '''
    cells = {}
    for kf in keyframes:
        if footprints is not None and kf.id in footprints:
            cells[kf.id] = set(footprints[kf.id].tolist())
            continue
        pts, _ = kf.frame.lift(spec)
        cells[kf.id] = set(cell_keys(poses[kf.id].apply(pts), cell_size).tolist()) if len(pts) else set()
    ids = [kf.id for kf in keyframes]
    return {k: [o for o in ids if o != k and not cells[k].isdisjoint(cells[o])] for k in ids}


def fuse_patch(kf: Keyframe, others: Sequence[Keyframe], poses: dict[int, TransformSE3], spec: SensorSpec,
               params: FusionParams = FusionParams(), weight_maps: Optional[dict[int, np.ndarray]] = None) -> SurfacePatch:
    '''
    fuse_patch(): weighted mean of kf's contact points and their reprojections into overlapping keyframes

    Parameters:
    kf (Keyframe): source keyframe
    others (sequence of Keyframe): overlapping keyframes
    poses (dict): keyframe id -> object-frame pose
    spec (SensorSpec): sensor geometry
    params (FusionParams, optional): weights/triangulation settings (Default: FusionParams())
    weight_maps (dict, optional): cached boundary weights per keyframe (Default: computed)
    '''
    weight_maps = {} if weight_maps is None else weight_maps

    def _w(frame_kf: Keyframe) -> np.ndarray:
        if frame_kf.id not in weight_maps:
            weight_maps[frame_kf.id] = boundary_weights(frame_kf.frame.mask, params.d0, params.s)
        return weight_maps[frame_kf.id]

    T = poses[kf.id]
    mask = kf.frame.mask
    v, u = np.nonzero(mask)
    own = _global_points(kf, T, spec)[v, u]
    w_own = _w(kf)[v, u]
    acc = own * w_own[:, None]
    wsum = w_own.copy()
    count = np.ones(len(v), dtype=int)

    H, W = spec.shape
    for o in others:
        To = poses[o.id]
        uo, vo = spec.project(To.inverse().apply(own))
        inb = (uo >= 0) & (uo <= W - 1) & (vo >= 0) & (vo <= H - 1)
        hit = np.zeros(len(v), dtype=bool)
        hit[inb] = o.frame.mask[np.rint(vo[inb]).astype(int), np.rint(uo[inb]).astype(int)]
        if not hit.any():
            continue
        ho, _, _ = bilinear_sample(o.frame.height, uo[hit], vo[hit])
        q = To.apply(spec.lift(uo[hit], vo[hit], ho))
        wo = _w(o)[np.rint(vo[hit]).astype(int), np.rint(uo[hit]).astype(int)]
        acc[hit] += q * wo[:, None]
        wsum[hit] += wo
        count[hit] += 1

    points = np.zeros(spec.shape + (3,))
    weights = np.zeros(spec.shape)
    contributors = np.zeros(spec.shape, dtype=int)
    ok = wsum > 0
    valid = np.zeros(spec.shape, dtype=bool)
    valid[v[ok], u[ok]] = True
    points[v[ok], u[ok]] = acc[ok] / wsum[ok, None]
    weights[v, u] = wsum
    contributors[v, u] = count
    normals = -kf.frame.normal @ T.rotation.T
    faces = grid_faces(valid, points, params.max_edge_factor * spec.pitch)
    return SurfacePatch(kf.id, points, normals, valid, weights, contributors, faces)


def merge_patches(patches: Sequence[SurfacePatch]) -> FusedSurface:
    verts, faces, normals, weights, source, count = [], [], [], [], [], []
    offset = 0
    for p in patches:
        ids = p.vertex_ids()
        remap = np.full(p.valid.size, -1, dtype=int)
        remap[ids] = np.arange(len(ids)) + offset
        verts.append(p.points.reshape(-1, 3)[ids])
        normals.append(p.normals.reshape(-1, 3)[ids])
        weights.append(p.weights.ravel()[ids])
        count.append(p.contributors.ravel()[ids])
        source.append(np.full(len(ids), p.keyframe))
        faces.append(remap[p.faces])
        offset += len(ids)
    if not patches:
        return FusedSurface(np.zeros((0, 3)), np.zeros((0, 3), dtype=int), np.zeros((0, 3)),
                            np.zeros(0), np.zeros(0, dtype=int), np.zeros(0, dtype=int))
    return FusedSurface(np.concatenate(verts), np.concatenate(faces).astype(int), np.concatenate(normals),
                        np.concatenate(weights), np.concatenate(source), np.concatenate(count))


def fuse_fast(keyframes: Sequence[Keyframe], poses: dict[int, TransformSE3], spec: SensorSpec,
              params: FusionParams = FusionParams(), overlaps: Optional[dict[int, list[int]]] = None,
              footprints: Optional[Mapping[int, np.ndarray]] = None) -> FusedSurface:
    '''
    fuse_fast(): fuse every keyframe that has a pose into one surface

    Parameters:
    keyframes (sequence of Keyframe): coverage keyframes
    poses (dict): optimized keyframe poses
    spec (SensorSpec): sensor geometry
    params (FusionParams, optional): weights/triangulation settings (Default: FusionParams())
    overlaps (dict, optional): precomputed keyframe overlaps (Default: from surface cells)
    footprints (dict, optional): coverage-set cell keys per keyframe, used for the overlaps (Default: None)
    '''
    kfs = [kf for kf in keyframes if kf.id in poses and not kf.frame.is_empty()]
    if not kfs:
        raise NoPoses("no keyframe with an optimized pose to fuse")
    if overlaps is None:
        overlaps = find_overlaps(kfs, poses, spec, params.cell_size, footprints)
    by_id = {kf.id: kf for kf in kfs}
    cache: dict[int, np.ndarray] = {}
    patches = [fuse_patch(kf, [by_id[o] for o in overlaps.get(kf.id, []) if o in by_id], poses, spec, params, cache)
               for kf in kfs]
    fused = merge_patches(patches)
    log.info("fused %d keyframes into %d vertices / %d faces", len(kfs), len(fused), len(fused.faces))
    return fused


class FastFusion:
    """Online fusion cache: patches are rebuilt only when their pose, a partner's pose or the partner set changes."""

    def __init__(self, spec: SensorSpec, params: FusionParams = FusionParams()):
        self.spec = spec
        self.params = params
        self._patches: dict[int, SurfacePatch] = {}
        self._poses: dict[int, TransformSE3] = {}
        self._partners: dict[int, list[int]] = {}
        self._weights: dict[int, np.ndarray] = {}
        self.rebuilt = 0

    def _moved(self, k: int, poses: dict[int, TransformSE3]) -> bool:
        if k not in self._poses:
            return True
        rot, trans = pose_difference(self._poses[k], poses[k])
        return trans > self.params.refresh_translation or rot > self.params.refresh_rotation_deg

    def update(self, keyframes: Sequence[Keyframe], poses: dict[int, TransformSE3],
               footprints: Optional[Mapping[int, np.ndarray]] = None) -> FusedSurface:
        kfs = [kf for kf in keyframes if kf.id in poses and not kf.frame.is_empty()]
        if not kfs:
            raise NoPoses("no keyframe with an optimized pose to fuse")
        by_id = {kf.id: kf for kf in kfs}
        overlaps = find_overlaps(kfs, poses, self.spec, self.params.cell_size, footprints)
        moved = {k for k in by_id if self._moved(k, poses)}
        for k in list(self._patches):
            if k not in by_id:
                del self._patches[k]
                self._weights.pop(k, None)
        for k, kf in by_id.items():
            partners = overlaps[k]
            stale = (k in moved or k not in self._patches or partners != self._partners.get(k)
                     or any(o in moved for o in partners))
            if stale:
                self._patches[k] = fuse_patch(kf, [by_id[o] for o in partners], poses, self.spec,
                                              self.params, self._weights)
                self._partners[k] = partners
                self.rebuilt += 1
        for k in moved:
            self._poses[k] = poses[k]
        return merge_patches([self._patches[kf.id] for kf in kfs])
