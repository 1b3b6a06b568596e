'''
src/tacslam/recon/
├── __init__.py             Initializer
├── fusion.py               boundary-weighted fast fusion of coverage keyframes
├── remesh.py               signed-distance grid + marching cubes re-meshing
├── metrics.py              Chamfer distance, normal cosine distance
├── align.py                centroid/principal-axes init + point-to-plane ICP
└── meshio.py               PLY/OBJ export and import
'''
from .fusion import (NoPoses, FusionParams, SurfacePatch, FusedSurface, FastFusion, sigmoid_weight,
                     boundary_weights, grid_faces, find_overlaps, fuse_patch, merge_patches, fuse_fast)
from .remesh import OpenScan, RemeshParams, WatertightMesh, signed_distance, boundary_edge_count, remesh_watertight
from .metrics import sample_mesh, closest_on_mesh, point_to_mesh, chamfer_distance, contact_locations, normal_cosine_distance
from .align import AlignmentDiverged, initial_guesses, icp_point_to_plane, align_meshes
from .meshio import MESH_SUFFIXES, write_mesh, read_mesh

__all__ = [
    "NoPoses", "FusionParams", "SurfacePatch", "FusedSurface", "FastFusion", "sigmoid_weight",
    "boundary_weights", "grid_faces", "find_overlaps", "fuse_patch", "merge_patches", "fuse_fast",
    "OpenScan", "RemeshParams", "WatertightMesh", "signed_distance", "boundary_edge_count", "remesh_watertight",
    "sample_mesh", "closest_on_mesh", "point_to_mesh", "chamfer_distance", "contact_locations", "normal_cosine_distance",
    "AlignmentDiverged", "initial_guesses", "icp_point_to_plane", "align_meshes",
    "MESH_SUFFIXES", "write_mesh", "read_mesh",
]
