'''
Module: meshio.py
Description: Mesh import/export (ASCII PLY, OBJ) through trimesh

Usage:
- write_mesh(): mesh -> .ply (ASCII) or .obj, chosen by suffix
- read_mesh(): .ply / .obj / .stl -> single trimesh.Trimesh
'''
# Import packages
from __future__ import annotations
import logging
from pathlib import Path
from typing import Union

import trimesh

log = logging.getLogger(__name__)

MESH_SUFFIXES = (".ply", ".obj")


def write_mesh(mesh: trimesh.Trimesh, path: Union[str, Path]) -> Path:
    '''
    write_mesh(): export mesh (vertices in mm) by file suffix

    Parameters:
    mesh (trimesh.Trimesh): mesh to write
    path (str | Path): output file, '.ply' or '.obj'
    '''
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in MESH_SUFFIXES:
        raise ValueError(f"unsupported mesh format {suffix!r}; use one of {MESH_SUFFIXES}")
    path.parent.mkdir(parents=True, exist_ok=True)
    if suffix == ".ply":
        data = trimesh.exchange.ply.export_ply(mesh, encoding="ascii", include_attributes=False)
        path.write_bytes(data)
    else:
        path.write_text(trimesh.exchange.obj.export_obj(mesh, include_normals=True, include_texture=False))
    log.info("wrote %s (%d vertices, %d faces)", path, len(mesh.vertices), len(mesh.faces))
    return path


def read_mesh(path: Union[str, Path]) -> trimesh.Trimesh:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return trimesh.load(path, force="mesh", process=False)
