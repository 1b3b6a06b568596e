'''
src/tacslam/surface/
├── __init__.py             Initializer
├── types.py                SensorSpec, SurfaceParams, GradientMap, Frame
└── maps.py                 Poisson height, curvature, contact mask, normal/gradient conversion
'''
from .types import (SensorSpec, SurfaceParams, GradientMap, Frame,
                    NormalMap, HeightMap, CurvatureMap, ContactMask)
from .maps import (DegenerateNormal, divergence, laplacian5, integrate_height, compute_curvature,
                   compute_contact_mask, normals_from_gradients, gradients_from_normals,
                   frame_from_normals)

__all__ = [
    "SensorSpec", "SurfaceParams", "GradientMap", "Frame",
    "NormalMap", "HeightMap", "CurvatureMap", "ContactMask",
    "DegenerateNormal", "divergence", "laplacian5", "integrate_height", "compute_curvature",
    "compute_contact_mask", "normals_from_gradients", "gradients_from_normals", "frame_from_normals",
]
