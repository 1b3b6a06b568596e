'''
src/tacslam/geometry/
├── __init__.py             Initializer
├── se3.py                  SE(3)/so(3) algebra (TransformSE3, Twist6, exp/log, adjoints)
└── rigid2d.py              planar rigid transforms + least-squares fit
'''
from .se3 import (TransformSE3, Twist6, AngleNearPi, se3_exp, se3_log, so3_exp, so3_log,
                  hat, vee, adjoint, ad, jr_inv, jl_inv, pose_difference, random_transform)
from .rigid2d import Rigid2D, DegenerateFit, rigid2d_fit, rigid2d_residuals

__all__ = [
    "TransformSE3", "Twist6", "AngleNearPi", "se3_exp", "se3_log", "so3_exp", "so3_log",
    "hat", "vee", "adjoint", "ad", "jr_inv", "jl_inv", "pose_difference", "random_transform",
    "Rigid2D", "DegenerateFit", "rigid2d_fit", "rigid2d_residuals",
]
