'''
src/tacslam/sim/
├── __init__.py             Initializer
├── objects.py              implicit/mesh objects, heightfield rasterization, object factory
├── photometric.py          RGB illumination model and its ideal inverse
├── render.py               tactile frame renderer (gel smoothing, normal noise)
├── calibration.py          ball-press dataset, calibration MLP
├── trajectory.py           scan trajectories (line, walk, band, figure8, spiral)
├── sequence.py             rendered sequences, ground-truth poses and mesh
└── cli.py                  command line interface (simulate, calibrate)
'''
from .objects import (InvalidObjectSpec, SyntheticObject, ImplicitObject, Sphere, BumpySphere, Superellipsoid,
                      MeshObject, make_object)
from .photometric import PhotometricModel
from .render import NoContact, RenderParams, RenderResult, perturb_normals, render_frame
from .calibration import (BALL_DIAMETER, CalibrationDiverged, TrainParams, BallPressDataset, CalibrationNet,
                          TrainReport, ball_cap_height, ball_cap_gradients, generate_ball_press_dataset,
                          angular_error_deg, train_calibration)
from .trajectory import KINDS, TrajectoryParams, ScanTrajectory, contact_pose, make_trajectory
from .sequence import (frame_rng, render_sequence, rgb_delta, frame_from_rgb, ground_truth_poses,
                       ground_truth_mesh, synthesize_sequence)

__all__ = [
    "InvalidObjectSpec", "SyntheticObject", "ImplicitObject", "Sphere", "BumpySphere", "Superellipsoid",
    "MeshObject", "make_object",
    "PhotometricModel",
    "NoContact", "RenderParams", "RenderResult", "perturb_normals", "render_frame",
    "BALL_DIAMETER", "CalibrationDiverged", "TrainParams", "BallPressDataset", "CalibrationNet",
    "TrainReport", "ball_cap_height", "ball_cap_gradients", "generate_ball_press_dataset",
    "angular_error_deg", "train_calibration",
    "KINDS", "TrajectoryParams", "ScanTrajectory", "contact_pose", "make_trajectory",
    "frame_rng", "render_sequence", "rgb_delta", "frame_from_rgb", "ground_truth_poses",
    "ground_truth_mesh", "synthesize_sequence",
]
