'''
src/tacslam/graph/
├── __init__.py             Initializer
├── posegraph.py            PoseGraph, Edge, edge_error, VERTEX/EDGE text format
└── solver.py               sparse Levenberg-Marquardt, GNC, frame pose recovery
'''
from .posegraph import (GraphParams, Edge, PoseGraph, NotConnected, edge_error, read_graph, write_graph)
from .solver import (SolveReport, edge_jacobians, optimize_lm, optimize_gnc, optimize, gm_weight,
                     recover_all_frame_poses)

__all__ = [
    "GraphParams", "Edge", "PoseGraph", "NotConnected", "edge_error", "read_graph", "write_graph",
    "SolveReport", "edge_jacobians", "optimize_lm", "optimize_gnc", "optimize", "gm_weight",
    "recover_all_frame_poses",
]
