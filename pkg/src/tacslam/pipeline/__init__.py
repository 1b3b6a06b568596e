'''
src/tacslam/pipeline/
├── __init__.py             Initializer
├── config.py               PipelineConfig sections, YAML/user-store layering
├── formats.py              .gts sequences, trajectory text, calibration net container
├── stages.py               bounded queues, non-blocking sender, stage threads
├── slam.py                 offline/online SLAM runs, outputs, reconstruct from a graph
├── evaluate.py             trajectory MAE, Chamfer/normal cosine, false loops, report
└── cli.py                  command line interface (slam, reconstruct, evaluate, concat)
'''
from .config import (ConfigError, RunParams, PipelineConfig, from_dict, to_dict, dump_yaml, load_config,
                     merge, set_key)
from .formats import (UnreadableInput, FrameMismatch, PayloadKind, GtsHeader, GtsWriter, GtsReader, write_gts,
                      read_gts, concat_gts, write_trajectory, read_trajectory, write_net, read_net)
from .stages import END, NonBlockingSender, Stage, drain, join_all, put_latest
from .slam import (NoContactFrames, SlamBackend, SlamResult, frames_from_gts, load_net, run_offline, run_online,
                   run_slam, finalize, reconstruct_from_graph, run_report, write_outputs)
from .evaluate import (MetricsReport, trajectory_errors, trajectory_mae, false_loops, evaluate, report_table,
                       write_report, plot_trajectories)

__all__ = [
    "ConfigError", "RunParams", "PipelineConfig", "from_dict", "to_dict", "dump_yaml", "load_config",
    "merge", "set_key",
    "UnreadableInput", "FrameMismatch", "PayloadKind", "GtsHeader", "GtsWriter", "GtsReader", "write_gts",
    "read_gts", "concat_gts", "write_trajectory", "read_trajectory", "write_net", "read_net",
    "END", "NonBlockingSender", "Stage", "drain", "join_all", "put_latest",
    "NoContactFrames", "SlamBackend", "SlamResult", "frames_from_gts", "load_net", "run_offline", "run_online",
    "run_slam", "finalize", "reconstruct_from_graph", "run_report", "write_outputs",
    "MetricsReport", "trajectory_errors", "trajectory_mae", "false_loops", "evaluate", "report_table",
    "write_report", "plot_trajectories",
]
