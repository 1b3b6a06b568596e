import json

import numpy as np
import pytest
import trimesh

from tacslam.geometry import TransformSE3
from tacslam.graph import Edge, PoseGraph
from tacslam.pipeline import (FrameMismatch, MetricsReport, evaluate, false_loops, plot_trajectories, report_table,
                              trajectory_errors, trajectory_mae, write_report)
from tacslam.surface import SensorSpec


def along(x, deg=0.0):
    return TransformSE3.from_rotvec([0.0, 0.0, np.radians(deg)], [x, 0.0, 0.0])


@pytest.fixture
def truth():
    return {f: along(0.5 * f, 2.0 * f) for f in range(6)}


def test_identical_trajectories_have_zero_error(truth):
    errors = trajectory_errors(truth, truth)
    assert list(errors.index) == [1, 2, 3, 4, 5]
    assert all(v == pytest.approx(0.0, abs=1e-9) for v in trajectory_mae(errors).values())


def test_errors_are_relative_to_the_first_frame(truth):
    # a global offset of the estimate is not an error
    offset = TransformSE3.from_rotvec([0.1, 0.0, 0.3], [4.0, -2.0, 1.0])
    shifted = {f: offset @ T for f, T in truth.items()}
    assert max(trajectory_mae(trajectory_errors(shifted, truth)).values()) < 1e-9

    drifted = {f: (T if f == 0 else along(1.0) @ T) for f, T in truth.items()}
    mae = trajectory_mae(trajectory_errors(drifted, truth))
    assert mae["tx"] == pytest.approx(1.0) and mae["ty"] == pytest.approx(0.0, abs=1e-9)
    assert mae["rz"] == pytest.approx(0.0, abs=1e-9)


def test_missing_ground_truth(truth):
    with pytest.raises(FrameMismatch) as e:
        trajectory_errors({**truth, 9: along(0.0)}, truth)
    assert e.value.missing == [9]
    with pytest.raises(FrameMismatch):
        trajectory_errors({}, truth)
    assert trajectory_mae(trajectory_errors({0: truth[0]}, truth)) == {
        "rx": 0.0, "ry": 0.0, "rz": 0.0, "tx": 0.0, "ty": 0.0, "tz": 0.0}


def test_false_loops_against_ground_truth(truth):
    g = PoseGraph()
    for f in (0, 3, 5):
        g.add_node(f, truth[f])
    g.add_edge(Edge(3, 0, truth[0].inverse() @ truth[3], "tracking"))
    g.add_edge(Edge(5, 0, truth[0].inverse() @ truth[5], "loop"))
    g.add_edge(Edge(5, 3, along(2.0) @ truth[3].inverse() @ truth[5], "loop"))
    assert false_loops(g, truth) == [2]
    assert false_loops(g, truth, max_mm=3.0) == []
    assert false_loops(g, {0: truth[0], 3: truth[3]}) == [1, 2]


def test_report_with_meshes(truth, tmp_path):
    mesh = trimesh.creation.icosphere(subdivisions=3, radius=4.0)
    g = PoseGraph()
    g.add_node(0, truth[0])
    run = {"loops": {"candidates": 4, "accepted": 1}, "keyframes": 3, "coverage": 2, "seconds": {"tracking": 1.5}}
    report = evaluate(truth, truth, mesh, mesh, g, run, SensorSpec(width=64, height=48, pitch=0.1),
                      align=False, samples=2000, contacts=4)
    assert report.frames == 6 and report.aligned is False
    assert report.chamfer == pytest.approx(0.0, abs=1e-6)
    assert report.ncd == pytest.approx(1.0, abs=1e-9)
    assert report.loops == {"candidates": 4, "accepted": 0, "false": 0}
    assert (report.keyframes, report.coverage) == (3, 2)
    assert report_table(report).row_count >= 6

    saved = json.loads(write_report(report, tmp_path / "out" / "metrics.json").read_text())
    assert saved["translation_mae"]["x"] == pytest.approx(0.0, abs=1e-9)
    assert saved["seconds"] == {"tracking": 1.5}


def test_report_without_meshes(truth):
    report = evaluate(truth, truth)
    assert report.chamfer is None and report.aligned is None
    assert report.loops == {"candidates": None, "accepted": None, "false": None}
    assert isinstance(report, MetricsReport) and report.keyframes is None


def test_trajectory_plot(truth, tmp_path):
    path = plot_trajectories(truth, truth, tmp_path / "traj.png")
    assert path.exists() and path.stat().st_size > 0
