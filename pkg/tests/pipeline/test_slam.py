import json

import numpy as np
import pytest

from tacslam.geometry import TransformSE3, pose_difference
from tacslam.pipeline import (GtsHeader, GtsReader, NoContactFrames, PayloadKind, PipelineConfig, UnreadableInput,
                              frames_from_gts, merge, reconstruct_from_graph, run_offline, run_online, run_slam,
                              run_report, trajectory_errors, trajectory_mae, write_gts, write_outputs)
from tacslam.sim import RenderParams, render_frame

D = TransformSE3.from_rotvec([0.0, 0.0, np.radians(10.0)], [0.8, 0.3, 0.0])
LIFT = TransformSE3(np.eye(3), [0.0, 0.0, 5.0])


def shift(tx, ty=0.0):
    return TransformSE3(np.eye(3), [tx, ty, 0.0])


@pytest.fixture
def two_sessions(base_pose):
    """Sensor poses of a press, a lift-off and a second press over the same patch, rotated and shifted."""
    return [base_pose, base_pose @ shift(0.1), base_pose @ LIFT, base_pose @ D, base_pose @ D @ shift(0.05)]


@pytest.fixture
def frames(two_sessions, press):
    return [press(pose, k, k / 25.0) for k, pose in enumerate(two_sessions)]


@pytest.fixture
def cfg(spec):
    return merge(PipelineConfig().with_sensor(spec), {"run": {"remesh": False}})


def test_offline_run_joins_sessions_with_a_loop(frames, spec, cfg):
    result = run_offline(frames, spec, cfg)
    assert result.n_frames == 5 and result.n_sessions == 2
    assert sorted(result.graph.nodes) == [0, 1, 3]
    assert result.loops and all(lp.i == 3 and lp.j in (0, 1) for lp in result.loops)
    assert result.report.unreachable == []

    assert sorted(result.frame_poses) == [0, 1, 3, 4]
    assert result.frame_poses[0].allclose(TransformSE3.identity())
    for f, truth in ((1, shift(0.1)), (3, D), (4, D @ shift(0.05))):
        deg, mm = pose_difference(result.frame_poses[f], truth)
        assert deg < 1.0 and mm < 0.1, f
    assert result.timestamps[4] == pytest.approx(4 / 25.0)


def test_without_loops_the_second_session_stays_apart(frames, spec, cfg):
    result = run_offline(frames, spec, merge(cfg, {"run": {"loops": False}}))
    assert result.loops == [] and result.candidates == 0
    assert result.report.unreachable == [3]
    assert sorted(result.frame_poses) == [0, 1]
    assert run_report(result)["omitted_frames"] == {"no_contact": [2], "unreachable": [3, 4]}


def test_online_run_tracks_the_same_frames(frames, spec, cfg):
    result = run_online(frames, spec, cfg)
    assert result.mode == "online"
    assert result.n_frames == 5 and result.n_sessions == 2
    assert sorted(result.frame_poses) == [0, 1, 3, 4]
    assert result.max_backlog >= 0 and result.tracking_fps > 0


@pytest.fixture
def repeated_presses(base_pose, press):
    """Eight presses a little apart, each followed by a lift-off, so every press opens a session."""
    frames, truth = [], {}
    for k in range(8):
        pose = base_pose @ shift(0.1 * k, 0.05 * k)
        frames.append(press(pose, 2 * k, 2 * k / 25.0))
        frames.append(press(pose @ LIFT, 2 * k + 1, (2 * k + 1) / 25.0))
        truth[2 * k] = pose
    return frames, truth


def test_slow_loop_stage_skips_keyframes_but_not_frames(repeated_presses, spec, cfg):
    frames, truth = repeated_presses
    online = run_online(frames, spec, merge(cfg, {"run": {"loop_delay": 0.5}}))
    offline = run_offline(frames, spec, cfg)

    assert online.n_frames == 16
    assert online.skipped and set(online.skipped) <= set(online.graph.nodes)
    assert sorted(online.graph.nodes) == sorted(offline.graph.nodes) == sorted(truth)
    # frames are admitted at the sensor rate and tracking keeps up with it
    assert online.tracking_fps >= 0.9 * spec.frame_rate

    on = trajectory_mae(trajectory_errors(online.frame_poses, truth))
    off = trajectory_mae(trajectory_errors(offline.frame_poses, truth))
    for key, value in on.items():
        assert value <= 2.0 * off[key] + 0.01, key


def test_sequence_without_contact(two_sessions, press, spec, cfg):
    lifted = [press(two_sessions[2], k) for k in range(3)]
    with pytest.raises(NoContactFrames):
        run_offline(lifted, spec, cfg)


@pytest.fixture
def gts_sequence(tmp_path, two_sessions, textured, spec):
    renders = [render_frame(textured, pose, spec, RenderParams(noise_deg=0.0)) for pose in two_sessions]
    return write_gts(tmp_path / "seq.gts", GtsHeader.for_spec(spec, PayloadKind.NORMALS),
                     [(k / 25.0, r.normal) for k, r in enumerate(renders)])


def test_slam_outputs_and_reconstruction(gts_sequence, tmp_path, cfg):
    reader = GtsReader(gts_sequence)
    result = run_slam(frames_from_gts(reader, cfg), reader.header.sensor(cfg.sensor), cfg)
    assert result.fused is not None and len(result.fused) > 0 and result.mesh is None

    paths = write_outputs(result, tmp_path / "out")
    assert {"trajectory", "graph", "fused", "report"} <= set(paths) and "mesh" not in paths
    report = json.loads(paths["report"].read_text())
    assert report["frames"] == 5 and report["tracked_frames"] == 4 and report["sessions"] == 2
    assert report["loops"]["accepted"] == len(result.loops)
    assert "tracking" in report["seconds"]

    fused, mesh = reconstruct_from_graph(reader, result.graph, cfg)
    assert mesh is None and len(fused) > 0
    assert set(np.unique(fused.source_keyframe)) <= set(result.graph.nodes)


def test_rgb_sequence_needs_a_net(tmp_path, spec, cfg):
    path = write_gts(tmp_path / "rgb.gts", GtsHeader.for_spec(spec, PayloadKind.RGB),
                     [(0.0, np.zeros(spec.shape + (3,), dtype=np.uint8))])
    with pytest.raises(UnreadableInput, match="calibration net"):
        frames_from_gts(GtsReader(path), cfg)
