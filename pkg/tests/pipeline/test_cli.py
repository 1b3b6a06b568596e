import argparse
import json
import os

import pytest

import tacslam.config
from tacslam.main import main
from tacslam.pipeline import GtsReader, read_trajectory
from tacslam.pipeline.cli import _cmd_concat, _cmd_evaluate, _cmd_slam, run
from tacslam.sim.cli import _cmd_simulate

SLOW = os.getenv("TACSLAM_SLOW") == "1"
SMALL_SENSOR = [("sensor.width", 64), ("sensor.height", 48), ("sensor.pitch", 0.1)]


def simulate_args(out_dir, frames=8, **kw):
    values = dict(out_dir=str(out_dir), object=None, trajectory="line", frames=frames, photometric=False,
                  workers=None, config=None, seed=1, set=list(SMALL_SENSOR))
    values.update(kw)
    return argparse.Namespace(**values)


def slam_args(sequence, out_dir, **kw):
    values = dict(sequence=str(sequence), out_dir=str(out_dir), net=None, dump_config=None, config=None, seed=None,
                  set=None, mode=None, solver=None, profile=None, loop_delay=None, no_loops=False, no_remesh=True,
                  no_realtime=True)
    values.update(kw)
    return argparse.Namespace(**values)


def evaluate_args(trajectory, gt_trajectory, **kw):
    values = dict(trajectory=str(trajectory), gt_trajectory=str(gt_trajectory), mesh=None, gt_mesh=None, graph=None,
                  run_report=None, no_align=False, samples=2000, contacts=4, report=None, plot=None,
                  config=None, seed=None, set=list(SMALL_SENSOR))
    values.update(kw)
    return argparse.Namespace(**values)


@pytest.fixture
def simulated(tmp_path):
    assert _cmd_simulate(simulate_args(tmp_path / "sim")) == 0
    return tmp_path / "sim"


def test_simulate_writes_sequence_and_ground_truth(simulated):
    header = GtsReader(simulated / "sequence.gts").header
    assert (header.width, header.height, header.count) == (64, 48, 8)
    poses, stamps = read_trajectory(simulated / "gt_trajectory.txt")
    assert sorted(poses) == list(range(8)) and stamps[1] == pytest.approx(1 / 25.0)
    assert (simulated / "gt_mesh.ply").stat().st_size > 0


def test_simulate_rejects_a_bad_object(tmp_path):
    assert _cmd_simulate(simulate_args(tmp_path / "sim", object="cube")) == 1


def test_slam_then_evaluate(simulated, tmp_path):
    out = tmp_path / "slam"
    assert _cmd_slam(slam_args(simulated / "sequence.gts", out, dump_config=str(tmp_path / "effective.yaml"))) == 0
    assert (tmp_path / "effective.yaml").exists()
    report = json.loads((out / "run_report.json").read_text())
    assert report["frames"] == 8 and report["sessions"] == 1

    metrics = tmp_path / "metrics.json"
    args = evaluate_args(out / "trajectory.txt", simulated / "gt_trajectory.txt", graph=str(out / "graph.txt"),
                         run_report=str(out / "run_report.json"), report=str(metrics))
    assert _cmd_evaluate(args) == 0
    saved = json.loads(metrics.read_text())
    assert saved["frames"] == report["tracked_frames"]
    assert max(saved["translation_mae"].values()) < 0.2
    assert saved["loops"]["false"] == 0


def test_handlers_report_unreadable_inputs(tmp_path):
    (tmp_path / "empty.gts").write_bytes(b"")
    assert _cmd_slam(slam_args(tmp_path / "empty.gts", tmp_path / "out")) == 1
    assert _cmd_evaluate(evaluate_args(tmp_path / "missing.txt", tmp_path / "missing.txt")) == 1
    assert run(argparse.Namespace()) == 1


def test_concat(simulated, tmp_path):
    seq = simulated / "sequence.gts"
    args = argparse.Namespace(inputs=[str(seq), str(seq)], out=str(tmp_path / "both.gts"))
    assert _cmd_concat(args) == 0
    assert GtsReader(tmp_path / "both.gts").header.count == 16


def test_seeded_runs_write_identical_files(tmp_path):
    for copy in ("a", "b"):
        assert _cmd_simulate(simulate_args(tmp_path / copy / "sim", seed=7)) == 0
        assert _cmd_slam(slam_args(tmp_path / copy / "sim" / "sequence.gts", tmp_path / copy / "slam")) == 0
    for name in ("sim/sequence.gts", "sim/gt_trajectory.txt", "sim/gt_mesh.ply", "slam/trajectory.txt",
                 "slam/graph.txt", "slam/fused.ply"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_config_store_commands():
    assert main(["config", "set", "--id", "tracking.k_pixels", "--info", "1200"]) == 0
    assert tacslam.config.load_config()["tracking.k_pixels"] == 1200
    assert main(["config", "del", "--id", "tracking.k_pixels"]) == 0
    assert tacslam.config.load_config() == {}


@pytest.mark.slow
@pytest.mark.skipif(not SLOW, reason="Set TACSLAM_SLOW=1 to run simulator end-to-end tests")
def test_walk_scan_end_to_end(tmp_path):
    sim = tmp_path / "sim"
    assert _cmd_simulate(simulate_args(sim, frames=120, trajectory="walk", workers=2)) == 0
    out = tmp_path / "slam"
    assert _cmd_slam(slam_args(sim / "sequence.gts", out, no_remesh=False)) == 0
    args = evaluate_args(out / "trajectory.txt", sim / "gt_trajectory.txt", mesh=str(out / "fused.ply"),
                         gt_mesh=str(sim / "gt_mesh.ply"), graph=str(out / "graph.txt"),
                         run_report=str(out / "run_report.json"), report=str(tmp_path / "metrics.json"),
                         plot=str(tmp_path / "traj.png"))
    assert _cmd_evaluate(args) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    # a walk touches one patch of the sphere, so only finiteness is checked for the mesh metrics
    assert metrics["chamfer"] is not None and metrics["chamfer"] >= 0.0
    assert -1.0 <= metrics["ncd"] <= 1.0
    assert max(metrics["translation_mae"].values()) < 0.5
    assert (tmp_path / "traj.png").exists()
