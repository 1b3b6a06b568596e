import numpy as np
import pytest

from tacslam.geometry import TransformSE3
from tacslam.sim import (KINDS, CalibrationNet, PhotometricModel, RenderParams, Sphere, TrainParams, TrajectoryParams,
                         ball_cap_height, frame_from_rgb, generate_ball_press_dataset, ground_truth_mesh,
                         ground_truth_poses, make_trajectory, render_sequence, synthesize_sequence,
                         train_calibration)
from tacslam.surface import SensorSpec


@pytest.mark.parametrize("kind", KINDS)
def test_every_trajectory_kind_stays_on_the_surface(kind, textured):
    traj = make_trajectory(textured, TrajectoryParams(kind=kind, n_frames=40, seed=1))
    assert 0 < len(traj) <= 40
    assert traj.is_uniform(25.0)
    assert traj.in_contact.all()
    for pose in traj.poses:
        assert pose.is_valid(1e-6)
        # the gel plane sits depth mm inside the object
        assert np.linalg.norm(pose.translation) < textured.bounding_radius()


def test_line_length_and_bad_kind():
    traj = make_trajectory(Sphere(8.0), TrajectoryParams(kind="line", n_frames=11, speed=2.5))
    assert traj.path_length() == pytest.approx(10 * 2.5 / 25.0)
    with pytest.raises(ValueError):
        TrajectoryParams(kind="zigzag")


def test_breaks_lift_the_sensor(spec, textured):
    traj = make_trajectory(textured, TrajectoryParams(kind="band", n_frames=12, breaks=((4, 3),)))
    assert traj.in_contact.tolist() == [True] * 4 + [False] * 3 + [True] * 5
    frames, _ = synthesize_sequence(textured, traj, spec, params=RenderParams(noise_deg=0.0))
    assert [f.is_empty() for f in frames] == [False] * 4 + [True] * 3 + [False] * 5


def test_ground_truth_is_relative_to_first_frame(textured):
    traj = make_trajectory(textured, TrajectoryParams(kind="walk", n_frames=5, seed=3))
    gt = ground_truth_poses(traj)
    assert gt[0].allclose(TransformSE3.identity())
    assert (traj.poses[0] @ gt[3]).allclose(traj.poses[3], 1e-9, 1e-9)
    mesh = ground_truth_mesh(Sphere(4.0), traj, resolution=0.3)
    # the object origin moves to where frame 0 says it is
    assert np.allclose(mesh.vertices.mean(axis=0), traj.poses[0].inverse().translation, atol=0.1)


def test_rendering_is_independent_of_workers(spec, textured):
    traj = make_trajectory(textured, TrajectoryParams(kind="line", n_frames=4))
    one = render_sequence(textured, traj, spec, seed=9, workers=1)
    many = render_sequence(textured, traj, spec, seed=9, workers=3)
    for a, b in zip(one, many):
        assert np.array_equal(a.normal, b.normal)


def test_photometric_path_matches_normal_path(spec, textured):
    traj = make_trajectory(textured, TrajectoryParams(kind="line", n_frames=2))
    params = RenderParams(noise_deg=0.0)
    direct, _ = synthesize_sequence(textured, traj, spec, params=params)
    rgb, _ = synthesize_sequence(textured, traj, spec, use_photometric=True, params=params)
    for a, b in zip(direct, rgb):
        assert np.allclose(a.normal[a.mask], b.normal[a.mask], atol=1e-6)
        assert (a.mask & b.mask).sum() / (a.mask | b.mask).sum() > 0.8


def test_ball_cap_profile():
    u = np.array([10.0, 13.0, 30.0])
    h = ball_cap_height(u, np.full(3, 10.0), (10.0, 10.0), radius_px=20.0, depth_px=4.0)
    assert h[0] == pytest.approx(4.0)
    assert 0.0 < h[1] < 4.0 and h[2] == 0.0


def test_calibration_learns_gradients():
    spec = SensorSpec(width=64, height=48, pitch=0.1)
    with pytest.raises(ValueError):
        generate_ball_press_dataset(spec, ball_diameter=0.0)
    data = generate_ball_press_dataset(spec, ball_diameter=3.0, n_images=6, seed=2, depth_range=(0.2, 0.5))
    assert data.n_images == 6 and len(data) > 0
    assert set(np.unique(data.image_ids)) == set(range(6))
    train, hold = data.split(0.2, seed=0)
    assert set(np.unique(train.image_ids)).isdisjoint(np.unique(hold.image_ids))

    net, report = train_calibration(data, TrainParams(epochs=60, hidden=(16, 16), seed=0))
    assert net.layer_sizes == [5, 16, 16, 2]
    assert np.isfinite(report.holdout_mse) and report.n_holdout > 0
    flat = PhotometricModel().flat_image(spec.shape)
    normals = net.predict_normals(flat, spec)
    assert normals.shape == spec.shape + (3,)
    assert np.allclose(np.linalg.norm(normals, axis=-1), 1.0)
    frame = frame_from_rgb(0, 0.0, flat, spec, net)
    assert frame.is_empty()
    with pytest.raises(ValueError):
        train_calibration(data.subset(np.array([], dtype=int)))


def test_weight_gradient_matches_central_differences():
    rng = np.random.default_rng(11)
    sizes = [5, 6, 4, 2]
    net = CalibrationNet([rng.normal(scale=0.6, size=(a, b)) for a, b in zip(sizes, sizes[1:])],
                         [rng.normal(scale=0.3, size=b) for b in sizes[1:]])
    params = net.weights + net.biases
    eps = 1e-6
    for _ in range(100):
        x = rng.normal(size=(1, 5))
        up = rng.normal(size=(1, 2))
        grad_w, grad_b = net.weight_gradient(x, up)
        analytic = np.concatenate([g.ravel() for g in grad_w + grad_b])
        numeric = []
        for p in params:
            flat = p.reshape(-1)
            for k in range(flat.size):
                keep = flat[k]
                flat[k] = keep + eps
                hi = np.sum(up * net.forward(x))
                flat[k] = keep - eps
                lo = np.sum(up * net.forward(x))
                flat[k] = keep
                numeric.append((hi - lo) / (2 * eps))
        numeric = np.asarray(numeric)
        assert np.linalg.norm(analytic - numeric) <= 1e-4 * np.linalg.norm(numeric)


def test_weight_gradient_sums_over_the_batch():
    rng = np.random.default_rng(3)
    net = CalibrationNet([rng.normal(size=(5, 3)), rng.normal(size=(3, 2))], [np.zeros(3), np.zeros(2)])
    X = rng.normal(size=(4, 5))
    grad_w, grad_b = net.weight_gradient(X)
    rows = [net.weight_gradient(X[k:k + 1]) for k in range(4)]
    assert np.allclose(grad_w[0], sum(r[0][0] for r in rows))
    assert np.allclose(grad_b[1], [4.0, 4.0])
