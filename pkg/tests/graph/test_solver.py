import numpy as np
import pytest

from tacslam.geometry import TransformSE3, random_transform, se3_exp
from tacslam.graph import (Edge, GraphParams, NotConnected, PoseGraph, edge_error, edge_jacobians, gm_weight,
                           optimize, optimize_gnc, optimize_lm, recover_all_frame_poses)
from tacslam.tracking import TrackerState


def along_x(x):
    return TransformSE3(np.eye(3), [x, 0.0, 0.0])


def chain(n, bias=0.0):
    """Nodes on a line 1 mm apart, dead-reckoned from tracking edges that overshoot by bias."""
    g = PoseGraph()
    g.add_node(0, TransformSE3.identity())
    for k in range(1, n):
        g.add_node(k, along_x(k * (1.0 + bias)))
        g.add_edge(Edge(k - 1, k, along_x(-(1.0 + bias))))
    return g


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(0)
    Ti, Tj = random_transform(rng, max_translation=2.0), random_transform(rng, max_translation=2.0)
    edge = Edge(0, 1, random_transform(rng, max_angle=0.3, max_translation=0.5) @ Tj.inverse() @ Ti)
    e, Ji, Jj = edge_jacobians(edge, Ti, Tj)
    eps = 1e-6
    for k in range(6):
        d = np.zeros(6)
        d[k] = eps
        di = (edge_error(Ti @ se3_exp(d), Tj, edge.transform).vector
              - edge_error(Ti @ se3_exp(-d), Tj, edge.transform).vector) / (2 * eps)
        dj = (edge_error(Ti, Tj @ se3_exp(d), edge.transform).vector
              - edge_error(Ti, Tj @ se3_exp(-d), edge.transform).vector) / (2 * eps)
        assert np.allclose(di, Ji[:, k], atol=1e-5)
        assert np.allclose(dj, Jj[:, k], atol=1e-5)


def test_lm_recovers_consistent_poses_from_noisy_start():
    rng = np.random.default_rng(1)
    truth = [random_transform(rng, max_translation=5.0) for _ in range(5)]
    g = PoseGraph()
    for k, T in enumerate(truth):
        g.add_node(k, T)
    for k in range(4):
        g.add_edge(Edge(k, k + 1, truth[k + 1].inverse() @ truth[k]))
    g.add_edge(Edge(4, 1, truth[1].inverse() @ truth[4], "loop"))
    for k in range(1, 5):
        g.nodes[k] = g.nodes[k] @ se3_exp(rng.normal(0, [0.05] * 3 + [0.5] * 3))

    poses, report = optimize_lm(g)
    assert report.gauge == 0 and report.unreachable == []
    assert report.final_error < 1e-10 < report.initial_error
    for k, T in enumerate(truth):
        assert poses[k].allclose(T, 1e-6, 1e-6)


def test_loop_edge_spreads_drift():
    g = chain(5, bias=0.05)
    g.add_edge(Edge(4, 0, along_x(4.0), "loop"))
    before = abs(g.nodes[4].translation[0] - 4.0)
    poses, _ = optimize(g)
    after = abs(poses[4].translation[0] - 4.0)
    # equal weights share the 0.2 mm closure error over five edges
    assert before == pytest.approx(0.2)
    assert after == pytest.approx(0.04, abs=1e-5)
    assert poses[0].allclose(TransformSE3.identity())


def test_gnc_rejects_an_outlier_loop():
    g = chain(6)
    g.add_edge(Edge(5, 0, along_x(5.0), "loop"))
    wrong = TransformSE3.from_rotvec([0.0, 0.0, np.radians(20.0)], [5.0, 2.0, 0.0])
    g.add_edge(Edge(3, 0, wrong, "loop"))
    poses, report = optimize_gnc(g, GraphParams(solver="gnc"))
    assert report.rejected == [len(g.edges) - 1]
    for k in range(6):
        assert poses[k].allclose(along_x(k), 1e-4, 1e-3)


def test_gnc_without_loops_is_plain_lm():
    g = chain(3)
    _, report = optimize(g, GraphParams(solver="gnc"))
    assert report.rejected == []
    assert report.final_error == pytest.approx(0.0, abs=1e-12)


def test_gm_weight_limits():
    w = gm_weight(np.array([0.0, 1e6]), mu=1.0)
    assert w[0] == pytest.approx(1.0) and w[1] < 1e-6


def test_unreachable_nodes_are_reported_or_raised():
    g = chain(2)
    stray = along_x(9.0)
    g.add_node(7, stray)
    _, report = optimize_lm(g)
    assert report.unreachable == [7]
    assert g.nodes[7] is stray
    with pytest.raises(NotConnected):
        optimize_lm(g, strict=True)


def test_frame_poses_from_keyframes():
    state = TrackerState()
    rel = TransformSE3(np.eye(3), [-0.3, 0.0, 0.0])
    state.anchors = {0: (0, TransformSE3.identity()), 1: (0, rel), 2: (9, TransformSE3.identity())}
    g = PoseGraph()
    g.add_node(0, along_x(2.0))
    poses = recover_all_frame_poses(g, state)
    assert sorted(poses) == [0, 1]
    assert poses[1].allclose(along_x(2.3))


def circle(rng, n=16, radius=10.0):
    """Keyframes around a circle; tracking edges carry noise, and the nodes start dead-reckoned from them."""
    truth = [TransformSE3.from_rotvec([0.0, 0.0, 2 * np.pi * k / n]) @ along_x(radius) for k in range(n)]
    g = PoseGraph()
    g.add_node(0, truth[0])
    for k in range(1, n):
        meas = truth[k].inverse() @ truth[k - 1] @ se3_exp(rng.normal(0, [np.radians(0.2)] * 3 + [0.02] * 3))
        g.add_node(k, g.nodes[k - 1] @ meas.inverse())
        g.add_edge(Edge(k - 1, k, meas))
    for i, j in ((15, 0), (8, 0), (12, 4)):
        g.add_edge(Edge(i, j, truth[j].inverse() @ truth[i], "loop"))
    return g, truth


def max_translation_error(poses, truth):
    return max(np.linalg.norm(poses[k].translation - T.translation) for k, T in enumerate(truth))


def test_gnc_rejects_three_false_loops_on_a_circle():
    g, truth = circle(np.random.default_rng(5))
    clean, _ = optimize_lm(g.copy())

    wrong = TransformSE3.from_rotvec([0.0, 0.0, np.radians(25.0)], [3.0, -2.0, 0.0])
    false_edges = []
    for i, j in ((10, 2), (13, 6), (14, 1)):
        false_edges.append(len(g.edges))
        g.add_edge(Edge(i, j, wrong @ truth[j].inverse() @ truth[i], "loop"))
    poses, report = optimize_gnc(g, GraphParams(solver="gnc"))

    assert report.rejected == false_edges
    assert max_translation_error(poses, truth) < 2.0 * max_translation_error(clean, truth)


def test_gnc_matches_lm_without_outliers():
    g, _ = circle(np.random.default_rng(6))
    lm, _ = optimize_lm(g.copy())
    gnc, report = optimize_gnc(g, GraphParams(solver="gnc"))
    assert report.rejected == []
    for k, T in lm.items():
        assert gnc[k].allclose(T, 1e-6, 1e-6)
