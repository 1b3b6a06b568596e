import numpy as np
import pytest

from tacslam.geometry import TransformSE3, random_transform
from tacslam.graph import Edge, GraphParams, PoseGraph, edge_error, read_graph, write_graph


def test_edge_error_zero_when_consistent():
    rng = np.random.default_rng(0)
    Ti, Tj = random_transform(rng), random_transform(rng)
    assert np.allclose(edge_error(Ti, Tj, Tj.inverse() @ Ti).vector, 0.0, atol=1e-9)
    assert edge_error(Ti, Tj, TransformSE3.identity()).norm() > 0


def test_edge_and_params_validation():
    with pytest.raises(ValueError):
        Edge(2, 2, TransformSE3.identity())
    with pytest.raises(ValueError):
        Edge(0, 1, TransformSE3.identity(), source="odometry")
    with pytest.raises(ValueError):
        GraphParams(solver="dogleg")
    with pytest.raises(ValueError):
        GraphParams(trans_sigma=0.0)


def test_joining_components_moves_the_later_one():
    rng = np.random.default_rng(1)
    X = random_transform(rng, max_translation=3.0)
    P = random_transform(rng, max_translation=3.0)

    g = PoseGraph()
    g.add_node(0, P)
    g.add_node(5, TransformSE3.identity())
    g.add_node(6, TransformSE3(np.eye(3), [1.0, 0.0, 0.0]))
    g.add_edge(Edge(5, 6, g.nodes[6].inverse() @ g.nodes[5]))
    g.add_edge(Edge(6, 0, X, "loop"))
    assert g.nodes[0] is P
    for e in g.edges:
        assert g.error(e).norm() < 1e-9
    assert g.unreachable() == []
    assert g.loop_edges() == [1]


def test_add_edge_rules():
    g = PoseGraph()
    g.add_node(0, TransformSE3.identity())
    with pytest.raises(ValueError):
        g.add_node(0, TransformSE3.identity())
    with pytest.raises(KeyError):
        g.add_edge(Edge(0, 1, TransformSE3.identity()))


def test_reachability_from_gauge():
    g = PoseGraph()
    for k in (3, 1, 2):
        g.add_node(k, TransformSE3.identity())
    g.add_edge(Edge(1, 2, TransformSE3.identity()))
    assert g.gauge == 1
    assert g.reachable() == {1, 2}
    assert g.unreachable() == [3]


def test_text_format_keeps_nodes_and_edges(tmp_path):
    rng = np.random.default_rng(2)
    g = PoseGraph()
    for k in range(3):
        g.add_node(k, random_transform(rng))
    g.add_edge(Edge(0, 1, random_transform(rng)))
    g.add_edge(Edge(2, 0, random_transform(rng), "loop"))
    back = read_graph(write_graph(g, tmp_path / "out" / "graph.txt"))
    assert sorted(back.nodes) == [0, 1, 2]
    for k in range(3):
        assert back.nodes[k].allclose(g.nodes[k], 1e-9, 1e-9)
    assert [(e.i, e.j, e.source) for e in back.edges] == [(0, 1, "tracking"), (2, 0, "loop")]


def test_read_graph_reports_bad_lines(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("# header\nVERTEX 0 0 0 0 0 0 0 1\nVERTEX 1 0 0\n")
    with pytest.raises(ValueError, match=":3:"):
        read_graph(bad)
    dangling = tmp_path / "dangling.txt"
    dangling.write_text("VERTEX 0 0 0 0 0 0 0 1\nEDGE 0 4 0 0 0 0 0 0 1\n")
    with pytest.raises(ValueError, match="missing vertex"):
        read_graph(dangling)
