'''
Module: posegraph.py
Description: Keyframe pose graph (nodes T_k, relative-pose edges) and its text format

Usage:
[Types]
- GraphParams: shared edge covariance + solver settings
- Edge: (i, j, jT_i estimate, source 'tracking' | 'loop')
- PoseGraph: nodes, edges, gauge, connected components, rigid re-initialization on merge

[Residuals]
- edge_error(): log(That^-1 T_j^-1 T_i) as a Twist6

[Text format]
- write_graph(): VERTEX id tx ty tz qx qy qz qw / EDGE i j tx ty tz qx qy qz qw source
- read_graph(): inverse of write_graph; EDGE lines without a source default to tracking
'''
# Import packages
from __future__ import annotations
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from ..errors import TacSlamError
from ..geometry import TransformSE3, Twist6, se3_log

log = logging.getLogger(__name__)

SOURCES = ("tracking", "loop")


class NotConnected(TacSlamError):
    """Raised on request when some nodes are unreachable from the gauge node."""


@dataclass(frozen=True)
class GraphParams:
    rot_sigma_deg: float = 0.5
    trans_sigma: float = 0.05        # mm
    lambda_init: float = 1e-4
    lambda_factor: float = 10.0
    max_iterations: int = 100
    rel_tol: float = 1e-9
    solver: str = "lm"               # 'lm' | 'gnc'
    gnc_factor: float = 1.4
    gnc_reject: float = 0.5

    def __post_init__(self):
        if self.rot_sigma_deg <= 0 or self.trans_sigma <= 0:
            raise ValueError("edge standard deviations must be positive")
        if self.solver not in ("lm", "gnc"):
            raise ValueError(f"unknown solver {self.solver!r}; choose 'lm' or 'gnc'")

    @property
    def sqrt_information(self) -> np.ndarray:
        """Whitening diagonal 1/sigma for (omega, v)."""
        return np.concatenate([np.full(3, 1.0 / np.radians(self.rot_sigma_deg)),
                               np.full(3, 1.0 / self.trans_sigma)])


@dataclass(frozen=True, eq=False)
class Edge:
    i: int
    j: int
    transform: TransformSE3      # jT_i
    source: str = "tracking"

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"self edge on node {self.i}")
        if self.source not in SOURCES:
            raise ValueError(f"edge source must be one of {SOURCES}, got {self.source!r}")


def edge_error(T_i: TransformSE3, T_j: TransformSE3, T_hat: TransformSE3) -> Twist6:
    '''
    edge_error(): log(That^-1 T_j^-1 T_i); zero iff the predicted relative pose equals the estimate
    '''
    return se3_log(T_hat.inverse() @ T_j.inverse() @ T_i)


@dataclass
class PoseGraph:
    nodes: dict[int, TransformSE3] = field(default_factory=dict)
    edges: list[Edge] = field(default_factory=list)

    @property
    def gauge(self) -> Optional[int]:
        return min(self.nodes) if self.nodes else None

    def __len__(self) -> int:
        return len(self.nodes)

    def add_node(self, k: int, pose: TransformSE3) -> None:
        if k in self.nodes:
            raise ValueError(f"node {k} already in the graph")
        self.nodes[k] = pose

    def neighbours(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {k: set() for k in self.nodes}
        for e in self.edges:
            adj[e.i].add(e.j)
            adj[e.j].add(e.i)
        return adj

    def component(self, start: int, adj: Optional[dict[int, set[int]]] = None) -> set[int]:
        adj = self.neighbours() if adj is None else adj
        seen = {start}
        todo = deque([start])
        while todo:
            for n in adj[todo.popleft()]:
                if n not in seen:
                    seen.add(n)
                    todo.append(n)
        return seen

    def reachable(self) -> set[int]:
        """Nodes connected to the gauge node."""
        return self.component(self.gauge) if self.nodes else set()

    def unreachable(self) -> list[int]:
        reach = self.reachable()
        return sorted(k for k in self.nodes if k not in reach)

    def add_edge(self, edge: Edge) -> None:
        '''
        add_edge(): insert an edge; joining two components moves the one without the smaller id rigidly
        so that the new edge holds exactly
        '''
        if edge.i not in self.nodes or edge.j not in self.nodes:
            raise KeyError(f"edge {edge.i}->{edge.j} references a missing node")
        adj = self.neighbours()
        comp_i = self.component(edge.i, adj)
        if edge.j not in comp_i:
            comp_j = self.component(edge.j, adj)
            if min(comp_i) > min(comp_j):
                # move i's component: T_i' = T_j That
                X = self.nodes[edge.j] @ edge.transform @ self.nodes[edge.i].inverse()
                moved = comp_i
            else:
                X = self.nodes[edge.i] @ edge.transform.inverse() @ self.nodes[edge.j].inverse()
                moved = comp_j
            for k in moved:
                self.nodes[k] = X @ self.nodes[k]
            log.info("%s edge %d -> %d joined components; moved %d nodes", edge.source, edge.i, edge.j, len(moved))
        self.edges.append(edge)

    def error(self, edge: Edge) -> Twist6:
        return edge_error(self.nodes[edge.i], self.nodes[edge.j], edge.transform)

    def copy(self) -> "PoseGraph":
        return PoseGraph(dict(self.nodes), list(self.edges))

    def loop_edges(self) -> list[int]:
        return [n for n, e in enumerate(self.edges) if e.source == "loop"]


# Text format
def _fmt(T: TransformSE3) -> str:
    t = T.translation
    q = T.as_quaternion()
    return " ".join(f"{x:.12g}" for x in (*t, *q))


def write_graph(graph: PoseGraph, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"VERTEX {k} {_fmt(T)}" for k, T in sorted(graph.nodes.items())]
    lines += [f"EDGE {e.i} {e.j} {_fmt(e.transform)} {e.source}" for e in graph.edges]
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_pose(tokens: Iterable[str]) -> TransformSE3:
    vals = [float(x) for x in tokens]
    return TransformSE3.from_quaternion(vals[:3], vals[3:7])


def read_graph(path: Union[str, Path]) -> PoseGraph:
    '''
    read_graph(): parse the VERTEX/EDGE text format; blank lines and '#' comments are ignored
    '''
    graph = PoseGraph()
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "VERTEX" and len(tok) == 9:
                graph.nodes[int(tok[1])] = _parse_pose(tok[2:9])
            elif tok[0] == "EDGE" and len(tok) in (10, 11):
                source = tok[10] if len(tok) == 11 else "tracking"
                graph.edges.append(Edge(int(tok[1]), int(tok[2]), _parse_pose(tok[3:10]), source))
            else:
                raise ValueError(f"unrecognized record {tok[0]!r} with {len(tok)} fields")
        except ValueError as e:
            raise ValueError(f"{path}:{n}: {e}") from e
    for e in graph.edges:
        if e.i not in graph.nodes or e.j not in graph.nodes:
            raise ValueError(f"{path}: edge {e.i}->{e.j} references a missing vertex")
    return graph
