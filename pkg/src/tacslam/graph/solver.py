'''
Module: solver.py
Description: Pose-graph optimization (sparse Levenberg-Marquardt, GNC with Geman-McClure weights)

Usage:
- SolveReport: iterations, initial/final error, residual norms, rejected and unreachable nodes/edges
- edge_jacobians(): d e / d(delta_i, delta_j) for right perturbations T <- T exp(delta)
- optimize_lm(): weighted sparse LM with the gauge node fixed
- optimize_gnc(): graduated non-convexity over loop edges, final binary-weighted LM
- optimize(): dispatch on GraphParams.solver
- recover_all_frame_poses(): frame poses from optimized keyframe poses and tracker anchors
'''
# Import packages
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.stats import chi2

from ..geometry import TransformSE3, adjoint, jl_inv, jr_inv, se3_exp
from ..tracking import TrackerState
from .posegraph import Edge, GraphParams, NotConnected, PoseGraph, edge_error

log = logging.getLogger(__name__)

GM_THRESHOLD = float(chi2.ppf(0.99, 6))     # c^2 of the Geman-McClure surrogate


@dataclass
class SolveReport:
    iterations: int = 0
    initial_error: float = 0.0
    final_error: float = 0.0
    residuals: list[float] = field(default_factory=list)     # whitened norm per edge
    rejected: list[int] = field(default_factory=list)        # edge indices (GNC)
    unreachable: list[int] = field(default_factory=list)     # node ids
    gauge: Optional[int] = None
    weights: list[float] = field(default_factory=list)


def edge_jacobians(edge: Edge, T_i: TransformSE3, T_j: TransformSE3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    edge_jacobians(): (e, J_i, J_j) with J_i = Jr^-1(e) and J_j = -Jl^-1(e) Ad(That^-1)
    '''
    e = edge_error(T_i, T_j, edge.transform).vector
    return e, jr_inv(e), -jl_inv(e) @ adjoint(edge.transform.inverse())


def _cost(graph: PoseGraph, edges: list[int], weights: np.ndarray, L: np.ndarray) -> float:
    return float(sum(w * np.sum((L * graph.error(graph.edges[k]).vector) ** 2) for k, w in zip(edges, weights)))


def _linearize(graph: PoseGraph, edges: list[int], weights: np.ndarray, L: np.ndarray,
               col: dict[int, int]) -> tuple[sparse.csr_matrix, np.ndarray]:
    rows, cols, vals = [], [], []
    r = np.zeros(6 * len(edges))
    for n, (k, w) in enumerate(zip(edges, weights)):
        edge = graph.edges[k]
        e, Ji, Jj = edge_jacobians(edge, graph.nodes[edge.i], graph.nodes[edge.j])
        s = np.sqrt(w) * L
        r[6 * n:6 * n + 6] = s * e
        for node, J in ((edge.i, Ji), (edge.j, Jj)):
            if node not in col:
                continue
            block = s[:, None] * J
            rr, cc = np.meshgrid(np.arange(6) + 6 * n, np.arange(6) + 6 * col[node], indexing="ij")
            rows.append(rr.ravel())
            cols.append(cc.ravel())
            vals.append(block.ravel())
    shape = (6 * len(edges), 6 * len(col))
    if not rows:
        return sparse.csr_matrix(shape), r
    J = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
    return J.tocsr(), r


def _active(graph: PoseGraph) -> tuple[list[int], dict[int, int], list[int]]:
    """Edges and free-node columns of the gauge component, plus unreachable nodes."""
    reach = graph.reachable()
    edges = [k for k, e in enumerate(graph.edges) if e.i in reach and e.j in reach]
    free = sorted(k for k in reach if k != graph.gauge)
    return edges, {k: n for n, k in enumerate(free)}, sorted(set(graph.nodes) - reach)


def optimize_lm(graph: PoseGraph, params: GraphParams = GraphParams(), weights: Optional[dict[int, float]] = None,
                strict: bool = False) -> tuple[dict[int, TransformSE3], SolveReport]:
    '''
    optimize_lm(): minimize sum_k w_k |e_k|^2_Sigma over the gauge component; updates graph.nodes in place

    Parameters:
    graph (PoseGraph): graph to solve (warm-started from its current poses)
    params (GraphParams, optional): covariance + LM settings (Default: GraphParams())
    weights (dict, optional): edge index -> weight (Default: all 1)
    strict (bool, optional): raise NotConnected instead of reporting unreachable nodes (Default: False)

    Dependencies: scipy.sparse, scipy.sparse.linalg.spsolve
    '''
    report = SolveReport(gauge=graph.gauge)
    if not graph.nodes:
        return {}, report
    edges, col, unreachable = _active(graph)
    report.unreachable = unreachable
    if unreachable:
        if strict:
            raise NotConnected(f"{len(unreachable)} nodes unreachable from gauge {graph.gauge}", nodes=unreachable)
        log.warning("pose graph: %d nodes unreachable from gauge %d left unchanged: %s",
                    len(unreachable), graph.gauge, unreachable)

    L = params.sqrt_information
    w = np.array([1.0 if weights is None else weights.get(k, 1.0) for k in edges])
    cost = _cost(graph, edges, w, L)
    report.initial_error = cost
    lam = params.lambda_init

    it = 0
    while it < params.max_iterations and col and cost > 0.0:
        it += 1
        J, r = _linearize(graph, edges, w, L, col)
        H = (J.T @ J).tocsr()
        g = J.T @ r
        improved = False
        while lam < 1e12:
            A = H + lam * sparse.diags(H.diagonal())
            delta = spsolve(A.tocsc(), -g)
            if not np.all(np.isfinite(delta)):
                lam *= params.lambda_factor
                continue
            saved = dict(graph.nodes)
            for k, n in col.items():
                graph.nodes[k] = graph.nodes[k] @ se3_exp(delta[6 * n:6 * n + 6])
            new_cost = _cost(graph, edges, w, L)
            if new_cost < cost:
                lam /= params.lambda_factor
                improved = True
                break
            graph.nodes.clear()
            graph.nodes.update(saved)
            lam *= params.lambda_factor
        if not improved:
            break
        decrease = (cost - new_cost) / cost
        cost = new_cost
        log.debug("LM iteration %d: error %.6g (lambda %.1e)", it, cost, lam)
        if decrease < params.rel_tol:
            break

    report.iterations = it
    report.final_error = cost
    report.residuals = [float(np.linalg.norm(L * graph.error(e).vector)) for e in graph.edges]
    report.weights = [1.0 if weights is None else float(weights.get(k, 1.0)) for k in range(len(graph.edges))]
    log.info("pose graph solved: %d iterations, error %.4g -> %.4g (%d nodes, %d edges)",
             it, report.initial_error, report.final_error, len(graph.nodes), len(graph.edges))
    return dict(graph.nodes), report


def gm_weight(r2: np.ndarray, mu: float, c2: float = GM_THRESHOLD) -> np.ndarray:
    """Geman-McClure GNC weight for squared whitened residuals."""
    return (mu * c2 / (r2 + mu * c2)) ** 2


def optimize_gnc(graph: PoseGraph, params: GraphParams = GraphParams(),
                 strict: bool = False) -> tuple[dict[int, TransformSE3], SolveReport]:
    '''
    optimize_gnc(): graduated non-convexity on loop edges (tracking edges keep weight 1)

    Parameters:
    graph (PoseGraph): graph to solve; updated in place
    params (GraphParams, optional): covariance, LM and GNC settings (Default: GraphParams())
    strict (bool, optional): raise NotConnected for unreachable nodes (Default: False)
    '''
    loops = graph.loop_edges()
    _, first = optimize_lm(graph, params, strict=strict)
    if not loops:
        return dict(graph.nodes), first

    L = params.sqrt_information
    c2 = GM_THRESHOLD

    def _r2() -> np.ndarray:
        return np.array([np.sum((L * graph.error(graph.edges[k]).vector) ** 2) for k in loops])

    r2 = _r2()
    mu = max(2.0 * float(r2.max()) / c2, 1.0)
    total_it = first.iterations
    while True:
        w = gm_weight(r2, mu, c2)
        _, rep = optimize_lm(graph, params, dict(zip(loops, w)))
        total_it += rep.iterations
        r2 = _r2()
        if mu <= 1.0:
            break
        mu = max(mu / params.gnc_factor, 1.0)

    w = gm_weight(r2, 1.0, c2)
    binary = {k: (1.0 if wk >= params.gnc_reject else 0.0) for k, wk in zip(loops, w)}
    _, report = optimize_lm(graph, params, binary)
    report.iterations += total_it
    report.initial_error = first.initial_error
    report.rejected = [k for k, b in binary.items() if b == 0.0]
    if report.rejected:
        log.info("GNC rejected %d loop edges: %s", len(report.rejected),
                 [(graph.edges[k].i, graph.edges[k].j) for k in report.rejected])
    return dict(graph.nodes), report


def optimize(graph: PoseGraph, params: GraphParams = GraphParams(),
             strict: bool = False) -> tuple[dict[int, TransformSE3], SolveReport]:
    if params.solver == "gnc":
        return optimize_gnc(graph, params, strict)
    return optimize_lm(graph, params, strict=strict)


def recover_all_frame_poses(graph: PoseGraph, state: TrackerState) -> dict[int, TransformSE3]:
    '''
    recover_all_frame_poses(): T_f = T_k (fT_k)^-1 for every tracked frame whose keyframe is a graph node
    '''
    return {f: graph.nodes[k] @ rel.inverse()
            for f, (k, rel) in sorted(state.anchors.items()) if k in graph.nodes}
