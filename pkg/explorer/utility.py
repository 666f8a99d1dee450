"""Frontier scoring: spanning-tree utility, path-entropy utility and selectors.

For every frontier candidate ``n`` the scorer computes

* ``u1``: log weighted spanning-tree count of the pose graph predicted for
  travelling to ``n``;
* ``u2 = (1 - E/K) * rho + gamma``: normalized straight-line path entropy
  scaled by ``rho = 10**beta`` (``beta`` = digits of ``floor(|u1|)``) plus
  the distance decay ``gamma = exp(-lambda * dist)``;
* ``u_tot = u1 + u2``.

The three selectors implement nearest-frontier (FD), spanning-tree only
(AGS) and the combined utility.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .frontier import Blacklist, FrontierCluster
from .grid_map import Cell, OccupancyGrid
from .models.schemas import Method, PlannerParams, UtilityParams
from .pose_graph import EdgeKind, Pose, PoseGraph, log_spanning_trees
from .raycast import path_cell_count, path_entropy, trace_path
from .simulator.planner import CostField, cost_field

logger = logging.getLogger(__name__)


def decay(distance: float, lambda_decay: float = 0.6) -> float:
    if distance < 0:
        raise ValueError("distance must be non-negative")
    return math.exp(-lambda_decay * distance)


def beta_factor(u1: float) -> Tuple[int, int]:
    """(beta, rho): digit count of ``floor(|u1|)`` (at least 1) and ``10**beta``."""

    if not math.isfinite(u1):
        raise ValueError("u1 must be finite")
    beta = max(1, len(str(int(math.floor(abs(u1))))))
    return beta, 10**beta


def utility_u2(e_n: float, k_n: int, rho: float, gamma: float) -> float:
    if k_n < 1:
        raise ValueError("k_n must be at least 1")
    return (1.0 - e_n / k_n) * rho + gamma


def _resample(path: Sequence[Tuple[float, float]], spacing: float) -> List[Tuple[float, float]]:
    """Points every ``spacing`` of arc length along a polyline, start excluded."""

    points: List[Tuple[float, float]] = []
    travelled = 0.0
    next_mark = spacing
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        segment = math.hypot(x1 - x0, y1 - y0)
        while segment > 0 and travelled + segment >= next_mark - 1e-9:
            t = min(1.0, (next_mark - travelled) / segment)
            points.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
            next_mark += spacing
        travelled += segment
    return points


def predict_graph(
    graph: PoseGraph, planned_path: Sequence[Pose], params: UtilityParams
) -> PoseGraph:
    """Copy of ``graph`` extended along ``planned_path``.

    A node is hallucinated every ``node_spacing`` meters and chained to its
    predecessor with an odometry edge; each hallucinated node also gets a
    loop-closure edge to every existing node within ``loop_closure_radius``
    other than the one it is chained to.
    """

    predicted = graph.copy()
    if len(planned_path) < 2:
        return predicted
    existing = list(graph.nodes)
    odometry, loop = params.noise.odometry, params.noise.loop

    previous_id: Optional[int] = existing[-1].id if existing else None
    for x, y in _resample([(p.x, p.y) for p in planned_path], params.node_spacing):
        anchor = predicted.nodes[previous_id].pose if previous_id is not None else None
        theta = math.atan2(y - anchor.y, x - anchor.x) if anchor else 0.0
        new_id = predicted.add_node((x, y, theta))
        if previous_id is not None:
            predicted.add_edge(previous_id, new_id, odometry, EdgeKind.ODOMETRY)
        for node in existing:
            if node.id == previous_id:
                continue
            if math.hypot(node.pose.x - x, node.pose.y - y) <= params.loop_closure_radius:
                predicted.add_edge(node.id, new_id, loop, EdgeKind.LOOP_CLOSURE)
        previous_id = new_id
    return predicted


def utility_u1(predicted: PoseGraph, criterion: str = "d") -> float:
    return log_spanning_trees(predicted, criterion)  # type: ignore[arg-type]


@dataclass(frozen=True)
class CandidateScore:
    """Every intermediate quantity of one candidate's utility.

    Spanning-tree and combined utilities are ``None`` for unreachable
    candidates; entropy and distance terms are always filled in.
    """

    frontier: FrontierCluster
    e_n: float
    k_n: int
    gamma_n: float
    distance: float
    reachable: bool
    goal: Optional[Cell] = None
    path: Tuple[Cell, ...] = ()
    u1: Optional[float] = None
    beta: Optional[int] = None
    rho: Optional[int] = None
    u2: Optional[float] = None
    u_tot: Optional[float] = None
    predicted_nodes: Optional[int] = None
    predicted_edges: Optional[int] = None

    @property
    def centroid(self) -> Cell:
        return self.frontier.centroid


def score_candidates(
    grid: OccupancyGrid,
    graph: PoseGraph,
    robot_pose: Pose,
    frontiers: Iterable[FrontierCluster],
    params: UtilityParams | None = None,
    planner_params: PlannerParams | None = None,
    field: CostField | None = None,
) -> List[CandidateScore]:
    """Score every frontier in input order."""

    params = params or UtilityParams()
    planner_params = planner_params or PlannerParams()
    robot = grid.world_to_cell(robot_pose.x, robot_pose.y)
    if field is None:
        field = cost_field(grid, robot, planner_params)

    scores: List[CandidateScore] = []
    for cluster in frontiers:
        ray = trace_path(grid, robot, cluster.centroid)
        e_n = path_entropy(ray, params.entropy)
        k_n = path_cell_count(ray)
        cx, cy = grid.cell_to_world(cluster.centroid)
        distance = math.hypot(cx - robot_pose.x, cy - robot_pose.y)
        gamma = decay(distance, params.lambda_decay)

        goal = field.best_in_region(cluster.centroid, planner_params.goal_tolerance)
        path = field.path_to(goal) if goal is not None else None
        if path is None:
            scores.append(
                CandidateScore(
                    frontier=cluster,
                    e_n=e_n,
                    k_n=k_n,
                    gamma_n=gamma,
                    distance=distance,
                    reachable=False,
                )
            )
            continue

        planned = [robot_pose] + [Pose(*grid.cell_to_world(c)) for c in path[1:]]
        predicted = predict_graph(graph, planned, params)
        u1 = utility_u1(predicted, params.edge_criterion)
        beta, rho = beta_factor(u1)
        u2 = utility_u2(e_n, k_n, rho, gamma)
        scores.append(
            CandidateScore(
                frontier=cluster,
                e_n=e_n,
                k_n=k_n,
                gamma_n=gamma,
                distance=distance,
                reachable=True,
                goal=goal,
                path=tuple(path),
                u1=u1,
                beta=beta,
                rho=rho,
                u2=u2,
                u_tot=u1 + u2,
                predicted_nodes=predicted.node_count,
                predicted_edges=predicted.edge_count,
            )
        )
        logger.debug(
            "Candidate %s: E=%.4f K=%d dist=%.3f u1=%.4f u2=%.4f",
            cluster.centroid,
            e_n,
            k_n,
            distance,
            u1,
            u2,
        )
    return scores


def _row_major(score: CandidateScore) -> Tuple[int, int]:
    return score.centroid[1], score.centroid[0]


def _reachable(scores: Iterable[CandidateScore]) -> List[CandidateScore]:
    return [s for s in scores if s.reachable]


def select_proposed(scores: Iterable[CandidateScore]) -> Optional[CandidateScore]:
    """Maximum ``u_tot``; ties by smaller distance, then row-major centroid."""

    candidates = _reachable(scores)
    if not candidates:
        return None
    return min(candidates, key=lambda s: (-s.u_tot, s.distance, _row_major(s)))


def select_ags(scores: Iterable[CandidateScore]) -> Optional[CandidateScore]:
    """Maximum ``u1`` alone, same tie-breaking as :func:`select_proposed`."""

    candidates = _reachable(scores)
    if not candidates:
        return None
    return min(candidates, key=lambda s: (-s.u1, s.distance, _row_major(s)))


def select_fd(
    scores: Iterable[CandidateScore], blacklist: Blacklist | None = None
) -> Optional[CandidateScore]:
    """Nearest reachable, non-blacklisted candidate (Euclidean from the robot)."""

    candidates = [
        s
        for s in _reachable(scores)
        if blacklist is None or not blacklist.contains(s.centroid)
    ]
    if not candidates:
        return None
    return min(candidates, key=lambda s: (s.distance, _row_major(s)))


def select(
    method: Method, scores: Iterable[CandidateScore], blacklist: Blacklist | None = None
) -> Optional[CandidateScore]:
    if method == Method.FD:
        return select_fd(scores, blacklist)
    if method == Method.AGS:
        return select_ags(scores)
    return select_proposed(scores)


__all__ = [
    "CandidateScore",
    "beta_factor",
    "decay",
    "predict_graph",
    "score_candidates",
    "select",
    "select_ags",
    "select_fd",
    "select_proposed",
    "utility_u1",
    "utility_u2",
]
