"""Closed-loop exploration: sense, detect, score, select, navigate, record."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..frontier import Blacklist, detect_clusters, filter_blacklist, frontier_mask
from ..grid_map import Cell, CellState, OccupancyGrid, apply_ray_update, save_map
from ..metrics import ExplorationTrace, record_tick
from ..models.schemas import ExplorationConfig, Method
from ..pose_graph import EdgeKind, Pose, PoseGraph
from ..raycast import bresenham
from ..utility import CandidateScore, score_candidates, select
from ..worlds import pick_start
from .lidar import integrate_scan, lidar_scan
from .planner import cost_field, path_length

logger = logging.getLogger(__name__)


class Status(str, Enum):
    COMPLETED = "completed"
    STUCK = "stuck"
    BUDGET_EXHAUSTED = "budget_exhausted"


class Motion(str, Enum):
    ARRIVED = "arrived"
    BLOCKED = "blocked"
    GOAL_OBSERVED = "goal_observed"


@dataclass
class SimState:
    truth: OccupancyGrid
    belief: OccupancyGrid
    robot_pose: Pose
    graph: PoseGraph
    config: ExplorationConfig
    rng: np.random.Generator
    blacklist: Blacklist = field(default_factory=Blacklist)
    tick: int = 0
    distance: float = 0.0
    since_node: float = 0.0

    @property
    def robot_cell(self) -> Cell:
        return self.belief.world_to_cell(self.robot_pose.x, self.robot_pose.y)


@dataclass
class ExplorationOutcome:
    status: Status
    trace: ExplorationTrace
    start: Cell


def scan(state: SimState) -> None:
    beams = lidar_scan(state.truth, state.robot_pose, state.config.sensor, state.rng)
    integrate_scan(state.belief, beams, state.config.log_odds)


def _line_of_sight(belief: OccupancyGrid, a: Cell, b: Cell) -> bool:
    states = belief.states()
    return all(states[y, x] != CellState.OCCUPIED for x, y in bresenham(a, b))


def add_pose_node(state: SimState) -> int:
    """Append a node at the robot pose with its odometry and loop-closure edges."""

    graph, noise = state.graph, state.config.utility.noise
    new_id = graph.add_node(state.robot_pose)
    if new_id == 0:
        return new_id
    graph.add_edge(new_id - 1, new_id, noise.odometry, EdgeKind.ODOMETRY)
    here = state.robot_cell
    radius = state.config.utility.loop_closure_radius
    for node in graph.nodes[: new_id - 1]:
        if node.pose.distance_to(state.robot_pose) > radius:
            continue
        there = state.belief.world_to_cell(node.pose.x, node.pose.y)
        if _line_of_sight(state.belief, here, there):
            graph.add_edge(node.id, new_id, noise.loop, EdgeKind.LOOP_CLOSURE)
            logger.debug("Loop closure %d <-> %d", node.id, new_id)
    return new_id


def goal_dissolved(belief: OccupancyGrid, centroid: Cell, tolerance: float) -> bool:
    """True once no frontier cell remains within ``tolerance`` cells of ``centroid``."""

    mask = frontier_mask(belief)
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        return True
    d2 = (xs - centroid[0]) ** 2 + (ys - centroid[1]) ** 2
    return bool(np.all(d2 > tolerance**2))


def sealed_in(belief: OccupancyGrid, start: Cell) -> bool:
    """True when no cell other than ``start`` is Free in the belief."""

    free = belief.states() == CellState.FREE
    free[start[1], start[0]] = False
    return not free.any()


def advance_along(state: SimState, path: List[Cell], target: Cell | None = None) -> Motion:
    """Follow ``path`` cell by cell.

    A refresh scan precedes every step into a cell that is Unknown in the
    belief. The step is refused when the cell is Occupied in the belief or
    not Free in the truth (bump). A pose node, with a scan, is added every
    ``node_spacing`` meters. Motion stops early once ``target`` has been
    observed. A robot that moved scans once more on arrival unless a node
    scan was just taken there.
    """

    config = state.config
    spacing = config.utility.node_spacing
    tolerance = config.planner.goal_tolerance
    resolution = state.belief.resolution

    moved = False
    for cell in path[1:]:
        sensed = False
        if state.belief.state(cell) == CellState.UNKNOWN:
            scan(state)
            sensed = True
        if (
            state.belief.state(cell) == CellState.OCCUPIED
            or state.truth.state(cell) != CellState.FREE
        ):
            if state.belief.state(cell) != CellState.OCCUPIED:
                # Contact overrides any free evidence for the cell.
                x, y = cell
                state.belief.log_odds[y, x] = max(state.belief.log_odds[y, x], 0.0)
                apply_ray_update(state.belief, [cell], True, config.log_odds)
            logger.warning("Motion blocked at %s", cell)
            return Motion.BLOCKED
        if target is not None and sensed and goal_dissolved(state.belief, target, tolerance):
            return Motion.GOAL_OBSERVED

        current = state.robot_cell
        step = path_length([current, cell]) * resolution
        wx, wy = state.belief.cell_to_world(cell)
        heading = math.atan2(cell[1] - current[1], cell[0] - current[0])
        state.robot_pose = Pose(wx, wy, heading)
        state.distance += step
        state.since_node += step
        moved = True

        if state.since_node >= spacing - 1e-9:
            state.since_node = 0.0
            add_pose_node(state)
            scan(state)
            if target is not None and goal_dissolved(state.belief, target, tolerance):
                return Motion.GOAL_OBSERVED
    if moved and state.since_node > 0.0:
        scan(state)
    return Motion.ARRIVED


def _snapshot(state: SimState) -> None:
    config = state.config
    if not config.snapshot_every or config.snapshot_dir is None:
        return
    if state.tick % config.snapshot_every:
        return
    directory = Path(config.snapshot_dir)
    stem = f"belief_{state.tick:04d}"
    save_map(state.belief, directory / f"{stem}.pgm", directory / f"{stem}.yaml")


def run_exploration(
    truth: OccupancyGrid,
    method: Method | str,
    config: ExplorationConfig | None = None,
    seed: int = 0,
    start: Cell | None = None,
) -> ExplorationOutcome:
    """Explore ``truth`` from ``start`` until Completed, Stuck or out of budget.

    ``start`` defaults to a seeded pick among roomy Free cells. The run is a
    deterministic function of its arguments.
    """

    config = config or ExplorationConfig()
    method = Method(method)
    if start is None:
        start = pick_start(truth, seed, config.planner.inflation_radius + 1)
    if not truth.in_bounds(start) or truth.state(start) != CellState.FREE:
        raise ValueError(f"start cell {start} is not Free in the truth map")

    belief = truth.blank_like()
    belief.thresholds = config.thresholds
    state = SimState(
        truth=truth,
        belief=belief,
        robot_pose=Pose(*truth.cell_to_world(start)),
        graph=PoseGraph(),
        config=config,
        rng=np.random.default_rng(seed),
    )
    trace = ExplorationTrace(
        method=method,
        seed=seed,
        truth_start=start,
        criterion=config.utility.edge_criterion,
    )
    logger.info("Starting %s run (seed %d) at %s", method.value, seed, start)

    add_pose_node(state)
    scan(state)
    record_tick(trace, state)
    _snapshot(state)

    while True:
        if state.tick >= config.budget:
            status = Status.BUDGET_EXHAUSTED
            break
        all_clusters = detect_clusters(belief, config.min_frontier_size)
        if not all_clusters:
            if state.tick == 0 and sealed_in(belief, start):
                logger.warning("No Free cell around start %s", start)
                state.tick += 1
                record_tick(trace, state)
                status = Status.STUCK
                break
            status = Status.COMPLETED
            break
        clusters = filter_blacklist(all_clusters, state.blacklist)

        robot = state.robot_cell
        field_ = cost_field(belief, robot, config.planner)
        scores: List[CandidateScore] = score_candidates(
            belief,
            state.graph,
            state.robot_pose,
            clusters,
            config.utility,
            config.planner,
            field_,
        )
        for score in scores:
            if not score.reachable:
                logger.warning("Blacklisting unreachable frontier %s", score.centroid)
                state.blacklist.add(score.centroid, config.unreachable_blacklist_radius)

        state.tick += 1
        chosen: Optional[CandidateScore] = select(method, scores, state.blacklist)
        trace.candidates.extend((state.tick, s, s is chosen) for s in scores)
        if chosen is None:
            record_tick(trace, state)
            status = Status.STUCK
            break

        logger.debug(
            "Tick %d: %s -> %s via %d cells",
            state.tick,
            method.value,
            chosen.centroid,
            len(chosen.path),
        )
        if method == Method.FD:
            state.blacklist.add(chosen.centroid, config.fd_blacklist_radius)
        motion = advance_along(state, list(chosen.path), chosen.centroid)
        if motion == Motion.ARRIVED and not goal_dissolved(
            belief, chosen.centroid, config.planner.goal_tolerance
        ):
            state.blacklist.add(chosen.centroid, config.planner.goal_tolerance)

        record_tick(trace, state, chosen.centroid)
        _snapshot(state)

    trace.status = status.value
    trace.belief = belief
    trace.graph = state.graph
    last = trace.records[-1]
    logger.info(
        "Finished %s run (seed %d): %s after %d ticks, coverage %.1f%%",
        method.value,
        seed,
        status.value,
        state.tick,
        last.coverage_percent,
    )
    return ExplorationOutcome(status=status, trace=trace, start=start)
