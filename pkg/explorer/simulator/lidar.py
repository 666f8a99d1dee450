"""Simulated 2D lidar over the ground-truth map and scan integration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..grid_map import Cell, CellState, OccupancyGrid, apply_ray_update
from ..models.schemas import LogOddsParams, SensorConfig
from ..pose_graph import Pose
from ..raycast import bresenham


@dataclass(frozen=True)
class Beam:
    """One lidar return.

    ``cells`` runs from the robot cell to the terminal cell; the terminal cell
    is the obstacle when ``hit`` and is left untouched by integration otherwise.
    """

    angle: float
    range: float
    hit: bool
    cells: Tuple[Cell, ...]


def _centre_distance(grid: OccupancyGrid, origin: Tuple[float, float], cell: Cell) -> float:
    wx, wy = grid.cell_to_world(cell)
    return math.hypot(wx - origin[0], wy - origin[1])


def _march(
    truth: OccupancyGrid, states: np.ndarray, line: List[Cell]
) -> Tuple[List[Cell], bool]:
    cells = [line[0]]
    for cell in line[1:]:
        if not truth.in_bounds(cell):
            return cells, False
        cells.append(cell)
        state = states[cell[1], cell[0]]
        if state == CellState.OCCUPIED:
            return cells, True
        if state == CellState.UNKNOWN:
            return cells, False
    return cells, False


def lidar_scan(
    truth: OccupancyGrid,
    pose: Pose,
    sensor: SensorConfig,
    rng: Optional[np.random.Generator] = None,
) -> List[Beam]:
    """Cast ``beam_count`` evenly spaced beams over the full circle.

    A beam stops at the first Occupied truth cell (hit), at an Unknown truth
    cell or the map edge (no hit), or at ``max_range`` (no hit). With
    ``hit_noise_std > 0`` each hit range is perturbed; a short reading moves
    the hit onto the last cell inside the perturbed range.
    """

    robot = truth.world_to_cell(pose.x, pose.y)
    if not truth.in_bounds(robot):
        raise ValueError(f"pose {pose} is outside the truth map")
    origin = truth.cell_to_world(robot)
    states = truth.states()
    noisy = sensor.hit_noise_std > 0.0
    if noisy and rng is None:
        raise ValueError("a random generator is required for a noisy sensor")

    beams: List[Beam] = []
    for k in range(sensor.beam_count):
        angle = 2.0 * math.pi * k / sensor.beam_count
        end = truth.world_to_cell(
            origin[0] + sensor.max_range * math.cos(angle),
            origin[1] + sensor.max_range * math.sin(angle),
        )
        cells, hit = _march(truth, states, bresenham(robot, end))
        distance = _centre_distance(truth, origin, cells[-1])
        if noisy:
            measured = distance + float(rng.normal(0.0, sensor.hit_noise_std))
            if hit and measured < distance:
                kept = [c for c in cells if _centre_distance(truth, origin, c) <= measured]
                cells = kept if len(kept) >= 2 else cells[:2]
                distance = max(measured, 0.0)
        beams.append(
            Beam(angle=angle, range=min(distance, sensor.max_range), hit=hit, cells=tuple(cells))
        )
    return beams


def integrate_scan(
    belief: OccupancyGrid, beams: List[Beam], params: LogOddsParams | None = None
) -> None:
    """Apply the inverse sensor model along every beam."""

    for beam in beams:
        apply_ray_update(belief, beam.cells, beam.hit, params)
