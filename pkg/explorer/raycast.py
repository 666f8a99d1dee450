"""Straight-line cell tracing and the path-entropy terms of the utility."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .grid_map import Cell, CellState, OccupancyGrid, binary_entropy
from .models.schemas import EntropyParams

__all__ = [
    "RayPath",
    "bresenham",
    "normalized_path_entropy",
    "path_cell_count",
    "path_entropy",
    "trace_path",
]


def bresenham(start: Cell, end: Cell) -> List[Cell]:
    """Integer Bresenham line from ``start`` to ``end``, both endpoints included."""

    x0, y0 = int(start[0]), int(start[1])
    x1, y1 = int(end[0]), int(end[1])
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy

    cells: List[Cell] = []
    while True:
        cells.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return cells
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


@dataclass(frozen=True)
class RayPath:
    """Cells from the robot cell to a frontier cell with their states at trace time."""

    cells: Tuple[Cell, ...]
    values: Tuple[CellState, ...]

    @property
    def length_cells(self) -> int:
        return len(self.cells)


def trace_path(grid: OccupancyGrid, robot: Cell, frontier: Cell) -> RayPath:
    """Snapshot the grid along the straight line robot -> frontier.

    The line passes through obstacles; this is a scan of cell values, not a
    visibility query.
    """

    for cell in (robot, frontier):
        if not grid.in_bounds(cell):
            raise ValueError(f"cell {cell} outside {grid.width}x{grid.height} grid")
    cells = bresenham(robot, frontier)
    states = grid.states()
    values = tuple(CellState(int(states[y, x])) for x, y in cells)
    return RayPath(cells=tuple(cells), values=values)


def _assigned_probabilities(path: RayPath, params: EntropyParams) -> np.ndarray:
    if not path.cells:
        raise ValueError("path must contain at least one cell")
    unknown = np.fromiter(
        (value == CellState.UNKNOWN for value in path.values),
        dtype=bool,
        count=len(path.values),
    )
    return np.where(unknown, params.p_unk, params.p_ofree)


def path_entropy(path: RayPath, params: EntropyParams | None = None) -> float:
    """E^n: summed binary entropy (bits) of the assigned path-cell probabilities."""

    params = params or EntropyParams()
    return float(np.sum(binary_entropy(_assigned_probabilities(path, params))))


def path_cell_count(path: RayPath) -> int:
    """K^n: number of cells on the path."""

    if not path.cells:
        raise ValueError("path must contain at least one cell")
    return path.length_cells


def normalized_path_entropy(path: RayPath, params: EntropyParams | None = None) -> float:
    return path_entropy(path, params) / path_cell_count(path)
