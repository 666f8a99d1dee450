"""Global grid planner: Dijkstra over the belief map with obstacle inflation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from ..grid_map import Cell, CellState, OccupancyGrid
from ..models.schemas import PlannerParams

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)
# Half of the 8-neighbourhood; the graph is undirected.
_STEPS = ((1, 0, 1.0), (0, 1, 1.0), (1, 1, _SQRT2), (-1, 1, _SQRT2))


def _disk(radius: int) -> np.ndarray:
    offsets = np.arange(-radius, radius + 1)
    return offsets[None, :] ** 2 + offsets[:, None] ** 2 <= radius**2


def traversable_mask(
    belief: OccupancyGrid, inflation_radius: int, start: Cell | None = None
) -> np.ndarray:
    """Free or Unknown belief cells farther than ``inflation_radius`` from any Occupied cell.

    ``start`` is always traversable so a robot standing inside the inflation
    band can still leave it.
    """

    states = belief.states()
    occupied = states == CellState.OCCUPIED
    if inflation_radius > 0 and occupied.any():
        blocked = ndimage.binary_dilation(occupied, structure=_disk(inflation_radius))
    else:
        blocked = occupied
    mask = ~blocked
    if start is not None and belief.in_bounds(start):
        mask[start[1], start[0]] = True
    return mask


def _grid_graph(mask: np.ndarray) -> coo_matrix:
    height, width = mask.shape
    index = np.arange(height * width).reshape(height, width)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    for dx, dy, cost in _STEPS:
        x_lo, x_hi = max(0, -dx), width - max(0, dx)
        y_hi = height - dy
        src = (slice(0, y_hi), slice(x_lo, x_hi))
        dst = (slice(dy, height), slice(x_lo + dx, x_hi + dx))
        both = mask[src] & mask[dst]
        rows.append(index[src][both])
        cols.append(index[dst][both])
        weights.append(np.full(int(both.sum()), cost))
    size = height * width
    return coo_matrix(
        (np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    )


@dataclass
class CostField:
    """Single-source shortest-path costs over the traversable cells."""

    start: Cell
    width: int
    height: int
    costs: np.ndarray
    predecessors: np.ndarray

    def cost(self, cell: Cell) -> float:
        x, y = cell
        if not (0 <= x < self.width and 0 <= y < self.height):
            return math.inf
        return float(self.costs[y, x])

    def reachable(self, cell: Cell) -> bool:
        return math.isfinite(self.cost(cell))

    def path_to(self, goal: Cell) -> Optional[List[Cell]]:
        if not self.reachable(goal):
            return None
        start_index = self.start[1] * self.width + self.start[0]
        node = goal[1] * self.width + goal[0]
        flat = self.predecessors.ravel()
        reversed_path = [node]
        while node != start_index:
            node = int(flat[node])
            if node < 0:
                return None
            reversed_path.append(node)
        return [(n % self.width, n // self.width) for n in reversed(reversed_path)]

    def best_in_region(self, centre: Cell, tolerance: float) -> Optional[Cell]:
        """Cheapest reachable cell within ``tolerance`` cells of ``centre``.

        Ties resolve in row-major order.
        """

        r = int(math.floor(tolerance))
        cx, cy = centre
        best: Optional[Cell] = None
        best_cost = math.inf
        for y in range(max(0, cy - r), min(self.height, cy + r + 1)):
            for x in range(max(0, cx - r), min(self.width, cx + r + 1)):
                if (x - cx) ** 2 + (y - cy) ** 2 > tolerance**2:
                    continue
                cost = float(self.costs[y, x])
                if cost < best_cost:
                    best, best_cost = (x, y), cost
        return best


def cost_field(belief: OccupancyGrid, start: Cell, params: PlannerParams) -> CostField:
    if not belief.in_bounds(start):
        raise ValueError(f"start cell {start} is outside the grid")
    mask = traversable_mask(belief, params.inflation_radius, start)
    graph = _grid_graph(mask)
    start_index = start[1] * belief.width + start[0]
    costs, predecessors = dijkstra(
        graph.tocsr(), directed=False, indices=start_index, return_predecessors=True
    )
    return CostField(
        start=start,
        width=belief.width,
        height=belief.height,
        costs=costs.reshape(belief.shape),
        predecessors=predecessors.reshape(belief.shape),
    )


def path_length(path: List[Cell]) -> float:
    """Length of an 8-connected cell path in cells."""

    total = 0.0
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        total += _SQRT2 if x0 != x1 and y0 != y1 else 1.0
    return total


def plan_path(
    belief: OccupancyGrid,
    start: Cell,
    goal: Cell,
    params: PlannerParams | None = None,
) -> Optional[List[Cell]]:
    """Shortest 8-connected path from ``start`` to ``goal`` or ``None`` if unreachable."""

    params = params or PlannerParams()
    if start == goal:
        return [start]
    if not belief.in_bounds(goal):
        return None
    return cost_field(belief, start, params).path_to(goal)
