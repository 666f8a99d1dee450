"""Frontier detection, clustering and blacklisting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .grid_map import Cell, CellState, OccupancyGrid

logger = logging.getLogger(__name__)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class FrontierCluster:
    """One 8-connected group of frontier cells."""

    cells: Tuple[Cell, ...]
    centroid: Cell

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass
class Blacklist:
    """Goal regions the robot should no longer be sent to (radius in cells)."""

    entries: List[Tuple[Cell, float]] = field(default_factory=list)

    def add(self, cell: Cell, radius: float) -> None:
        if radius < 0:
            raise ValueError("blacklist radius must be non-negative")
        self.entries.append(((int(cell[0]), int(cell[1])), float(radius)))

    def contains(self, cell: Cell) -> bool:
        return any(
            math.hypot(cell[0] - x, cell[1] - y) <= radius
            for (x, y), radius in self.entries
        )

    def __len__(self) -> int:
        return len(self.entries)


def frontier_mask(grid: OccupancyGrid) -> np.ndarray:
    """Boolean ``[y, x]`` mask of Free cells with at least one Unknown 8-neighbour."""

    states = grid.states()
    free = states == CellState.FREE
    unknown = states == CellState.UNKNOWN
    near_unknown = ndimage.binary_dilation(
        unknown, structure=_EIGHT_CONNECTED, border_value=0
    )
    return free & near_unknown


def detect_frontier_cells(grid: OccupancyGrid) -> List[Cell]:
    """Frontier cells in row-major order (by row, then column)."""

    ys, xs = np.nonzero(frontier_mask(grid))
    return [(int(x), int(y)) for y, x in zip(ys, xs)]


def _centroid(members: Sequence[Cell]) -> Cell:
    mean_x = sum(c[0] for c in members) / len(members)
    mean_y = sum(c[1] for c in members) / len(members)
    return min(
        members,
        key=lambda c: ((c[0] - mean_x) ** 2 + (c[1] - mean_y) ** 2, c[1], c[0]),
    )


def cluster_frontiers(cells: Iterable[Cell], min_size: int = 1) -> List[FrontierCluster]:
    """Group frontier cells into 8-connected clusters of at least ``min_size`` cells.

    Clusters are ordered by size (largest first), then by centroid row-major.
    """

    cells = list(cells)
    if not cells:
        return []
    xs = np.fromiter((c[0] for c in cells), dtype=np.int64, count=len(cells))
    ys = np.fromiter((c[1] for c in cells), dtype=np.int64, count=len(cells))
    x0, y0 = int(xs.min()), int(ys.min())
    mask = np.zeros((int(ys.max()) - y0 + 1, int(xs.max()) - x0 + 1), dtype=bool)
    mask[ys - y0, xs - x0] = True
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)

    grouped: dict[int, List[Cell]] = {}
    for x, y in sorted(set(cells), key=lambda c: (c[1], c[0])):
        grouped.setdefault(int(labels[y - y0, x - x0]), []).append((x, y))

    clusters = [
        FrontierCluster(cells=tuple(members), centroid=_centroid(members))
        for members in grouped.values()
        if len(members) >= min_size
    ]
    clusters.sort(key=lambda c: (-c.size, c.centroid[1], c.centroid[0]))
    logger.debug(
        "Clustered %d frontier cells into %d components (%d kept)",
        len(cells),
        count,
        len(clusters),
    )
    return clusters


def filter_blacklist(
    clusters: Iterable[FrontierCluster], blacklist: Blacklist | None
) -> List[FrontierCluster]:
    if blacklist is None or not len(blacklist):
        return list(clusters)
    return [c for c in clusters if not blacklist.contains(c.centroid)]


def detect_clusters(
    grid: OccupancyGrid, min_size: int, blacklist: Blacklist | None = None
) -> List[FrontierCluster]:
    """Detect, cluster and blacklist-filter in one call."""

    return filter_blacklist(
        cluster_frontiers(detect_frontier_cells(grid), min_size), blacklist
    )
