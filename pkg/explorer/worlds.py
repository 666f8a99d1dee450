"""Synthetic ground-truth environments and start-cell selection."""

from __future__ import annotations

from typing import Callable, Dict

import numpy as np
from scipy import ndimage

from .grid_map import Cell, CellState, OccupancyGrid

FREE = 0
OCCUPIED = 100


def _walled(width: int, height: int) -> np.ndarray:
    cells = np.full((height, width), FREE, dtype=np.int16)
    cells[0, :] = cells[-1, :] = OCCUPIED
    cells[:, 0] = cells[:, -1] = OCCUPIED
    return cells


def closed_room(size: int = 15, resolution: float = 0.2) -> OccupancyGrid:
    """Square room: one-cell Occupied border around a Free interior."""

    if size < 3:
        raise ValueError("room size must be at least 3 cells")
    return OccupancyGrid(cells=_walled(size, size), resolution=resolution)


def corridor(length: int = 60, width: int = 5, resolution: float = 0.2) -> OccupancyGrid:
    """Straight corridor of ``length`` x ``width`` Free cells inside a wall."""

    if length < 1 or width < 1:
        raise ValueError("corridor dimensions must be positive")
    return OccupancyGrid(cells=_walled(length + 2, width + 2), resolution=resolution)


def multi_room(size: int = 60, resolution: float = 0.2) -> OccupancyGrid:
    """Six rooms in a 3 x 2 layout joined by 4-cell doorways, with pillars."""

    if size < 30:
        raise ValueError("multi-room world needs at least 30 cells per side")
    cells = _walled(size, size)
    third, half = size // 3, size // 2
    door = 4

    def door_span(lo: int, hi: int) -> slice:
        mid = (lo + hi) // 2
        return slice(mid - door // 2, mid - door // 2 + door)

    for wx in (third, 2 * third):
        cells[:, wx] = OCCUPIED
        cells[door_span(0, half), wx] = FREE
        cells[door_span(half, size - 1), wx] = FREE
    cells[half, :] = OCCUPIED
    for lo, hi in ((0, third), (third, 2 * third), (2 * third, size - 1)):
        cells[half, door_span(lo, hi)] = FREE
    cells[0, :] = cells[-1, :] = OCCUPIED
    cells[:, 0] = cells[:, -1] = OCCUPIED

    # 2x2 pillars, one per room in the upper row and one in the lower middle room.
    upper = half + (size - half) // 2
    for px, py in (
        (third // 2, upper),
        (third + third // 2, upper + 3),
        (2 * third + third // 2, upper - 3),
        (third + third // 2, half // 2 - 3),
    ):
        cells[py : py + 2, px : px + 2] = OCCUPIED
    return OccupancyGrid(cells=cells, resolution=resolution)


def pick_start(truth: OccupancyGrid, seed: int, clearance: int = 2) -> Cell:
    """Seeded choice of a Free cell at least ``clearance`` cells from any non-Free cell.

    Falls back to any Free cell when no cell has that much room.
    """

    free = truth.states() == CellState.FREE
    if not free.any():
        raise ValueError("truth map has no Free cell")
    # Non-Free cells and the map edge both count as obstacles.
    padded = np.pad(free, 1, constant_values=False)
    distance = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    roomy = free & (distance > clearance)
    candidates = roomy if roomy.any() else free
    ys, xs = np.nonzero(candidates)
    choice = int(np.random.default_rng(seed).integers(len(xs)))
    return int(xs[choice]), int(ys[choice])


WORLDS: Dict[str, Callable[[], OccupancyGrid]] = {
    "room15": closed_room,
    "multiroom60": multi_room,
    "corridor": corridor,
}


def world_by_name(name: str) -> OccupancyGrid:
    try:
        factory = WORLDS[name]
    except KeyError as exc:
        raise ValueError(
            f"unknown world '{name}', expected one of {sorted(WORLDS)}"
        ) from exc
    return factory()
