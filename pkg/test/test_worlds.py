import numpy as np
import pytest

from explorer.grid_map import CellState, reachable_region
from explorer.worlds import (
    WORLDS,
    closed_room,
    corridor,
    multi_room,
    pick_start,
    world_by_name,
)


def test_closed_room_layout():
    room = closed_room(15)
    states = room.states()

    assert room.shape == (15, 15)
    assert room.resolution == pytest.approx(0.2)
    assert np.all(states[0, :] == CellState.OCCUPIED)
    assert np.all(states[:, -1] == CellState.OCCUPIED)
    assert np.all(states[1:-1, 1:-1] == CellState.FREE)


def test_corridor_dimensions():
    grid = corridor(length=20, width=3)
    assert (grid.width, grid.height) == (22, 5)
    assert np.count_nonzero(grid.states() == CellState.FREE) == 60


def test_multi_room_is_one_connected_free_space():
    world = multi_room()
    free = world.states() == CellState.FREE

    region = reachable_region(world, pick_start(world, 0))

    assert world.shape == (60, 60)
    assert np.array_equal(region & free, free)
    assert not np.any(world.states() == CellState.UNKNOWN)


def test_multi_room_is_deterministic():
    assert multi_room() == multi_room()


@pytest.mark.parametrize("factory", [lambda: closed_room(2), lambda: multi_room(20)])
def test_undersized_worlds_rejected(factory):
    with pytest.raises(ValueError):
        factory()


def test_pick_start_respects_clearance():
    world = multi_room()
    states = world.states()
    for seed in range(20):
        x, y = pick_start(world, seed, clearance=2)
        for dy in range(-2, 3):
            for dx in range(-2, 3):
                if dx * dx + dy * dy <= 4:
                    assert states[y + dy, x + dx] == CellState.FREE


def test_pick_start_is_seeded():
    world = multi_room()
    assert pick_start(world, 7) == pick_start(world, 7)
    assert len({pick_start(world, seed) for seed in range(10)}) > 1


def test_pick_start_falls_back_to_any_free_cell():
    assert pick_start(closed_room(3), 0, clearance=5) == (1, 1)


def test_world_lookup():
    assert set(WORLDS) == {"room15", "multiroom60", "corridor"}
    assert world_by_name("room15") == closed_room()
    with pytest.raises(ValueError):
        world_by_name("warehouse")
