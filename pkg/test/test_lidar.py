import math

import numpy as np
import pytest

from explorer.grid_map import CellState, OccupancyGrid, coverage_percent
from explorer.models.schemas import SensorConfig
from explorer.pose_graph import Pose
from explorer.simulator.lidar import integrate_scan, lidar_scan
from explorer.worlds import closed_room

from .conftest import make_grid


def _pose_at(grid: OccupancyGrid, cell) -> Pose:
    return Pose(*grid.cell_to_world(cell))


def test_open_space_beams_reach_max_range():
    grid = OccupancyGrid(cells=np.zeros((41, 41), dtype=np.int16), resolution=0.1)
    sensor = SensorConfig(max_range=1.0, beam_count=72)

    beams = lidar_scan(grid, _pose_at(grid, (20, 20)), sensor)

    assert len(beams) == 72
    assert not any(beam.hit for beam in beams)
    for beam in beams:
        assert 1.0 - 1.5 * grid.resolution <= beam.range <= 1.0
        assert beam.cells[0] == (20, 20)


def test_beam_angles_are_evenly_spaced():
    grid = closed_room()
    beams = lidar_scan(grid, _pose_at(grid, (7, 7)), SensorConfig(beam_count=8))
    assert [b.angle for b in beams] == pytest.approx([k * math.pi / 4 for k in range(8)])


def test_wall_three_meters_east_is_hit():
    cells = np.zeros((21, 100), dtype=np.int16)
    cells[:, 40] = 100
    grid = OccupancyGrid(cells=cells, resolution=0.1)

    beams = lidar_scan(grid, _pose_at(grid, (10, 10)), SensorConfig(max_range=5.0, beam_count=4))

    east = beams[0]
    assert east.hit
    assert east.cells[-1] == (40, 10)
    assert east.range == pytest.approx(3.0)
    assert not beams[2].hit


def test_closed_box_every_beam_hits():
    grid = closed_room(15)
    beams = lidar_scan(grid, _pose_at(grid, (7, 7)), SensorConfig(max_range=5.0))

    assert all(beam.hit for beam in beams)
    for beam in beams:
        assert grid.state(beam.cells[-1]) == CellState.OCCUPIED
        assert all(grid.state(c) == CellState.FREE for c in beam.cells[:-1])


def test_unknown_truth_cell_stops_beam_without_hit():
    grid = make_grid(["....?....."])
    beams = lidar_scan(grid, _pose_at(grid, (0, 0)), SensorConfig(max_range=3.0, beam_count=4))

    assert not beams[0].hit
    assert beams[0].cells[-1] == (4, 0)


def test_pose_outside_map_is_rejected():
    grid = closed_room()
    with pytest.raises(ValueError):
        lidar_scan(grid, Pose(-5.0, -5.0), SensorConfig())


def test_noisy_sensor_needs_generator():
    grid = closed_room()
    with pytest.raises(ValueError):
        lidar_scan(grid, _pose_at(grid, (7, 7)), SensorConfig(hit_noise_std=0.05))


def test_noise_only_shortens_hit_beams(rng):
    grid = closed_room(15)
    pose = _pose_at(grid, (7, 7))
    exact = lidar_scan(grid, pose, SensorConfig(max_range=5.0))

    noisy = lidar_scan(grid, pose, SensorConfig(max_range=5.0, hit_noise_std=0.1), rng)

    for clean, beam in zip(exact, noisy):
        assert beam.hit
        assert len(beam.cells) >= 2
        assert beam.cells == clean.cells[: len(beam.cells)]


def test_single_scan_maps_closed_room():
    truth = closed_room(15)
    belief = truth.blank_like()

    integrate_scan(belief, lidar_scan(truth, _pose_at(truth, (7, 7)), SensorConfig(max_range=5.0)))

    assert coverage_percent(belief, truth) > 95.0
    states = belief.states()
    truth_states = truth.states()
    observed = states != CellState.UNKNOWN
    assert np.all(states[observed] == truth_states[observed])


def test_repeated_scans_accumulate_evidence():
    truth = closed_room(15)
    belief = truth.blank_like()
    beams = lidar_scan(truth, _pose_at(truth, (7, 7)), SensorConfig(max_range=5.0))

    integrate_scan(belief, beams)
    once = belief.log_odds.copy()
    integrate_scan(belief, beams)

    free = truth.states() == CellState.FREE
    wall = truth.states() == CellState.OCCUPIED
    assert np.all(belief.log_odds[free] <= once[free])
    assert np.all(belief.log_odds[wall] >= once[wall])
    assert belief.log_odds.min() >= -4.0 and belief.log_odds.max() <= 4.0
