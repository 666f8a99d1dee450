import math
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from explorer.grid_map import (
    UNKNOWN,
    CellState,
    DimensionMismatchError,
    MapFormatError,
    OccupancyGrid,
    apply_ray_update,
    cell_entropy,
    coverage_percent,
    explored_area,
    load_map,
    map_entropy,
    rmse,
    save_map,
    ssim,
)
from explorer.models.schemas import LogOddsParams

from .conftest import make_grid


def _write_yaml(path: Path, image: str, **extra) -> Path:
    lines = [
        f"image: {image}",
        "resolution: 0.05",
        "origin: [-1.0, 2.0, 0.0]",
        "negate: 0",
        "occupied_thresh: 0.65",
        "free_thresh: 0.196",
    ]
    lines += [f"{key}: {value}" for key, value in extra.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def _constant(value: int, size: int = 10) -> OccupancyGrid:
    return OccupancyGrid(cells=np.full((size, size), value), resolution=0.1)


def test_load_plain_pgm_classifies_gray_levels(tmp_path):
    (tmp_path / "tiny.pgm").write_text("P2\n2 2\n255\n255 0\n205 255\n")
    yaml_path = _write_yaml(tmp_path / "tiny.yaml", "tiny.pgm")

    grid = load_map(None, yaml_path)

    # First image row is the top of the map.
    assert grid.state((0, 1)) == CellState.FREE
    assert grid.state((1, 1)) == CellState.OCCUPIED
    assert grid.state((0, 0)) == CellState.UNKNOWN
    assert grid.state((1, 0)) == CellState.FREE
    assert grid.resolution == pytest.approx(0.05)
    assert grid.origin == (-1.0, 2.0, 0.0)


def test_load_binary_pgm_dimensions(tmp_path):
    Image.fromarray(np.full((50, 50), 254, dtype=np.uint8)).save(
        tmp_path / "square.pgm", format="PPM"
    )
    yaml_path = _write_yaml(tmp_path / "square.yaml", "square.pgm")

    grid = load_map(tmp_path / "square.pgm", yaml_path)

    assert grid.shape == (50, 50)
    assert grid.cells.size == 2500
    assert np.all(grid.states() == CellState.FREE)


def test_load_negated_map(tmp_path):
    (tmp_path / "neg.pgm").write_text("P2\n2 1\n255\n255 0\n")
    yaml_path = _write_yaml(tmp_path / "neg.yaml", "neg.pgm")
    yaml_path.write_text(yaml_path.read_text().replace("negate: 0", "negate: 1"))

    grid = load_map(None, yaml_path)

    assert grid.state((0, 0)) == CellState.OCCUPIED
    assert grid.state((1, 0)) == CellState.FREE


def test_scale_mode_keeps_intermediate_grays(tmp_path):
    (tmp_path / "gray.pgm").write_text("P2\n3 1\n255\n128 205 0\n")
    yaml_path = _write_yaml(tmp_path / "gray.yaml", "gray.pgm", mode="scale")

    grid = load_map(None, yaml_path)

    assert 0 < grid.raw((0, 0)) < 100
    assert grid.raw((1, 0)) == UNKNOWN
    assert grid.raw((2, 0)) == 100


def test_save_then_load_is_identity_on_ternary_grids(tmp_path, rng):
    cells = rng.choice([0, 100, UNKNOWN], size=(17, 23)).astype(np.int16)
    grid = OccupancyGrid(cells=cells, resolution=0.2, origin=(1.5, -2.0, 0.0))

    save_map(grid, tmp_path / "out.pgm", tmp_path / "out.yaml")
    loaded = load_map(None, tmp_path / "out.yaml")

    assert loaded == grid
    assert np.array_equal(loaded.cells, cells)


@pytest.mark.parametrize(("raw", "gray"), [(UNKNOWN, 205), (0, 254), (100, 0)])
def test_save_writes_uniform_gray(tmp_path, raw, gray):
    save_map(_constant(raw), tmp_path / "m.pgm", tmp_path / "m.yaml")

    with Image.open(tmp_path / "m.pgm") as image:
        pixels = np.asarray(image)

    assert np.all(pixels == gray)


def test_load_map_rejects_garbage_image(tmp_path):
    (tmp_path / "bad.pgm").write_bytes(b"not an image at all")
    yaml_path = _write_yaml(tmp_path / "bad.yaml", "bad.pgm")

    with pytest.raises(MapFormatError):
        load_map(None, yaml_path)


def test_load_map_requires_resolution(tmp_path):
    (tmp_path / "m.pgm").write_text("P2\n1 1\n255\n255\n")
    (tmp_path / "m.yaml").write_text("image: m.pgm\n")

    with pytest.raises(MapFormatError, match="resolution"):
        load_map(None, tmp_path / "m.yaml")


def test_load_map_missing_image_names_path(tmp_path):
    yaml_path = _write_yaml(tmp_path / "m.yaml", "missing.pgm")

    with pytest.raises(FileNotFoundError):
        load_map(None, yaml_path)


@pytest.mark.parametrize(
    ("p", "expected"),
    [(0.5, 1.0), (0.1, 0.46900), (0.45, 0.99277), (0.0, 0.0), (1.0, 0.0)],
)
def test_cell_entropy_values(p, expected):
    assert cell_entropy(p) == pytest.approx(expected, abs=1e-4)


def test_cell_entropy_of_half_is_exactly_one():
    assert cell_entropy(0.5) == 1.0


def test_cell_entropy_is_symmetric(rng):
    for p in rng.uniform(0.0, 1.0, size=1000):
        assert abs(cell_entropy(p) - cell_entropy(1.0 - p)) < 1e-12


def test_cell_entropy_rejects_out_of_range():
    with pytest.raises(ValueError):
        cell_entropy(1.5)


def test_map_entropy_examples():
    assert map_entropy(_constant(UNKNOWN)) == pytest.approx(1.0)
    assert map_entropy(make_grid(["#.", "#."])) == pytest.approx(0.0)
    mixed = OccupancyGrid(cells=np.array([[UNKNOWN, UNKNOWN], [100, 0]]), resolution=1.0)
    assert map_entropy(mixed) == pytest.approx(0.5)


def test_coverage_counts_observed_truth_cells():
    truth = _constant(0)
    belief = truth.blank_like()
    assert coverage_percent(belief, truth) == 0.0

    belief.cells[:, :5] = 0
    assert coverage_percent(belief, truth) == pytest.approx(50.0)
    assert coverage_percent(truth.copy(), truth) == pytest.approx(100.0)


def test_coverage_with_start_ignores_sealed_regions():
    truth = make_grid(
        [
            "#######",
            "#..#..#",
            "#..#..#",
            "#######",
        ]
    )
    belief = truth.blank_like()
    belief.cells[:, :4] = truth.cells[:, :4]

    # Left room plus its walls is everything reachable from (1, 1).
    assert coverage_percent(belief, truth, start=(1, 1)) == pytest.approx(100.0)
    assert coverage_percent(belief, truth) < 100.0


def test_coverage_rejects_mismatched_grids():
    with pytest.raises(DimensionMismatchError):
        coverage_percent(_constant(0, 10), _constant(0, 11))


def test_rmse_examples():
    free, occupied, unknown = _constant(0), _constant(100), _constant(UNKNOWN)
    assert rmse(free, free) == 0.0
    assert rmse(free, occupied) == pytest.approx(1.0)
    assert rmse(unknown, free) == pytest.approx(0.5)
    assert rmse(free, unknown) == rmse(unknown, free)


def test_ssim_of_identical_grids_is_one(rng):
    grid = OccupancyGrid(cells=rng.integers(0, 101, size=(20, 20)), resolution=0.1)
    assert ssim(grid, grid) == pytest.approx(1.0)


def test_ssim_constant_grids_reduce_to_luminance_term():
    a, b = _constant(20, 12), _constant(60, 12)
    c1 = 0.01**2
    expected = (2 * 0.2 * 0.6 + c1) / (0.2**2 + 0.6**2 + c1)

    assert ssim(a, b) == pytest.approx(expected, abs=1e-9)
    assert ssim(b, a) == pytest.approx(ssim(a, b))


def _reference_ssim(x: np.ndarray, y: np.ndarray, window: int) -> float:
    c1, c2 = 0.01**2, 0.03**2
    pad = window // 2
    values = []
    for row in range(pad, x.shape[0] - pad):
        for col in range(pad, x.shape[1] - pad):
            wx = x[row - pad : row + pad + 1, col - pad : col + pad + 1].ravel()
            wy = y[row - pad : row + pad + 1, col - pad : col + pad + 1].ravel()
            mx, my = wx.mean(), wy.mean()
            vx, vy = wx.var(ddof=1), wy.var(ddof=1)
            cxy = np.cov(wx, wy, ddof=1)[0, 1]
            values.append(
                ((2 * mx * my + c1) * (2 * cxy + c2))
                / ((mx**2 + my**2 + c1) * (vx + vy + c2))
            )
    return float(np.mean(values))


def test_ssim_matches_reference_after_single_flip(rng):
    cells = rng.choice([0, 100, UNKNOWN], size=(50, 50), p=[0.5, 0.2, 0.3])
    a = OccupancyGrid(cells=cells, resolution=0.1)
    b = a.copy()
    b.cells[25, 25] = 100 if b.cells[25, 25] != 100 else 0

    expected = _reference_ssim(a.probability(), b.probability(), 7)

    assert ssim(a, b, 7) == pytest.approx(expected, abs=1e-9)
    assert ssim(a, b, 7) < 1.0


def test_masked_ssim_with_full_mask_equals_unmasked(rng):
    a = OccupancyGrid(cells=rng.integers(0, 101, size=(15, 15)), resolution=0.1)
    b = OccupancyGrid(cells=rng.integers(0, 101, size=(15, 15)), resolution=0.1)

    assert ssim(a, b, mask=np.ones(a.shape, dtype=bool)) == pytest.approx(ssim(a, b))


def test_ssim_window_validation():
    grid = _constant(0, 6)
    with pytest.raises(ValueError):
        ssim(grid, grid, window=4)
    with pytest.raises(DimensionMismatchError):
        ssim(grid, grid, window=7)


def test_single_free_update_sets_sigmoid_probability():
    grid = OccupancyGrid.unknown(4, 1, 0.1)

    apply_ray_update(grid, [(0, 0), (1, 0)], hit=False)

    assert grid.log_odds[0, 0] == pytest.approx(-0.85)
    assert grid.raw((0, 0)) == round(100 / (1 + math.exp(0.85)))
    assert grid.raw((1, 0)) == UNKNOWN


def test_repeated_free_updates_clamp():
    grid = OccupancyGrid.unknown(3, 1, 0.1)
    params = LogOddsParams()
    for _ in range(20):
        apply_ray_update(grid, [(0, 0), (1, 0), (2, 0)], hit=True, params=params)

    assert grid.log_odds[0, 0] == pytest.approx(params.l_min)
    assert grid.log_odds[0, 2] == pytest.approx(params.l_max)


def test_hit_then_miss_cancels():
    grid = OccupancyGrid.unknown(2, 1, 0.1)

    apply_ray_update(grid, [(0, 0)], hit=True)
    apply_ray_update(grid, [(0, 0), (1, 0)], hit=False)

    assert grid.log_odds[0, 0] == pytest.approx(0.0)
    assert grid.raw((0, 0)) == 50


def test_out_of_bounds_cells_are_skipped():
    grid = OccupancyGrid.unknown(2, 2, 0.1)

    apply_ray_update(grid, [(0, 0), (5, 5), (-1, 0), (1, 1)], hit=True)

    assert grid.raw((0, 0)) < 40
    assert grid.raw((1, 1)) > 60


def test_map_entropy_non_increasing_under_consistent_updates():
    grid = OccupancyGrid.unknown(10, 10, 0.1)
    previous = map_entropy(grid)
    for step in range(12):
        row = step % 10
        apply_ray_update(grid, [(x, row) for x in range(10)], hit=True)
        current = map_entropy(grid)
        assert current <= previous + 1e-12
        previous = current


def test_explored_area_counts_observed_cells():
    grid = OccupancyGrid.unknown(10, 10, 0.5)
    grid.cells[0, :4] = 0
    assert explored_area(grid) == pytest.approx(1.0)


def test_world_cell_round_trip():
    grid = OccupancyGrid.unknown(10, 10, 0.25, origin=(-1.0, 1.0, 0.0))
    assert grid.world_to_cell(*grid.cell_to_world((3, 7))) == (3, 7)
