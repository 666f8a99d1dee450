"""Occupancy-grid representation, map files, belief updates and map metrics.

Cells are addressed as ``(x, y)`` tuples: ``x`` is the column and ``y`` the
row, with row 0 at the bottom of the map (the PGM image is flipped on load
and save so that world ``y`` grows upwards). Raw cell values follow the ROS
map convention: ``UNKNOWN`` (-1) or an integer occupancy percentage in
``[0, 100]``. The probability view maps ``UNKNOWN`` to 0.5.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence, Tuple

import numpy as np
import yaml
from PIL import Image, UnidentifiedImageError
from scipy import ndimage, special

from .models.schemas import CellThresholds, LogOddsParams

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]

UNKNOWN = -1
UNKNOWN_GRAY = 205
FREE_GRAY = 254
OCCUPIED_GRAY = 0

DEFAULT_OCCUPIED_THRESH = 0.65
DEFAULT_FREE_THRESH = 0.196
_LOG_ODDS_PROB_CLIP = 1e-3

__all__ = [
    "UNKNOWN",
    "Cell",
    "CellState",
    "DimensionMismatchError",
    "MapFormatError",
    "OccupancyGrid",
    "apply_ray_update",
    "cell_entropy",
    "coverage_percent",
    "explored_area",
    "load_map",
    "map_entropy",
    "rmse",
    "save_map",
    "ssim",
]


class MapFormatError(ValueError):
    """Raised when a map image or its YAML sidecar cannot be used."""


class DimensionMismatchError(ValueError):
    """Raised when two grids compared by a metric do not share a lattice."""


class CellState(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


@dataclass(eq=False)
class OccupancyGrid:
    """2D lattice of occupancy belief.

    ``cells`` holds raw values indexed ``[y, x]``; ``log_odds`` is the belief
    layer behind them and stays consistent with ``cells`` for observed cells.
    """

    cells: np.ndarray
    resolution: float
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    log_odds: np.ndarray | None = None
    thresholds: CellThresholds = field(default_factory=CellThresholds)

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise ValueError("cells must be a 2D array")
        cells = cells.astype(np.int16, copy=True)
        if np.any((cells != UNKNOWN) & ((cells < 0) | (cells > 100))):
            raise ValueError("raw cell values must be UNKNOWN or lie in [0, 100]")
        self.cells = cells
        self.origin = tuple(float(v) for v in self.origin)  # type: ignore[assignment]
        if self.log_odds is None:
            self.log_odds = _log_odds_from_raw(cells)
        else:
            self.log_odds = np.asarray(self.log_odds, dtype=float).copy()
            if self.log_odds.shape != cells.shape:
                raise ValueError("log_odds must have the same shape as cells")

    @classmethod
    def unknown(
        cls,
        width: int,
        height: int,
        resolution: float,
        origin: Tuple[float, float, float] = (0.0, 0.0, 0.0),
        thresholds: CellThresholds | None = None,
    ) -> "OccupancyGrid":
        return cls(
            cells=np.full((height, width), UNKNOWN, dtype=np.int16),
            resolution=resolution,
            origin=origin,
            thresholds=thresholds or CellThresholds(),
        )

    def blank_like(self) -> "OccupancyGrid":
        """All-UNKNOWN grid on the same lattice."""

        return OccupancyGrid.unknown(
            self.width, self.height, self.resolution, self.origin, self.thresholds
        )

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def raw(self, cell: Cell) -> int:
        x, y = cell
        return int(self.cells[y, x])

    def state(self, cell: Cell) -> CellState:
        return classify(self.raw(cell), self.thresholds)

    def states(self) -> np.ndarray:
        """Vectorised :class:`CellState` codes, indexed ``[y, x]``."""

        out = np.full(self.cells.shape, int(CellState.UNKNOWN), dtype=np.int8)
        observed = self.cells != UNKNOWN
        out[observed & (self.cells < self.thresholds.free_threshold)] = CellState.FREE
        out[observed & (self.cells > self.thresholds.occupied_threshold)] = (
            CellState.OCCUPIED
        )
        return out

    def observed(self) -> np.ndarray:
        return self.cells != UNKNOWN

    def probability(self) -> np.ndarray:
        prob = self.cells.astype(float) / 100.0
        prob[self.cells == UNKNOWN] = 0.5
        return prob

    def world_to_cell(self, x: float, y: float) -> Cell:
        ox, oy, _ = self.origin
        return (
            int(math.floor((x - ox) / self.resolution)),
            int(math.floor((y - oy) / self.resolution)),
        )

    def cell_to_world(self, cell: Cell) -> Tuple[float, float]:
        ox, oy, _ = self.origin
        return (
            ox + (cell[0] + 0.5) * self.resolution,
            oy + (cell[1] + 0.5) * self.resolution,
        )

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(
            cells=self.cells,
            resolution=self.resolution,
            origin=self.origin,
            log_odds=self.log_odds,
            thresholds=self.thresholds,
        )

    def same_lattice(self, other: "OccupancyGrid") -> bool:
        return self.shape == other.shape and math.isclose(
            self.resolution, other.resolution
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.resolution == other.resolution
            and tuple(self.origin) == tuple(other.origin)
            and bool(np.array_equal(self.cells, other.cells))
        )


def classify(raw: int, thresholds: CellThresholds) -> CellState:
    if raw == UNKNOWN:
        return CellState.UNKNOWN
    if raw < thresholds.free_threshold:
        return CellState.FREE
    if raw > thresholds.occupied_threshold:
        return CellState.OCCUPIED
    return CellState.UNKNOWN


def _log_odds_from_raw(cells: np.ndarray) -> np.ndarray:
    prob = np.clip(cells / 100.0, _LOG_ODDS_PROB_CLIP, 1.0 - _LOG_ODDS_PROB_CLIP)
    log_odds = special.logit(prob)
    log_odds[cells == UNKNOWN] = 0.0
    return log_odds


def _require_same_lattice(a: OccupancyGrid, b: OccupancyGrid) -> None:
    if not a.same_lattice(b):
        raise DimensionMismatchError(
            f"grids differ: {a.width}x{a.height}@{a.resolution} vs "
            f"{b.width}x{b.height}@{b.resolution}"
        )


def _read_sidecar(yaml_path: Path) -> dict:
    try:
        with yaml_path.open("r", encoding="utf-8") as handle:
            meta = yaml.safe_load(handle)
    except FileNotFoundError:
        raise
    except (OSError, yaml.YAMLError) as exc:
        raise MapFormatError(f"Cannot read map metadata {yaml_path}: {exc}") from exc
    if not isinstance(meta, dict):
        raise MapFormatError(f"Map metadata {yaml_path} is not a mapping")
    if "resolution" not in meta:
        raise MapFormatError(f"Map metadata {yaml_path} has no 'resolution'")
    return meta


def _read_gray(pgm_path: Path) -> np.ndarray:
    try:
        with Image.open(pgm_path) as image:
            if image.format != "PPM" or image.mode not in ("L", "I", "1"):
                raise MapFormatError(
                    f"{pgm_path} is not a grayscale PGM (format={image.format}, "
                    f"mode={image.mode})"
                )
            gray = np.asarray(image, dtype=np.int64)
    except FileNotFoundError:
        raise
    except MapFormatError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise MapFormatError(f"Cannot read map image {pgm_path}: {exc}") from exc
    if gray.ndim != 2 or gray.size == 0:
        raise MapFormatError(f"{pgm_path} does not contain a 2D image")
    return gray


def load_map(
    pgm_path: str | Path | None,
    yaml_path: str | Path,
    thresholds: CellThresholds | None = None,
) -> OccupancyGrid:
    """Load a map_server style PGM + YAML pair.

    When ``pgm_path`` is ``None`` the ``image`` key of the YAML file is used,
    resolved relative to the YAML file's directory.
    """

    yaml_path = Path(yaml_path)
    meta = _read_sidecar(yaml_path)
    if pgm_path is None:
        image_name = meta.get("image")
        if not isinstance(image_name, str) or not image_name.strip():
            raise MapFormatError(f"Map metadata {yaml_path} has no 'image'")
        pgm_path = yaml_path.parent / image_name
    pgm_path = Path(pgm_path)

    try:
        resolution = float(meta["resolution"])
        origin_raw = meta.get("origin", [0.0, 0.0, 0.0])
        origin = tuple(float(v) for v in origin_raw)
        occupied_thresh = float(meta.get("occupied_thresh", DEFAULT_OCCUPIED_THRESH))
        free_thresh = float(meta.get("free_thresh", DEFAULT_FREE_THRESH))
        negate = bool(int(meta.get("negate", 0)))
    except (TypeError, ValueError) as exc:
        raise MapFormatError(f"Invalid map metadata in {yaml_path}: {exc}") from exc
    if resolution <= 0 or len(origin) != 3:
        raise MapFormatError(f"Invalid resolution or origin in {yaml_path}")
    mode = str(meta.get("mode", "trinary")).lower()
    if mode not in ("trinary", "scale"):
        raise MapFormatError(f"Unsupported map mode '{mode}' in {yaml_path}")

    gray = _read_gray(pgm_path)
    maxval = 255.0
    if negate:
        occ_prob = gray / maxval
    else:
        occ_prob = (maxval - gray) / maxval

    raw = np.full(gray.shape, UNKNOWN, dtype=np.int16)
    occupied = occ_prob > occupied_thresh
    free = occ_prob < free_thresh
    raw[occupied] = 100
    raw[free] = 0
    if mode == "scale":
        between = ~(occupied | free) & (gray != UNKNOWN_GRAY)
        scaled = (occ_prob - free_thresh) / (occupied_thresh - free_thresh)
        raw[between] = np.rint(100.0 * scaled[between]).astype(np.int16)

    grid = OccupancyGrid(
        cells=np.flipud(raw),
        resolution=resolution,
        origin=origin,  # type: ignore[arg-type]
        thresholds=thresholds or CellThresholds(),
    )
    logger.debug(
        "Loaded %dx%d map from %s (resolution %.3f)",
        grid.width,
        grid.height,
        pgm_path,
        resolution,
    )
    return grid


def save_map(grid: OccupancyGrid, pgm_path: str | Path, yaml_path: str | Path) -> None:
    """Write ``grid`` as a binary PGM plus YAML sidecar (map_saver trinary)."""

    pgm_path = Path(pgm_path)
    yaml_path = Path(yaml_path)
    states = grid.states()
    gray = np.full(grid.shape, UNKNOWN_GRAY, dtype=np.uint8)
    gray[states == CellState.FREE] = FREE_GRAY
    gray[states == CellState.OCCUPIED] = OCCUPIED_GRAY

    pgm_path.parent.mkdir(parents=True, exist_ok=True)
    yaml_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(np.flipud(gray))).save(pgm_path, format="PPM")

    try:
        image_ref = str(pgm_path.resolve().relative_to(yaml_path.parent.resolve()))
    except ValueError:
        image_ref = str(pgm_path.resolve())
    meta = {
        "image": image_ref,
        "mode": "trinary",
        "resolution": float(grid.resolution),
        "origin": [float(v) for v in grid.origin],
        "negate": 0,
        "occupied_thresh": DEFAULT_OCCUPIED_THRESH,
        "free_thresh": DEFAULT_FREE_THRESH,
    }
    with yaml_path.open("w", encoding="utf-8") as handle:
        yaml.safe_dump(meta, handle, sort_keys=False)


def binary_entropy(prob: np.ndarray | float) -> np.ndarray:
    """Elementwise base-2 binary entropy; zero at p in {0, 1}."""

    prob = np.asarray(prob, dtype=float)
    return (special.entr(prob) + special.entr(1.0 - prob)) / math.log(2.0)


def cell_entropy(p: float) -> float:
    """Binary entropy of a single occupancy probability, in bits."""

    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    return float(binary_entropy(p))


def map_entropy(grid: OccupancyGrid) -> float:
    """Mean per-cell entropy in bits; UNKNOWN cells count as p = 0.5."""

    if grid.cells.size == 0:
        raise ValueError("grid must not be empty")
    return float(np.mean(binary_entropy(grid.probability())))


def reachable_region(truth: OccupancyGrid, start: Cell | None = None) -> np.ndarray:
    """Truth cells that count towards coverage.

    With a start cell: the Free component 8-connected to it plus the
    Occupied cells bordering that component. Without: every authored cell.
    """

    if start is None:
        return truth.observed()
    states = truth.states()
    free = states == CellState.FREE
    if not truth.in_bounds(start) or not free[start[1], start[0]]:
        raise ValueError(f"start cell {start} is not Free in the truth map")
    labels, _ = ndimage.label(free, structure=np.ones((3, 3), dtype=bool))
    component = labels == labels[start[1], start[0]]
    border = ndimage.binary_dilation(component, structure=np.ones((3, 3), dtype=bool))
    return component | (border & (states == CellState.OCCUPIED))


def coverage_percent(
    belief: OccupancyGrid, truth: OccupancyGrid, start: Cell | None = None
) -> float:
    """Percentage of the truth's reachable region observed in ``belief``."""

    _require_same_lattice(belief, truth)
    region = reachable_region(truth, start)
    total = int(np.count_nonzero(region))
    if total == 0:
        return 0.0
    seen = int(np.count_nonzero(region & belief.observed()))
    return 100.0 * seen / total


def explored_area(grid: OccupancyGrid) -> float:
    """Observed area in square meters."""

    return float(np.count_nonzero(grid.observed())) * grid.resolution**2


def rmse(a: OccupancyGrid, b: OccupancyGrid) -> float:
    _require_same_lattice(a, b)
    diff = a.probability() - b.probability()
    return float(np.sqrt(np.mean(diff * diff)))


def ssim(
    a: OccupancyGrid,
    b: OccupancyGrid,
    window: int = 7,
    mask: np.ndarray | None = None,
) -> float:
    """Mean structural similarity of the probability views.

    Uniform ``window`` x ``window`` windows, dynamic range 1, sample
    covariance, and border windows excluded. ``mask`` (indexed ``[y, x]``)
    restricts the average to the selected window centres.
    """

    _require_same_lattice(a, b)
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and at least 3")
    if window > a.width or window > a.height:
        raise DimensionMismatchError(
            f"window {window} larger than grid {a.width}x{a.height}"
        )

    x = a.probability()
    y = b.probability()
    c1 = (0.01 * 1.0) ** 2
    c2 = (0.03 * 1.0) ** 2
    n_px = window * window
    cov_norm = n_px / (n_px - 1.0)

    ux = ndimage.uniform_filter(x, size=window)
    uy = ndimage.uniform_filter(y, size=window)
    uxx = ndimage.uniform_filter(x * x, size=window)
    uyy = ndimage.uniform_filter(y * y, size=window)
    uxy = ndimage.uniform_filter(x * y, size=window)
    vx = cov_norm * (uxx - ux * ux)
    vy = cov_norm * (uyy - uy * uy)
    vxy = cov_norm * (uxy - ux * uy)

    numerator = (2.0 * ux * uy + c1) * (2.0 * vxy + c2)
    denominator = (ux * ux + uy * uy + c1) * (vx + vy + c2)
    ssim_map = numerator / denominator

    pad = (window - 1) // 2
    inner = (slice(pad, a.height - pad), slice(pad, a.width - pad))
    values = ssim_map[inner]
    if mask is not None:
        selected = np.asarray(mask, dtype=bool)[inner]
        if not np.any(selected):
            raise ValueError("mask selects no window centres")
        values = values[selected]
    return float(np.mean(values))


def apply_ray_update(
    grid: OccupancyGrid,
    cell_sequence: Sequence[Cell] | Iterable[Cell],
    hit: bool,
    params: LogOddsParams | None = None,
) -> None:
    """Inverse sensor model along one ray.

    Every cell before the terminal cell receives ``l_free``; the terminal
    cell receives ``l_occ`` when ``hit``. Cells outside the grid are skipped.
    """

    params = params or LogOddsParams()
    cells = list(cell_sequence)
    if not cells:
        return
    coords = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    increments = np.full(len(cells), params.l_free)
    increments[-1] = params.l_occ if hit else 0.0
    if not hit:
        coords = coords[:-1]
        increments = increments[:-1]

    xs, ys = coords[:, 0], coords[:, 1]
    inside = (xs >= 0) & (xs < grid.width) & (ys >= 0) & (ys < grid.height)
    xs, ys, increments = xs[inside], ys[inside], increments[inside]
    if xs.size == 0:
        return

    updated = np.clip(grid.log_odds[ys, xs] + increments, params.l_min, params.l_max)
    grid.log_odds[ys, xs] = updated
    grid.cells[ys, xs] = np.rint(100.0 * special.expit(updated)).astype(np.int16)
