from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Matrix3 = Tuple[
    Tuple[float, float, float],
    Tuple[float, float, float],
    Tuple[float, float, float],
]


def _diag(a: float, b: float, c: float) -> Matrix3:
    return ((a, 0.0, 0.0), (0.0, b, 0.0), (0.0, 0.0, c))


def _binary_entropy(p: float) -> float:
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


class Method(str, Enum):
    FD = "fd"
    AGS = "ags"
    PROPOSED = "proposed"


class CellThresholds(BaseModel):
    """Raw-value thresholds used to classify cells as Free/Occupied/Unknown."""

    model_config = ConfigDict(frozen=True)

    free_threshold: int = 40
    occupied_threshold: int = 60

    @model_validator(mode="after")
    def _ordered(self) -> "CellThresholds":
        if not 0 <= self.free_threshold < self.occupied_threshold <= 100:
            raise ValueError(
                "thresholds must satisfy 0 <= free_threshold < occupied_threshold <= 100"
            )
        return self


class LogOddsParams(BaseModel):
    """Inverse sensor model increments and clamp bounds."""

    model_config = ConfigDict(frozen=True)

    l_occ: float = 0.85
    l_free: float = -0.85
    l_min: float = -4.0
    l_max: float = 4.0

    @model_validator(mode="after")
    def _signs(self) -> "LogOddsParams":
        if not self.l_free < 0.0 < self.l_occ:
            raise ValueError("log-odds increments must satisfy l_free < 0 < l_occ")
        if not self.l_min < 0.0 < self.l_max:
            raise ValueError("clamp bounds must satisfy l_min < 0 < l_max")
        return self


class EntropyParams(BaseModel):
    """Probabilities assigned to path cells when computing path entropy."""

    model_config = ConfigDict(frozen=True)

    p_unk: float = 0.1
    p_ofree: float = 0.45

    @model_validator(mode="after")
    def _interior(self) -> "EntropyParams":
        for name in ("p_unk", "p_ofree"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie strictly inside (0, 1)")
        if not _binary_entropy(self.p_unk) < _binary_entropy(self.p_ofree):
            raise ValueError(
                "the entropy of p_unk must be lower than the entropy of p_ofree"
            )
        return self


class NoiseModel(BaseModel):
    """Fisher information attached to odometry and loop-closure edges."""

    model_config = ConfigDict(frozen=True)

    odometry_info: Matrix3 = _diag(100.0, 100.0, 400.0)
    loop_info: Matrix3 = _diag(400.0, 400.0, 1600.0)

    @field_validator("odometry_info", "loop_info")
    @classmethod
    def _spd(cls, value: Matrix3) -> Matrix3:
        matrix = np.asarray(value, dtype=float)
        if np.max(np.abs(matrix - matrix.T)) >= 1e-9:
            raise ValueError("information matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(matrix)) <= 0.0:
            raise ValueError("information matrix must be positive-definite")
        return value

    @property
    def odometry(self) -> np.ndarray:
        return np.asarray(self.odometry_info, dtype=float)

    @property
    def loop(self) -> np.ndarray:
        return np.asarray(self.loop_info, dtype=float)


class SensorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_range: float = Field(default=3.0, gt=0.0)
    beam_count: int = Field(default=360, ge=4)
    hit_noise_std: float = Field(default=0.0, ge=0.0)


class PlannerParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    inflation_radius: int = Field(default=1, ge=0)
    goal_tolerance: int = Field(default=2, ge=0)


class UtilityParams(BaseModel):
    """Parameters of the candidate scoring pipeline."""

    model_config = ConfigDict(frozen=True)

    lambda_decay: float = Field(default=0.6, gt=0.0)
    entropy: EntropyParams = EntropyParams()
    loop_closure_radius: float = Field(default=1.5, gt=0.0)
    node_spacing: float = Field(default=1.0, gt=0.0)
    noise: NoiseModel = NoiseModel()
    edge_criterion: Literal["a", "d", "e"] = "d"


class ExplorationConfig(BaseModel):
    """Everything one simulated exploration run needs besides the map."""

    model_config = ConfigDict(frozen=True)

    thresholds: CellThresholds = CellThresholds()
    log_odds: LogOddsParams = LogOddsParams()
    sensor: SensorConfig = SensorConfig()
    planner: PlannerParams = PlannerParams()
    utility: UtilityParams = UtilityParams()
    min_frontier_size: int = Field(default=4, ge=1)
    unreachable_blacklist_radius: float = Field(default=3.0, ge=0.0)
    fd_blacklist_radius: float = Field(default=2.0, ge=0.0)
    budget: int = Field(default=150, ge=0)
    snapshot_every: int = Field(default=0, ge=0)
    snapshot_dir: Optional[Path] = None


class TickRecord(BaseModel):
    """Metrics recorded after every decision tick."""

    tick: int
    sim_time_proxy: float
    coverage_percent: float
    map_entropy: float
    explored_area_m2: float
    algebraic_connectivity: Optional[float] = None
    average_degree: float
    normalized_tree_connectivity: Optional[float] = None
    graph_uncertainty: Optional[float] = None
    node_count: int
    edge_count: int
    selected_frontier: Optional[Tuple[int, int]] = None


class RunSummary(BaseModel):
    """Aggregate of one exploration run."""

    method: Method
    seed: int
    status: str
    ticks: int
    distance: float
    final_coverage: float
    explored_area_m2: float
    algebraic_connectivity: Optional[float] = None
    average_degree: float
    normalized_tree_connectivity: Optional[float] = None
    ssim_vs_truth: Optional[float]
    ssim_masked_vs_truth: Optional[float] = None
    rmse_vs_truth: float
    d_opt_max: Optional[float] = None
    d_opt_min: Optional[float] = None
    d_opt_diff: Optional[float] = None
    percent_r: float
    distance_to_target: Optional[float] = None
    node_count: int
    edge_count: int
    loop_closures: int

    @model_validator(mode="after")
    def _percent_r_range(self) -> "RunSummary":
        if not 0.0 <= self.percent_r <= 100.0:
            raise ValueError("percent_r must lie in [0, 100]")
        return self


class CoveragePoint(BaseModel):
    method: Method
    distance: float
    mean_coverage: float
    std_coverage: float
    runs: int

