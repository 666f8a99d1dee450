"""Experiment configuration and single / batch orchestration."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import tomli
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator
from tqdm import tqdm

from . import metrics
from .deps import get_settings
from .grid_map import OccupancyGrid, load_map, save_map
from .models.schemas import (
    CellThresholds,
    EntropyParams,
    ExplorationConfig,
    LogOddsParams,
    Method,
    NoiseModel,
    PlannerParams,
    RunSummary,
    SensorConfig,
    TickRecord,
    UtilityParams,
)
from .pose_graph import write_g2o
from .simulator.world import ExplorationOutcome, run_exploration
from .worlds import world_by_name

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for an invalid or unreadable experiment configuration."""


def _diag9(a: float, b: float, c: float) -> List[float]:
    return [a, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, c]


class ExperimentConfig(BaseModel):
    """Flat experiment configuration; one CLI flag per field.

    Information matrices are nine numbers in row-major order.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    map: Optional[str] = None
    map_yaml: Optional[str] = None
    world: Optional[str] = None
    methods: List[Method] = [Method.FD, Method.AGS, Method.PROPOSED]
    seeds: List[int] = [0]
    budget: int = 150
    start_x: Optional[int] = None
    start_y: Optional[int] = None

    p_unk: float = 0.1
    p_ofree: float = 0.45
    lambda_decay: float = 0.6
    l_occ: float = 0.85
    l_free: float = -0.85
    l_min: float = -4.0
    l_max: float = 4.0
    free_threshold: int = 40
    occupied_threshold: int = 60
    max_range: float = 3.0
    beam_count: int = 360
    hit_noise_std: float = 0.0
    odometry_info: List[float] = _diag9(100.0, 100.0, 400.0)
    loop_info: List[float] = _diag9(400.0, 400.0, 1600.0)
    node_spacing: float = 1.0
    loop_closure_radius: float = 1.5
    edge_criterion: Literal["a", "d", "e"] = "d"
    inflation_radius: int = 1
    goal_tolerance: int = 2
    min_frontier_size: int = 4
    unreachable_blacklist_radius: float = 3.0
    fd_blacklist_radius: float = 2.0
    ssim_window: int = 7
    coverage_target: float = 90.0
    series_step: float = 1.0
    snapshot_every: int = 0
    output_dir: Optional[str] = None
    workers: Optional[int] = None

    @field_validator("methods", "seeds", "odometry_info", "loop_info", mode="before")
    @classmethod
    def _split_commas(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        if isinstance(value, (int, float)):
            return [value]
        return value

    @field_validator("odometry_info", "loop_info")
    @classmethod
    def _nine_values(cls, value: List[float]) -> List[float]:
        if len(value) != 9:
            raise ValueError("information matrices take nine values (row-major 3x3)")
        return value

    @model_validator(mode="after")
    def _one_environment(self) -> "ExperimentConfig":
        has_map = self.map is not None or self.map_yaml is not None
        if has_map == (self.world is not None):
            raise ValueError("give exactly one of --map/--map-yaml or --world")
        if (self.start_x is None) != (self.start_y is None):
            raise ValueError("start_x and start_y must be given together")
        if not self.methods or not self.seeds:
            raise ValueError("at least one method and one seed are required")
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ValueError("ssim_window must be odd and at least 3")
        if self.series_step <= 0:
            raise ValueError("series_step must be positive")
        return self

    @property
    def start(self) -> Optional[Tuple[int, int]]:
        if self.start_x is None or self.start_y is None:
            return None
        return self.start_x, self.start_y

    def resolved_output_dir(self) -> Path:
        return Path(self.output_dir or get_settings().output_root)

    def exploration_config(self, snapshot_dir: Path | None = None) -> ExplorationConfig:
        def matrix(values: Sequence[float]):
            return tuple(tuple(float(v) for v in values[r * 3 : r * 3 + 3]) for r in range(3))

        try:
            return ExplorationConfig(
                thresholds=CellThresholds(
                    free_threshold=self.free_threshold,
                    occupied_threshold=self.occupied_threshold,
                ),
                log_odds=LogOddsParams(
                    l_occ=self.l_occ, l_free=self.l_free, l_min=self.l_min, l_max=self.l_max
                ),
                sensor=SensorConfig(
                    max_range=self.max_range,
                    beam_count=self.beam_count,
                    hit_noise_std=self.hit_noise_std,
                ),
                planner=PlannerParams(
                    inflation_radius=self.inflation_radius,
                    goal_tolerance=self.goal_tolerance,
                ),
                utility=UtilityParams(
                    lambda_decay=self.lambda_decay,
                    entropy=EntropyParams(p_unk=self.p_unk, p_ofree=self.p_ofree),
                    loop_closure_radius=self.loop_closure_radius,
                    node_spacing=self.node_spacing,
                    noise=NoiseModel(
                        odometry_info=matrix(self.odometry_info),
                        loop_info=matrix(self.loop_info),
                    ),
                    edge_criterion=self.edge_criterion,
                ),
                min_frontier_size=self.min_frontier_size,
                unreachable_blacklist_radius=self.unreachable_blacklist_radius,
                fd_blacklist_radius=self.fd_blacklist_radius,
                budget=self.budget,
                snapshot_every=self.snapshot_every if snapshot_dir else 0,
                snapshot_dir=snapshot_dir,
            )
        except ValidationError as exc:
            raise ConfigError(_validation_message(exc)) from exc


def _validation_message(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(p) for p in error.get("loc", ())) or "config"
        parts.append(f"{location}: {error.get('msg')}")
    return "; ".join(parts)


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a flat TOML experiment file (top-level scalars and arrays only)."""

    try:
        data = tomli.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    nested = [key for key, value in data.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"{path}: tables are not allowed ({', '.join(nested)})")
    return data


def resolve_config(
    file_values: Mapping[str, Any] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> ExperimentConfig:
    """Merge file values with flag overrides (flags win) and validate."""

    values: Dict[str, Any] = dict(file_values or {})
    values.update(overrides or {})
    try:
        config = ExperimentConfig(**values)
    except ValidationError as exc:
        raise ConfigError(_validation_message(exc)) from exc
    config.exploration_config()
    return config


def _toml_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Method):
        return json.dumps(value.value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot write {type(value).__name__} to TOML")


def dump_config(config: ExperimentConfig) -> str:
    """Flat TOML rendering of every set field, in declaration order."""

    lines = [
        f"{name} = {_toml_value(value)}"
        for name, value in config.model_dump().items()
        if value is not None
    ]
    return "\n".join(lines) + "\n"


def map_paths(path: str | Path) -> Tuple[Optional[Path], Path]:
    """(pgm, yaml) for a map given by either file of the pair."""

    path = Path(path)
    if path.suffix.lower() in (".yaml", ".yml"):
        return None, path
    return path, path.with_suffix(".yaml")


def load_truth(config: ExperimentConfig) -> OccupancyGrid:
    thresholds = CellThresholds(
        free_threshold=config.free_threshold,
        occupied_threshold=config.occupied_threshold,
    )
    if config.world is not None:
        try:
            truth = world_by_name(config.world)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        truth.thresholds = thresholds
        return truth
    if config.map_yaml is not None:
        pgm = Path(config.map) if config.map else None
        yaml_path = Path(config.map_yaml)
    else:
        pgm, yaml_path = map_paths(config.map)  # type: ignore[arg-type]
    for candidate in (pgm, yaml_path):
        if candidate is not None and not candidate.exists():
            raise FileNotFoundError(f"map file not found: {candidate}")
    return load_map(pgm, yaml_path, thresholds)


def run_single(
    config: ExperimentConfig,
    method: Method,
    seed: int,
    truth: OccupancyGrid | None = None,
    snapshot_dir: Path | None = None,
) -> Tuple[ExplorationOutcome, RunSummary]:
    truth = truth if truth is not None else load_truth(config)
    outcome = run_exploration(
        truth, method, config.exploration_config(snapshot_dir), seed, config.start
    )
    summary = metrics.summarize(
        outcome.trace, truth, config.ssim_window, config.coverage_target
    )
    return outcome, summary


def execute_run(config: ExperimentConfig) -> RunSummary:
    """One exploration (first method and seed) with all of its output files."""

    out_dir = config.resolved_output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshots = out_dir / "snapshots" if config.snapshot_every else None
    method, seed = config.methods[0], config.seeds[0]
    outcome, summary = run_single(config, method, seed, snapshot_dir=snapshots)

    trace = outcome.trace
    metrics.write_trace_csv(trace.records, out_dir / "trace.csv")
    metrics.write_summary_csv([summary], out_dir / "summary.csv")
    metrics.write_candidates_csv(trace.candidates, out_dir / "candidates.csv")
    save_map(trace.belief, out_dir / "belief.pgm", out_dir / "belief.yaml")  # type: ignore[arg-type]
    write_g2o(trace.graph, out_dir / "graph.g2o")  # type: ignore[arg-type]
    (out_dir / "config.toml").write_text(dump_config(config), encoding="utf-8")
    logger.info("Run outputs written to %s", out_dir)
    return summary


def _run_job(job: Tuple[ExperimentConfig, Method, int]) -> Tuple[RunSummary, List[TickRecord]]:
    config, method, seed = job
    outcome, summary = run_single(config, method, seed)
    return summary, outcome.trace.records


def _worker_count(config: ExperimentConfig) -> int:
    workers = config.workers or get_settings().max_workers or os.cpu_count() or 1
    return max(1, int(workers))


def run_batch(
    config: ExperimentConfig, progress: bool = False
) -> List[Tuple[RunSummary, List[TickRecord]]]:
    """Every (method, seed) pair, returned in (method, seed) order."""

    load_truth(config)
    jobs = [(config, method, seed) for method in config.methods for seed in config.seeds]
    workers = min(_worker_count(config), len(jobs))
    logger.info("Running %d explorations on %d worker(s)", len(jobs), workers)
    if workers == 1:
        iterator = map(_run_job, jobs)
        return list(tqdm(iterator, total=len(jobs), disable=not progress))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(_run_job, jobs), total=len(jobs), disable=not progress))


def execute_compare(config: ExperimentConfig, progress: bool = False) -> List[RunSummary]:
    if len(config.methods) < 2:
        raise ConfigError("compare needs at least two methods")
    out_dir = config.resolved_output_dir()
    results = run_batch(config, progress)

    summaries = [summary for summary, _ in results]
    traces_dir = out_dir / "traces"
    for summary, records in results:
        metrics.write_trace_csv(
            records, traces_dir / f"{summary.method.value}_{summary.seed}.csv"
        )
    metrics.write_summary_csv(summaries, out_dir / "summary.csv")
    series = metrics.coverage_series(
        [(summary.method, records) for summary, records in results], config.series_step
    )
    metrics.write_series_csv(series, out_dir / "coverage_series.csv")
    metrics.write_comparison_csv(
        metrics.method_comparison(summaries), out_dir / "method_comparison.csv"
    )
    (out_dir / "config.toml").write_text(dump_config(config), encoding="utf-8")
    return summaries
