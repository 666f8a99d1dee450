"""Per-tick recording, run summaries and CSV output.

CSV files are RFC 4180 with a header row. Floats are written with six
significant digits; missing values are empty fields.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .grid_map import Cell, OccupancyGrid, coverage_percent, explored_area, map_entropy, rmse, ssim
from .models.schemas import CoveragePoint, Method, RunSummary, TickRecord
from .pose_graph import (
    PoseGraph,
    algebraic_connectivity,
    average_degree,
    edge_weight_stats,
    normalized_tree_connectivity,
)

if TYPE_CHECKING:
    from .simulator.world import SimState
    from .utility import CandidateScore

logger = logging.getLogger(__name__)

TRACE_COLUMNS: Tuple[str, ...] = (
    "tick",
    "sim_time_proxy",
    "coverage_percent",
    "map_entropy",
    "explored_area_m2",
    "algebraic_connectivity",
    "average_degree",
    "normalized_tree_connectivity",
    "graph_uncertainty",
    "node_count",
    "edge_count",
    "selected_x",
    "selected_y",
)

SUMMARY_COLUMNS: Tuple[str, ...] = tuple(RunSummary.model_fields)

CANDIDATE_COLUMNS: Tuple[str, ...] = (
    "tick",
    "centroid_x",
    "centroid_y",
    "size",
    "reachable",
    "e_n",
    "k_n",
    "gamma_n",
    "distance",
    "u1",
    "beta",
    "rho",
    "u2",
    "u_tot",
    "selected",
)

SERIES_COLUMNS: Tuple[str, ...] = tuple(CoveragePoint.model_fields)


class EmptyTraceError(ValueError):
    """Raised when a summary is requested for a trace without records."""


@dataclass
class ExplorationTrace:
    method: Method
    seed: int
    truth_start: Optional[Cell] = None
    criterion: str = "d"
    records: List[TickRecord] = field(default_factory=list)
    candidates: List[Tuple[int, "CandidateScore", bool]] = field(default_factory=list)
    status: Optional[str] = None
    belief: Optional[OccupancyGrid] = None
    graph: Optional[PoseGraph] = None


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, Method):
        return value.value
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".6g")
    return str(value)


def _graph_metrics(graph: PoseGraph, criterion: str) -> Dict[str, Optional[float]]:
    metrics: Dict[str, Optional[float]] = {
        "algebraic_connectivity": None,
        "normalized_tree_connectivity": None,
        "graph_uncertainty": None,
        "average_degree": average_degree(graph),
    }
    if graph.node_count >= 2:
        metrics["algebraic_connectivity"] = algebraic_connectivity(graph, criterion)
        metrics["normalized_tree_connectivity"] = normalized_tree_connectivity(
            graph, criterion
        )
    if graph.edge_count:
        metrics["graph_uncertainty"] = edge_weight_stats(graph, criterion)[0]
    return metrics


def record_tick(
    trace: ExplorationTrace, state: "SimState", selected: Optional[Cell] = None
) -> TickRecord:
    """Append the metrics of the current simulation state to ``trace``."""

    graph_metrics = _graph_metrics(state.graph, trace.criterion)
    record = TickRecord(
        tick=state.tick,
        sim_time_proxy=state.distance,
        coverage_percent=coverage_percent(state.belief, state.truth, trace.truth_start),
        map_entropy=map_entropy(state.belief),
        explored_area_m2=explored_area(state.belief),
        node_count=state.graph.node_count,
        edge_count=state.graph.edge_count,
        selected_frontier=selected,
        **graph_metrics,
    )
    trace.records.append(record)
    return record


def percent_reduction(
    series: Iterable[Optional[float]],
) -> Tuple[Optional[float], Optional[float], float]:
    """(max, min, %R) of an uncertainty series; ``None`` entries are skipped."""

    values = [v for v in series if v is not None]
    if not values:
        return None, None, 0.0
    high, low = max(values), min(values)
    if high <= 0:
        return high, low, 0.0
    return high, low, 100.0 * (high - low) / high


def distance_to_coverage(records: Sequence[TickRecord], target: float) -> Optional[float]:
    for record in records:
        if record.coverage_percent >= target:
            return record.sim_time_proxy
    return None


def summarize(
    trace: ExplorationTrace,
    truth: OccupancyGrid,
    ssim_window: int = 7,
    coverage_target: float = 90.0,
) -> RunSummary:
    """Aggregate a finished trace into one :class:`RunSummary`."""

    if not trace.records:
        raise EmptyTraceError(f"trace for {trace.method.value}/{trace.seed} is empty")
    if trace.belief is None or trace.graph is None:
        raise ValueError("trace has no final belief or graph")
    last = trace.records[-1]
    d_max, d_min, percent_r = percent_reduction(r.graph_uncertainty for r in trace.records)

    window = min(ssim_window, truth.width, truth.height)
    if window % 2 == 0:
        window -= 1
    similarity: Optional[float] = None
    masked: Optional[float] = None
    if window >= 3:
        similarity = ssim(trace.belief, truth, window)
        try:
            masked = ssim(trace.belief, truth, window, mask=trace.belief.observed())
        except ValueError:
            masked = None

    return RunSummary(
        method=trace.method,
        seed=trace.seed,
        status=trace.status or "unknown",
        ticks=last.tick,
        distance=last.sim_time_proxy,
        final_coverage=last.coverage_percent,
        explored_area_m2=last.explored_area_m2,
        algebraic_connectivity=last.algebraic_connectivity,
        average_degree=last.average_degree,
        normalized_tree_connectivity=last.normalized_tree_connectivity,
        ssim_vs_truth=similarity,
        ssim_masked_vs_truth=masked,
        rmse_vs_truth=rmse(trace.belief, truth),
        d_opt_max=d_max,
        d_opt_min=d_min,
        d_opt_diff=None if d_max is None else d_max - d_min,
        percent_r=percent_r,
        distance_to_target=distance_to_coverage(trace.records, coverage_target),
        node_count=trace.graph.node_count,
        edge_count=trace.graph.edge_count,
        loop_closures=trace.graph.loop_closure_count(),
    )


def coverage_at(records: Sequence[TickRecord], distance: float) -> float:
    """Coverage reached once ``distance`` meters have been travelled (step function)."""

    value = 0.0
    for record in records:
        if record.sim_time_proxy > distance + 1e-9:
            break
        value = record.coverage_percent
    return value


def coverage_series(
    traces: Sequence[Tuple[Method, Sequence[TickRecord]]], step: float = 1.0
) -> List[CoveragePoint]:
    """Mean/std coverage against travelled distance per method.

    Each run is held at its final coverage after it stops moving.
    """

    if step <= 0:
        raise ValueError("step must be positive")
    by_method: Dict[Method, List[Sequence[TickRecord]]] = {}
    for method, records in traces:
        if records:
            by_method.setdefault(method, []).append(records)

    points: List[CoveragePoint] = []
    for method in sorted(by_method, key=lambda m: list(Method).index(m)):
        runs = by_method[method]
        horizon = max(r[-1].sim_time_proxy for r in runs)
        marks = np.arange(0.0, horizon + step, step)
        for mark in marks:
            values = np.array([coverage_at(r, float(mark)) for r in runs])
            points.append(
                CoveragePoint(
                    method=method,
                    distance=float(mark),
                    mean_coverage=float(values.mean()),
                    std_coverage=float(values.std()),
                    runs=len(runs),
                )
            )
    return points


def coverage_gain(a: float, b: float) -> Optional[float]:
    """Percent more coverage of ``a`` over ``b``; ``None`` when ``b`` is zero."""

    if b == 0:
        return None
    return 100.0 * (a - b) / b


def method_comparison(summaries: Sequence[RunSummary]) -> List[Dict[str, Any]]:
    """Mean final coverage per method and pairwise coverage gains."""

    finals: Dict[Method, List[float]] = {}
    for summary in summaries:
        finals.setdefault(summary.method, []).append(summary.final_coverage)
    methods = sorted(finals, key=lambda m: list(Method).index(m))
    means = {m: float(np.mean(finals[m])) for m in methods}
    medians = {m: float(np.median(finals[m])) for m in methods}

    rows: List[Dict[str, Any]] = []
    for a in methods:
        for b in methods:
            if a == b:
                continue
            rows.append(
                {
                    "method": a,
                    "baseline": b,
                    "mean_coverage": means[a],
                    "baseline_mean_coverage": means[b],
                    "median_coverage": medians[a],
                    "baseline_median_coverage": medians[b],
                    "coverage_gain_percent": coverage_gain(means[a], means[b]),
                }
            )
    return rows


def _write_rows(path: Path, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\r\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(column)) for column in columns])
    logger.info("Wrote %s", path)


def _trace_row(record: TickRecord) -> Dict[str, Any]:
    row = record.model_dump()
    selected = row.pop("selected_frontier")
    row["selected_x"], row["selected_y"] = selected if selected else (None, None)
    return row


def write_trace_csv(records: Sequence[TickRecord], path: str | Path) -> None:
    _write_rows(Path(path), TRACE_COLUMNS, (_trace_row(r) for r in records))


def write_summary_csv(summaries: Sequence[RunSummary], path: str | Path) -> None:
    _write_rows(Path(path), SUMMARY_COLUMNS, (s.model_dump() for s in summaries))


def write_candidates_csv(
    candidates: Sequence[Tuple[int, "CandidateScore", bool]], path: str | Path
) -> None:
    def rows():
        for tick, score, chosen in candidates:
            yield {
                "tick": tick,
                "centroid_x": score.centroid[0],
                "centroid_y": score.centroid[1],
                "size": score.frontier.size,
                "reachable": score.reachable,
                "e_n": score.e_n,
                "k_n": score.k_n,
                "gamma_n": score.gamma_n,
                "distance": score.distance,
                "u1": score.u1,
                "beta": score.beta,
                "rho": score.rho,
                "u2": score.u2,
                "u_tot": score.u_tot,
                "selected": chosen,
            }

    _write_rows(Path(path), CANDIDATE_COLUMNS, rows())


def write_series_csv(points: Sequence[CoveragePoint], path: str | Path) -> None:
    _write_rows(Path(path), SERIES_COLUMNS, (p.model_dump() for p in points))


def write_comparison_csv(rows: Sequence[Mapping[str, Any]], path: str | Path) -> None:
    columns = (
        "method",
        "baseline",
        "mean_coverage",
        "baseline_mean_coverage",
        "median_coverage",
        "baseline_median_coverage",
        "coverage_gain_percent",
    )
    _write_rows(Path(path), columns, rows)


def _parse_optional(value: str, kind: type) -> Any:
    if value == "":
        return None
    return kind(value)


def read_trace_csv(path: str | Path) -> List[TickRecord]:
    """Parse a file written by :func:`write_trace_csv`."""

    records: List[TickRecord] = []
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected trace header {reader.fieldnames}")
        for row in reader:
            sx = _parse_optional(row["selected_x"], int)
            sy = _parse_optional(row["selected_y"], int)
            records.append(
                TickRecord(
                    tick=int(row["tick"]),
                    sim_time_proxy=float(row["sim_time_proxy"]),
                    coverage_percent=float(row["coverage_percent"]),
                    map_entropy=float(row["map_entropy"]),
                    explored_area_m2=float(row["explored_area_m2"]),
                    algebraic_connectivity=_parse_optional(
                        row["algebraic_connectivity"], float
                    ),
                    average_degree=float(row["average_degree"]),
                    normalized_tree_connectivity=_parse_optional(
                        row["normalized_tree_connectivity"], float
                    ),
                    graph_uncertainty=_parse_optional(row["graph_uncertainty"], float),
                    node_count=int(row["node_count"]),
                    edge_count=int(row["edge_count"]),
                    selected_frontier=None if sx is None or sy is None else (sx, sy),
                )
            )
    return records


def round_record(record: TickRecord) -> TickRecord:
    """``record`` with every float rounded to six significant digits, as written to CSV."""

    values = record.model_dump()
    for key, value in values.items():
        if isinstance(value, float) and math.isfinite(value):
            values[key] = float(format(value, ".6g"))
    return TickRecord(**values)
