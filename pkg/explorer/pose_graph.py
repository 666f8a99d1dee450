"""SE(2) pose graph and its spectral connectivity / uncertainty metrics.

Edge weights are optimality criteria of the edge Fisher information matrix
(FIM). The weighted Laplacian built from them gives the log weighted
spanning-tree count (via the reduced Laplacian's Cholesky factor), the
algebraic connectivity and the normalized tree connectivity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import List, Literal, NamedTuple, Tuple

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

Criterion = Literal["a", "d", "e"]

_SYMMETRY_TOLERANCE = 1e-9


class InformationMatrixError(ValueError):
    """Raised for a FIM that is not a symmetric positive-definite 3x3 matrix."""


class GraphDisconnectedError(ValueError):
    """Raised when a spanning-tree metric is requested on a disconnected graph."""


class SpanningTreeNumericalError(ArithmeticError):
    """Raised when the reduced Laplacian of a connected graph fails to factor."""


class EmptyEdgeSetError(ValueError):
    """Raised when an edge statistic is requested on a graph without edges."""


def normalize_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""

    wrapped = math.atan2(math.sin(theta), math.cos(theta))
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


class Pose(NamedTuple):
    x: float
    y: float
    theta: float = 0.0

    def distance_to(self, other: "Pose") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class EdgeKind(str, Enum):
    ODOMETRY = "odometry"
    LOOP_CLOSURE = "loop_closure"


@dataclass(frozen=True)
class PoseNode:
    id: int
    pose: Pose


@dataclass(frozen=True)
class PoseEdge:
    from_id: int
    to_id: int
    info: np.ndarray = field(compare=False)
    kind: EdgeKind = EdgeKind.ODOMETRY


def validate_information(info: np.ndarray) -> np.ndarray:
    matrix = np.asarray(info, dtype=float)
    if matrix.shape != (3, 3):
        raise InformationMatrixError(f"FIM must be 3x3, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InformationMatrixError("FIM contains non-finite entries")
    if np.max(np.abs(matrix - matrix.T)) >= _SYMMETRY_TOLERANCE:
        raise InformationMatrixError("FIM is not symmetric")
    if np.min(np.linalg.eigvalsh(matrix)) <= 0.0:
        raise InformationMatrixError("FIM is not positive-definite")
    return matrix


@lru_cache(maxsize=256)
def _edge_optimality_cached(info_bytes: bytes, criterion: str) -> float:
    matrix = np.frombuffer(info_bytes, dtype=float).reshape(3, 3)
    eig = np.linalg.eigvalsh(matrix)
    if criterion == "d":
        return float(np.exp(np.mean(np.log(eig))))
    if criterion == "a":
        return float(len(eig) / np.sum(1.0 / eig))
    if criterion == "e":
        return float(np.min(eig))
    raise ValueError(f"unknown optimality criterion '{criterion}'")


def edge_optimality(info: np.ndarray, criterion: Criterion = "d") -> float:
    """Information-like scalar of an edge FIM (larger is more informative).

    ``d``: geometric mean of the eigenvalues; ``a``: harmonic mean;
    ``e``: smallest eigenvalue.
    """

    matrix = np.ascontiguousarray(validate_information(info), dtype=float)
    return _edge_optimality_cached(matrix.tobytes(), criterion)


def edge_d_optimality(edge: PoseEdge | np.ndarray) -> float:
    info = edge.info if isinstance(edge, PoseEdge) else edge
    return edge_optimality(info, "d")


@dataclass
class PoseGraph:
    """Nodes with dense ids from 0 and undirected edges (parallel edges allowed)."""

    nodes: List[PoseNode] = field(default_factory=list)
    edges: List[PoseEdge] = field(default_factory=list)

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def add_node(self, pose: Pose | Tuple[float, float, float]) -> int:
        x, y, theta = pose
        node = PoseNode(len(self.nodes), Pose(float(x), float(y), normalize_angle(theta)))
        self.nodes.append(node)
        return node.id

    def add_edge(
        self,
        from_id: int,
        to_id: int,
        info: np.ndarray,
        kind: EdgeKind = EdgeKind.ODOMETRY,
    ) -> PoseEdge:
        if from_id == to_id:
            raise ValueError("self-loop edges are not allowed")
        for node_id in (from_id, to_id):
            if not 0 <= node_id < len(self.nodes):
                raise ValueError(f"edge endpoint {node_id} does not exist")
        matrix = validate_information(info).copy()
        matrix.setflags(write=False)
        edge = PoseEdge(from_id, to_id, matrix, kind)
        self.edges.append(edge)
        return edge

    def loop_closure_count(self) -> int:
        return sum(1 for edge in self.edges if edge.kind == EdgeKind.LOOP_CLOSURE)

    def copy(self) -> "PoseGraph":
        return PoseGraph(nodes=list(self.nodes), edges=list(self.edges))


def weighted_laplacian(graph: PoseGraph, criterion: Criterion = "d") -> np.ndarray:
    n = graph.node_count
    if n == 0:
        raise ValueError("graph must contain at least one node")
    laplacian = np.zeros((n, n))
    if not graph.edges:
        return laplacian
    i = np.fromiter((e.from_id for e in graph.edges), dtype=np.int64)
    j = np.fromiter((e.to_id for e in graph.edges), dtype=np.int64)
    w = np.fromiter((edge_optimality(e.info, criterion) for e in graph.edges), dtype=float)
    np.add.at(laplacian, (i, j), -w)
    np.add.at(laplacian, (j, i), -w)
    np.add.at(laplacian, (i, i), w)
    np.add.at(laplacian, (j, j), w)
    return laplacian


def is_connected(graph: PoseGraph) -> bool:
    n = graph.node_count
    if n <= 1:
        return n == 1
    if not graph.edges:
        return False
    rows = [e.from_id for e in graph.edges]
    cols = [e.to_id for e in graph.edges]
    adjacency = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, _ = connected_components(adjacency, directed=False)
    return count == 1


def log_spanning_trees(graph: PoseGraph, criterion: Criterion = "d") -> float:
    """Natural log of the weighted spanning-tree count (Matrix-Tree theorem)."""

    if graph.node_count == 0:
        raise ValueError("graph must contain at least one node")
    if not is_connected(graph):
        raise GraphDisconnectedError(
            f"graph with {graph.node_count} nodes and {graph.edge_count} edges "
            "is not connected"
        )
    if graph.node_count == 1:
        return 0.0
    reduced = weighted_laplacian(graph, criterion)[1:, 1:]
    try:
        factor = linalg.cholesky(reduced, lower=True)
    except linalg.LinAlgError as exc:
        raise SpanningTreeNumericalError(
            "reduced Laplacian is not numerically positive-definite"
        ) from exc
    return float(2.0 * np.sum(np.log(np.diag(factor))))


def algebraic_connectivity(graph: PoseGraph, criterion: Criterion = "d") -> float:
    """Second-smallest eigenvalue of the weighted Laplacian (Fiedler value)."""

    if graph.node_count < 2:
        raise ValueError("algebraic connectivity needs at least two nodes")
    eig = linalg.eigvalsh(weighted_laplacian(graph, criterion))
    return max(float(eig[1]), 0.0)


def average_degree(graph: PoseGraph) -> float:
    if graph.node_count == 0:
        raise ValueError("graph must contain at least one node")
    return 2.0 * graph.edge_count / graph.node_count


def normalized_tree_connectivity(graph: PoseGraph, criterion: Criterion = "d") -> float:
    if graph.node_count < 2:
        raise ValueError("normalized tree connectivity needs at least two nodes")
    return log_spanning_trees(graph, criterion) / (graph.node_count - 1)


def edge_weight_stats(
    graph: PoseGraph, criterion: Criterion = "d"
) -> Tuple[float, float, float]:
    """(mean, min, max) of the per-edge optimality values."""

    if not graph.edges:
        raise EmptyEdgeSetError("graph has no edges")
    values = np.array([edge_optimality(e.info, criterion) for e in graph.edges])
    return float(values.mean()), float(values.min()), float(values.max())


def graph_uncertainty(graph: PoseGraph, criterion: Criterion = "d") -> float:
    """Mean edge D-optimality (or the chosen criterion) over the whole graph."""

    return edge_weight_stats(graph, criterion)[0]


_UPPER = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]


def _relative(a: Pose, b: Pose) -> Tuple[float, float, float]:
    dx, dy = b.x - a.x, b.y - a.y
    c, s = math.cos(a.theta), math.sin(a.theta)
    return c * dx + s * dy, -s * dx + c * dy, normalize_angle(b.theta - a.theta)


def write_g2o(graph: PoseGraph, path: str | Path) -> None:
    """Write ``VERTEX_SE2`` / ``EDGE_SE2`` lines.

    Edges carry the relative pose of ``to`` in the frame of ``from`` followed
    by the upper triangle of the information matrix, row by row.
    """

    lines = [
        f"VERTEX_SE2 {n.id} {n.pose.x:.9g} {n.pose.y:.9g} {n.pose.theta:.9g}"
        for n in graph.nodes
    ]
    for edge in graph.edges:
        rel = _relative(graph.nodes[edge.from_id].pose, graph.nodes[edge.to_id].pose)
        info = " ".join(f"{edge.info[r, c]:.9g}" for r, c in _UPPER)
        measurement = " ".join(f"{v:.9g}" for v in rel)
        lines.append(f"EDGE_SE2 {edge.from_id} {edge.to_id} {measurement} {info}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_g2o(path: str | Path) -> PoseGraph:
    """Parse a file produced by :func:`write_g2o`.

    Edges whose vertex pair is consecutive in id are tagged as odometry,
    every other edge as a loop closure.
    """

    vertices: dict[int, Pose] = {}
    raw_edges: list[tuple[int, int, np.ndarray]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "VERTEX_SE2":
                vertices[int(parts[1])] = Pose(*(float(v) for v in parts[2:5]))
            elif parts[0] == "EDGE_SE2":
                upper = [float(v) for v in parts[6:12]]
                info = np.zeros((3, 3))
                for (r, c), value in zip(_UPPER, upper, strict=True):
                    info[r, c] = info[c, r] = value
                raw_edges.append((int(parts[1]), int(parts[2]), info))
            else:
                logger.debug("Skipping g2o line %d with tag %s", lineno, parts[0])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed g2o line") from exc

    if sorted(vertices) != list(range(len(vertices))):
        raise ValueError(f"{path}: vertex ids must be dense from 0")
    graph = PoseGraph()
    for node_id in range(len(vertices)):
        graph.add_node(vertices[node_id])
    for from_id, to_id, info in raw_edges:
        kind = EdgeKind.ODOMETRY if abs(from_id - to_id) == 1 else EdgeKind.LOOP_CLOSURE
        graph.add_edge(from_id, to_id, info, kind)
    return graph
