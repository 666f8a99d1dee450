from __future__ import annotations

import logging

import itertools
import math
from typing import Iterable, Sequence, Tuple

import numpy as np
import pytest

from explorer.grid_map import UNKNOWN, OccupancyGrid
from explorer.pose_graph import PoseGraph

Edge = Tuple[int, int, float]


def make_grid(rows: Sequence[str], resolution: float = 0.2) -> OccupancyGrid:
    """Grid from text rows, top row first: ``.`` Free, ``#`` Occupied, ``?`` Unknown."""

    lookup = {".": 0, "#": 100, "?": UNKNOWN}
    cells = np.array([[lookup[ch] for ch in row] for row in rows], dtype=np.int16)
    return OccupancyGrid(cells=np.flipud(cells), resolution=resolution)


def graph_from_edges(node_count: int, edges: Iterable[Edge]) -> PoseGraph:
    """Pose graph whose edge D-optimality equals the given weight (isotropic FIM)."""

    graph = PoseGraph()
    for i in range(node_count):
        graph.add_node((float(i), 0.0, 0.0))
    for a, b, weight in edges:
        graph.add_edge(a, b, weight * np.eye(3))
    return graph


def brute_force_spanning_tree_sum(node_count: int, edges: Sequence[Edge]) -> float:
    """Sum over every spanning tree of the product of its edge weights."""

    total = 0.0
    for subset in itertools.combinations(range(len(edges)), node_count - 1):
        parent = list(range(node_count))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        weight = 1.0
        acyclic = True
        for index in subset:
            a, b, w = edges[index]
            ra, rb = find(a), find(b)
            if ra == rb:
                acyclic = False
                break
            parent[ra] = rb
            weight *= w
        if acyclic:
            total += weight
    return total


def union_find_connected(node_count: int, edges: Iterable[Edge]) -> bool:
    parent = list(range(node_count))

    def find(x: int) -> int:
        while parent[x] != x:
            x = parent[x]
        return x

    for a, b, _ in edges:
        parent[find(a)] = find(b)
    return len({find(i) for i in range(node_count)}) == 1


def binary_entropy_reference(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
