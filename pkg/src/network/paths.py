import logging
from dataclasses import dataclass

import numpy as np

from src.network.graph import RoadGraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceMatrix:
    """All-pairs shortest-path closure of a road graph.

    ``next_hop[i, j]`` is the node that follows ``i`` on a shortest path to ``j``.
    """

    dist: np.ndarray
    next_hop: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.dist.shape[0]


def all_pairs_shortest_paths(graph: RoadGraph) -> DistanceMatrix:
    """Floyd-Warshall over the dense weight matrix.

    The relaxation over intermediate node k is applied to all (i, j) pairs at once;
    the successor of i towards j takes the successor towards k on strict improvement.
    """
    dist = graph.weight_matrix()
    n = dist.shape[0]
    next_hop = np.where(np.isfinite(dist), np.arange(n)[None, :], -1)

    for k in range(n):
        via = dist[:, k : k + 1] + dist[k : k + 1, :]
        better = via < dist
        if not better.any():
            continue
        dist = np.where(better, via, dist)
        next_hop = np.where(better, next_hop[:, k : k + 1], next_hop)

    logger.debug(f"Shortest-path closure computed for {n} nodes")
    return DistanceMatrix(dist=dist, next_hop=next_hop)


def shortest_path(matrix: DistanceMatrix, a: int, b: int) -> list[int]:
    path = [a]
    current = a
    for _ in range(matrix.num_nodes):
        if current == b:
            return path
        current = int(matrix.next_hop[current, b])
        if current < 0:
            raise ValueError(f"No path from {a} to {b}")
        path.append(current)
    if current != b:
        raise ValueError(f"Successor table does not reach {b} from {a}")
    return path


def path_length(graph: RoadGraph, path: list[int]) -> float:
    return float(sum(graph.link_length(a, b) for a, b in zip(path[:-1], path[1:])))
