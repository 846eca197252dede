import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from src.utils.errors import (
    ConfigurationError,
    DanglingEndpointError,
    DisconnectedGraphError,
    NetworkParseError,
    NonPositiveLengthError,
)
from src.utils.utils import write_csv_atomic

logger = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 2000


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float


@dataclass
class RoadGraph:
    """Directed road network with strictly positive link lengths in km."""

    nodes: list[Node]
    links: list[tuple[int, int, float]]
    adjacency: dict[int, list[tuple[int, float]]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.adjacency:
            adjacency: dict[int, list[tuple[int, float]]] = {node.id: [] for node in self.nodes}
            for a, b, length in self.links:
                adjacency[a].append((b, length))
            self.adjacency = adjacency

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_links(self) -> int:
        return len(self.links)

    def coordinates(self) -> np.ndarray:
        return np.array([[node.x, node.y] for node in self.nodes], dtype=float)

    def weight_matrix(self) -> np.ndarray:
        """Dense |V|x|V| link-length matrix, inf where no link, 0 on the diagonal."""
        n = self.num_nodes
        weights = np.full((n, n), np.inf)
        for a, b, length in self.links:
            # parallel links collapse to the shortest one
            if length < weights[a, b]:
                weights[a, b] = length
        np.fill_diagonal(weights, 0.0)
        return weights

    def link_length(self, a: int, b: int) -> float:
        for target, length in self.adjacency[a]:
            if target == b:
                return length
        raise KeyError(f"no link {a}->{b}")


def validate_graph(graph: RoadGraph, max_nodes: int = DEFAULT_MAX_NODES) -> RoadGraph:
    n = graph.num_nodes
    if n == 0:
        raise NetworkParseError("Network has no nodes")
    if n > max_nodes:
        raise ConfigurationError(f"Network has {n} nodes, above the configured limit of {max_nodes}")
    ids = [node.id for node in graph.nodes]
    if ids != list(range(n)):
        raise NetworkParseError("Node ids must be dense 0..|V|-1 and listed in order")
    coords = graph.coordinates()
    if not np.all(np.isfinite(coords)):
        raise NetworkParseError("Node coordinates must be finite")

    for a, b, length in graph.links:
        if not (0 <= a < n and 0 <= b < n):
            raise DanglingEndpointError(f"Link {a}->{b} references a node outside 0..{n - 1}")
        if a == b:
            raise NetworkParseError(f"Self-loop on node {a}")
        if not np.isfinite(length) or length <= 0:
            raise NonPositiveLengthError(f"Link {a}->{b} has non-positive length {length}")

    if graph.links:
        rows = [a for a, _, _ in graph.links]
        cols = [b for _, b, _ in graph.links]
        adjacency = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        n_components, _ = connected_components(adjacency, directed=True, connection="strong")
    else:
        n_components = n
    if n_components != 1:
        raise DisconnectedGraphError(f"Network is not strongly connected ({n_components} components)")
    return graph


def generate_grid_network(rows: int, cols: int, spacing_km: float) -> RoadGraph:
    """Lattice of rows x cols intersections joined to their 4-neighbours in both directions."""
    if rows < 2 or cols < 2:
        raise ConfigurationError(f"Grid needs at least 2 rows and 2 columns, got {rows}x{cols}")
    if not spacing_km > 0:
        raise ConfigurationError(f"Grid spacing must be positive, got {spacing_km}")

    nodes = [Node(id=r * cols + c, x=c * spacing_km, y=r * spacing_km) for r in range(rows) for c in range(cols)]
    links: list[tuple[int, int, float]] = []
    for r in range(rows):
        for c in range(cols):
            here = r * cols + c
            if c + 1 < cols:
                links.append((here, here + 1, spacing_km))
                links.append((here + 1, here, spacing_km))
            if r + 1 < rows:
                links.append((here, here + cols, spacing_km))
                links.append((here + cols, here, spacing_km))
    graph = RoadGraph(nodes=nodes, links=links)
    logger.debug(f"Generated {rows}x{cols} grid: {graph.num_nodes} nodes, {graph.num_links} links")
    return graph


def load_network(nodes_path: str, links_path: str, max_nodes: int = DEFAULT_MAX_NODES) -> RoadGraph:
    for path in (nodes_path, links_path):
        if not os.path.exists(path):
            raise NetworkParseError(f"Network file '{path}' not found")
    try:
        nodes_df = pd.read_csv(nodes_path, encoding="utf-8")
        links_df = pd.read_csv(links_path, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise NetworkParseError(f"Could not parse network files: {e}") from e

    if list(nodes_df.columns) != ["id", "x", "y"]:
        raise NetworkParseError(f"{nodes_path}: expected header id,x,y, got {','.join(nodes_df.columns)}")
    if list(links_df.columns) != ["from", "to", "length_km"]:
        raise NetworkParseError(f"{links_path}: expected header from,to,length_km, got {','.join(links_df.columns)}")

    try:
        nodes_df = nodes_df.astype({"id": "int64", "x": "float64", "y": "float64"})
        links_df = links_df.astype({"from": "int64", "to": "int64", "length_km": "float64"})
    except (ValueError, TypeError) as e:
        raise NetworkParseError(f"Non-numeric value in network files: {e}") from e

    nodes_df = nodes_df.sort_values("id", kind="stable")
    nodes = [Node(id=int(row.id), x=float(row.x), y=float(row.y)) for row in nodes_df.itertuples(index=False)]
    links = [
        (int(a), int(b), float(length))
        for a, b, length in zip(links_df["from"], links_df["to"], links_df["length_km"])
    ]

    n = len(nodes)
    for a, b, _ in links:
        if not (0 <= a < n and 0 <= b < n):
            raise DanglingEndpointError(f"Link {a}->{b} references a node outside 0..{n - 1}")
    graph = validate_graph(RoadGraph(nodes=nodes, links=links), max_nodes=max_nodes)
    logger.info(f"📍 Loaded network: {graph.num_nodes} nodes, {graph.num_links} links")
    return graph


def save_network(graph: RoadGraph, nodes_path: str, links_path: str) -> None:
    nodes_df = pd.DataFrame({
        "id": [node.id for node in graph.nodes],
        "x": [node.x for node in graph.nodes],
        "y": [node.y for node in graph.nodes],
    })
    links_df = pd.DataFrame(graph.links, columns=["from", "to", "length_km"])
    write_csv_atomic(nodes_df, nodes_path)
    write_csv_atomic(links_df, links_path)
