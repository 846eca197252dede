import sys

sys.path.append(".")

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from src.network.graph import Node, RoadGraph, generate_grid_network, load_network, save_network, validate_graph
from src.network.paths import all_pairs_shortest_paths, path_length, shortest_path
from src.network.regions import (
    DemandDensity,
    RegionPartition,
    build_hotspot_density,
    kmeans_partition,
    nearest_node_in_region,
    rebalance_lengths,
    regional_marginals,
    uniform_density,
)
from src.simulator.views import DEFAULT_PHI_O
from src.utils.errors import (
    ConfigurationError,
    DanglingEndpointError,
    DisconnectedGraphError,
    NetworkParseError,
    NonPositiveLengthError,
)


def _triangle() -> RoadGraph:
    nodes = [Node(0, 0.0, 0.0), Node(1, 1.0, 0.0), Node(2, 2.0, 0.0)]
    links = [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0), (0, 2, 3.0), (2, 0, 3.0)]
    return RoadGraph(nodes=nodes, links=links)


def _write_files(tmp_path, nodes: str, links: str):
    nodes_path = tmp_path / "nodes.csv"
    links_path = tmp_path / "links.csv"
    nodes_path.write_text(nodes, encoding="utf-8")
    links_path.write_text(links, encoding="utf-8")
    return str(nodes_path), str(links_path)


TRIANGLE_NODES = "id,x,y\n0,0,0\n1,1,0\n2,2,0\n"
TRIANGLE_LINKS = "from,to,length_km\n0,1,1\n1,0,1\n1,2,1\n2,1,1\n0,2,3\n2,0,3\n"


def _random_graph(rng: np.random.Generator, n: int) -> RoadGraph:
    """Ring for strong connectivity plus random chords, integer lengths, no parallel links."""
    pairs = {(i, (i + 1) % n) for i in range(n)}
    for _ in range(3 * n):
        a, b = (int(v) for v in rng.integers(0, n, size=2))
        if a != b:
            pairs.add((a, b))
    links = [(a, b, float(rng.integers(1, 20))) for a, b in sorted(pairs)]
    nodes = [Node(i, float(rng.random()), float(rng.random())) for i in range(n)]
    return RoadGraph(nodes=nodes, links=links)


def test_grid_counts():
    small = generate_grid_network(2, 2, 1.0)
    assert small.num_nodes == 4
    assert small.num_links == 8
    assert all(length == 1.0 for _, _, length in small.links)

    desk = generate_grid_network(15, 15, 0.3)
    assert desk.num_nodes == 225
    assert desk.num_links == 840
    validate_graph(desk)


def test_grid_rejects_bad_dimensions():
    with pytest.raises(ConfigurationError):
        generate_grid_network(1, 5, 1.0)
    with pytest.raises(ConfigurationError):
        generate_grid_network(3, 3, 0.0)


def test_load_triangle(tmp_path):
    graph = load_network(*_write_files(tmp_path, TRIANGLE_NODES, TRIANGLE_LINKS))
    assert graph.num_nodes == 3
    assert graph.num_links == 6


def test_load_errors(tmp_path):
    dangling = TRIANGLE_LINKS + "2,99,1\n"
    with pytest.raises(DanglingEndpointError):
        load_network(*_write_files(tmp_path, TRIANGLE_NODES, dangling))

    with pytest.raises(NonPositiveLengthError):
        load_network(*_write_files(tmp_path, TRIANGLE_NODES, TRIANGLE_LINKS.replace("0,2,3", "0,2,0")))

    split_nodes = "id,x,y\n0,0,0\n1,1,0\n2,5,0\n3,6,0\n"
    split_links = "from,to,length_km\n0,1,1\n1,0,1\n2,3,1\n3,2,1\n"
    with pytest.raises(DisconnectedGraphError):
        load_network(*_write_files(tmp_path, split_nodes, split_links))

    with pytest.raises(NetworkParseError):
        load_network(*_write_files(tmp_path, "node,x,y\n0,0,0\n", TRIANGLE_LINKS))


def test_network_files_reload(tmp_path):
    grid = generate_grid_network(3, 4, 0.5)
    nodes_path, links_path = str(tmp_path / "n.csv"), str(tmp_path / "l.csv")
    save_network(grid, nodes_path, links_path)
    loaded = load_network(nodes_path, links_path)
    assert loaded.num_nodes == grid.num_nodes
    assert sorted(loaded.links) == sorted(grid.links)


def test_triangle_shortest_paths():
    matrix = all_pairs_shortest_paths(_triangle())
    assert matrix.dist[0, 2] == 2.0
    assert np.all(np.diag(matrix.dist) == 0.0)
    assert shortest_path(matrix, 0, 2) == [0, 1, 2]
    assert shortest_path(matrix, 1, 1) == [1]


def test_grid_corner_distance():
    grid = generate_grid_network(2, 2, 1.0)
    matrix = all_pairs_shortest_paths(grid)
    assert matrix.dist[0, 3] == 2.0
    path = shortest_path(matrix, 0, 3)
    assert len(path) == 3
    assert path_length(grid, path) == 2.0


def test_floyd_warshall_matches_dijkstra():
    rng = np.random.default_rng(7)
    for trial in range(20):
        n = int(rng.integers(5, 200))
        graph = _random_graph(rng, n)
        matrix = all_pairs_shortest_paths(graph)

        rows, cols, data = zip(*graph.links)
        sparse = csr_matrix((data, (rows, cols)), shape=(n, n))
        oracle = dijkstra(sparse, directed=True)
        np.testing.assert_array_equal(matrix.dist, oracle)

        for a in range(0, n, max(1, n // 10)):
            for b in range(n):
                path = shortest_path(matrix, a, b)
                assert path[0] == a and path[-1] == b
                assert abs(path_length(graph, path) - matrix.dist[a, b]) <= 1e-9


def test_triangle_inequality():
    matrix = all_pairs_shortest_paths(generate_grid_network(4, 5, 0.3))
    d = matrix.dist
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-12)


def test_kmeans_is_deterministic():
    grid = generate_grid_network(15, 15, 0.3)
    first = kmeans_partition(grid, 5, seed=3)
    second = kmeans_partition(grid, 5, seed=3)
    np.testing.assert_array_equal(first.assignment, second.assignment)
    assert np.all(first.sizes() > 0)
    # regions are numbered by centroid x
    assert np.all(np.diff(first.seeds[:, 0]) >= 0)


def test_kmeans_edge_counts():
    grid = generate_grid_network(3, 3, 1.0)
    single = kmeans_partition(grid, 1, seed=0)
    assert np.all(single.assignment == 0)

    every = kmeans_partition(grid, grid.num_nodes, seed=0)
    assert np.all(every.sizes() == 1)

    with pytest.raises(ConfigurationError):
        kmeans_partition(grid, grid.num_nodes + 1, seed=0)


def test_kmeans_separated_clouds():
    rng = np.random.default_rng(0)
    left = rng.normal(0.0, 0.1, size=(10, 2))
    right = rng.normal(10.0, 0.1, size=(10, 2))
    coords = np.vstack([left, right])
    graph = RoadGraph(nodes=[Node(i, float(x), float(y)) for i, (x, y) in enumerate(coords)], links=[])
    partition = kmeans_partition(graph, 2, seed=1)
    assert np.all(partition.assignment[:10] == 0)
    assert np.all(partition.assignment[10:] == 1)


def test_regional_marginals():
    partition = RegionPartition(R=5, assignment=np.repeat(np.arange(5), 4), seeds=np.zeros((5, 2)))
    np.testing.assert_allclose(regional_marginals(uniform_density(20), partition), [0.2] * 5)

    phi = np.zeros(20)
    phi[9] = 1.0
    np.testing.assert_array_equal(regional_marginals(DemandDensity(phi=phi), partition), [0, 0, 1, 0, 0])


def test_hotspot_density_hits_marginals():
    grid = generate_grid_network(15, 15, 0.3)
    dist = all_pairs_shortest_paths(grid)
    partition = kmeans_partition(grid, 5, seed=0)
    density = build_hotspot_density(grid, dist, partition, DEFAULT_PHI_O)

    assert np.all(density.phi > 0)
    assert abs(density.phi.sum() - 1.0) <= 1e-12
    marginals = regional_marginals(density, partition)
    assert abs(marginals.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(marginals, DEFAULT_PHI_O, atol=1e-12)

    restricted = density.restricted(partition.nodes_of(1))
    assert abs(restricted.sum() - 1.0) <= 1e-12


def test_rebalance_lengths_and_nearest_nodes():
    grid = generate_grid_network(6, 6, 0.5)
    dist = all_pairs_shortest_paths(grid)
    partition = kmeans_partition(grid, 3, seed=0)
    lengths = rebalance_lengths(dist, partition)
    assert np.all(np.diag(lengths) == 0.0)
    off_diagonal = lengths[~np.eye(3, dtype=bool)]
    assert np.all(off_diagonal > 0)

    table = nearest_node_in_region(dist, partition)
    for node in range(grid.num_nodes):
        for region in range(3):
            target = table[node, region]
            assert partition.assignment[target] == region
            assert dist.dist[node, target] == dist.dist[node, partition.nodes_of(region)].min()
