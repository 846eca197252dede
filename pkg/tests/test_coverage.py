import sys

sys.path.append(".")

import numpy as np

from src.coverage.voronoi import (
    CoverageConfig,
    cell_centroid,
    coverage_objective,
    coverage_step,
    graph_voronoi,
    lloyd_teleport,
)
from src.network.graph import Node, RoadGraph, generate_grid_network
from src.network.paths import all_pairs_shortest_paths


def _path_graph(n: int = 3):
    nodes = [Node(i, float(i), 0.0) for i in range(n)]
    links = [(i, i + 1, 1.0) for i in range(n - 1)] + [(i + 1, i, 1.0) for i in range(n - 1)]
    return all_pairs_shortest_paths(RoadGraph(nodes=nodes, links=links))


def _random_graph(rng: np.random.Generator, n: int = 100):
    pairs = {(i, (i + 1) % n) for i in range(n)}
    for _ in range(2 * n):
        a, b = (int(v) for v in rng.integers(0, n, size=2))
        if a != b:
            pairs.add((min(a, b), max(a, b)))
    links = []
    for a, b in sorted(pairs):
        length = float(rng.uniform(0.1, 1.0))
        links += [(a, b, length), (b, a, length)]
    nodes = [Node(i, float(rng.random()), float(rng.random())) for i in range(n)]
    return all_pairs_shortest_paths(RoadGraph(nodes=nodes, links=links))


def test_single_vehicle_covers_everything():
    dist = _path_graph(5)
    cells = graph_voronoi(dist, {0: 2}, r=10.0, scope=range(5))
    np.testing.assert_array_equal(cells[0].nodes, [0, 1, 2, 3, 4])


def test_ties_go_to_lower_vehicle_id():
    dist = _path_graph(3)
    cells = graph_voronoi(dist, {0: 0, 1: 2}, r=2.0, scope=range(3))
    np.testing.assert_array_equal(cells[0].nodes, [0, 1])
    np.testing.assert_array_equal(cells[1].nodes, [2])

    swapped = graph_voronoi(dist, {5: 0, 3: 2}, r=2.0, scope=range(3))
    np.testing.assert_array_equal(swapped[3].nodes, [1, 2])


def test_radius_limits_cells():
    dist = all_pairs_shortest_paths(generate_grid_network(3, 3, 1.0))
    cells = graph_voronoi(dist, {0: 4}, r=0.5, scope=range(9))
    np.testing.assert_array_equal(cells[0].nodes, [4])


def test_cells_are_disjoint_and_within_radius():
    rng = np.random.default_rng(0)
    dist = _random_graph(rng)
    vehicles = {int(i): int(n) for i, n in enumerate(rng.choice(100, size=8, replace=False))}
    cells = graph_voronoi(dist, vehicles, r=0.8, scope=range(100))
    seen = set()
    for vehicle, cell in cells.items():
        assert cell.owner_node in cell.nodes
        assert seen.isdisjoint(cell.nodes.tolist())
        seen.update(cell.nodes.tolist())
        assert np.all(dist.dist[cell.owner_node, cell.nodes] <= 0.8)
        for other, node in vehicles.items():
            assert np.all(dist.dist[cell.owner_node, cell.nodes] <= dist.dist[node, cell.nodes])


def test_centroid_examples():
    dist = _path_graph(3)
    cell = graph_voronoi(dist, {0: 0}, r=5.0, scope=range(3))[0]
    assert cell_centroid(cell, np.full(3, 1 / 3), dist) == 1
    assert cell_centroid(cell, np.array([0.0, 0.0, 1.0]), dist) == 2

    singleton = graph_voronoi(dist, {0: 2}, r=0.5, scope=range(3))[0]
    assert cell_centroid(singleton, np.full(3, 1 / 3), dist) == 2


def test_centroid_ties():
    # nodes 1 and 2 both minimize on a uniform 4-node path
    dist = _path_graph(4)
    phi = np.full(4, 0.25)
    cell = graph_voronoi(dist, {0: 3}, r=5.0, scope=range(4))[0]
    assert cell_centroid(cell, phi, dist) == 1
    assert cell_centroid(cell, phi, dist, prefer=2) == 2
    assert cell_centroid(cell, phi, dist, prefer=0) == 1

    config = CoverageConfig(r=5.0)
    assert coverage_step({0: 2}, dist, phi, config, range(4)) == {0: 2}
    assert coverage_step({0: 3}, dist, phi, config, range(4)) == {0: 1}


def test_coverage_step_examples():
    dist = _path_graph(3)
    phi = np.full(3, 1 / 3)
    config = CoverageConfig(r=2.0)
    assert coverage_step({0: 0}, dist, phi, config, range(3)) == {0: 1}
    assert coverage_step({0: 1}, dist, phi, config, range(3)) == {0: 1}
    assert coverage_step({}, dist, phi, config, range(3)) == {}


def test_co_located_vehicles():
    dist = _path_graph(3)
    targets = coverage_step({0: 0, 1: 0}, dist, np.full(3, 1 / 3), CoverageConfig(r=2.0), range(3))
    assert targets == {0: 1, 1: 0}


def test_coverage_objective_examples():
    dist = _path_graph(3)
    phi = np.array([0.5, 0.5, 0.0])
    assert coverage_objective([0], phi, dist, 2.0, [0, 1]) == 0.5
    assert coverage_objective([], phi, dist, 2.0, [0, 1]) == 2.0


def test_lloyd_descent_on_random_graphs():
    config = CoverageConfig(r=1.0)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        dist = _random_graph(rng)
        phi = rng.dirichlet(np.ones(100))
        start = {int(i): int(n) for i, n in enumerate(rng.choice(100, size=6, replace=False))}
        positions, history = lloyd_teleport(start, phi, dist, config, scope=range(100))

        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:])), f"seed {seed}: {history}"
        assert len(history) - 1 <= 100
        assert coverage_step(positions, dist, phi, config, range(100)) == positions


def test_mass_point_attracts_a_vehicle():
    dist = all_pairs_shortest_paths(generate_grid_network(5, 5, 0.5))
    phi = np.zeros(25)
    phi[12] = 1.0
    positions, _ = lloyd_teleport({0: 0, 1: 24, 2: 4}, phi, dist, CoverageConfig(r=2.5), scope=range(25))
    assert 12 in positions.values()


def test_partition_is_deterministic():
    rng = np.random.default_rng(3)
    dist = _random_graph(rng)
    phi = rng.dirichlet(np.ones(100))
    vehicles = {3: 10, 1: 50, 7: 90}
    first = coverage_step(vehicles, dist, phi, CoverageConfig(r=1.0), range(100))
    second = coverage_step(dict(reversed(list(vehicles.items()))), dist, phi, CoverageConfig(r=1.0), range(100))
    assert first == second
