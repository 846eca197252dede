import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.network.graph import RoadGraph
from src.network.paths import DistanceMatrix, all_pairs_shortest_paths
from src.network.regions import (
    DemandDensity,
    RegionPartition,
    build_hotspot_density,
    kmeans_partition,
    nearest_node_in_region,
    rebalance_lengths,
    regional_marginals,
)
from src.simulator.views import ScenarioConfig
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass
class World:
    """Static part of a scenario shared by every run on the same network."""

    graph: RoadGraph
    dist: DistanceMatrix
    partition: RegionPartition
    density: DemandDensity
    nearest_in_region: np.ndarray
    lengths: np.ndarray
    link_lengths: np.ndarray

    @property
    def R(self) -> int:
        return self.partition.R

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def rebalance_weights(self) -> np.ndarray:
        return self.lengths.ravel()

    def region_nodes(self, region: int) -> np.ndarray:
        return self.partition.nodes_of(region)


def build_world(
    graph: RoadGraph,
    scenario: ScenarioConfig,
    partition_seed: int = 0,
    lengths: Optional[list[list[float]]] = None,
) -> World:
    R = len(scenario.phi_o)
    dist = all_pairs_shortest_paths(graph)
    partition = kmeans_partition(graph, R, partition_seed)
    density = build_hotspot_density(
        graph,
        dist,
        partition,
        scenario.phi_o,
        bandwidth_km=scenario.hotspot_bandwidth_km,
        hotspots=scenario.hotspots,
    )
    if lengths is None:
        length_matrix = rebalance_lengths(dist, partition)
    else:
        length_matrix = np.asarray(lengths, dtype=float)
        if length_matrix.shape != (R, R):
            raise ConfigurationError(f"rebalance_lengths must be {R}x{R}, got {length_matrix.shape}")
    marginals = regional_marginals(density, partition)
    logger.info(
        f"📍 World: {graph.num_nodes} nodes, {graph.num_links} links, {R} regions, "
        f"origin marginals {np.round(marginals, 3).tolist()}"
    )
    return World(
        graph=graph,
        dist=dist,
        partition=partition,
        density=density,
        nearest_in_region=nearest_node_in_region(dist, partition),
        lengths=length_matrix,
        link_lengths=graph.weight_matrix(),
    )
