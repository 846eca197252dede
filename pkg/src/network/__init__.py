from src.network.graph import Node, RoadGraph, generate_grid_network, load_network, save_network
from src.network.paths import DistanceMatrix, all_pairs_shortest_paths, shortest_path
from src.network.regions import (
    DemandDensity,
    RegionPartition,
    build_hotspot_density,
    kmeans_partition,
    rebalance_lengths,
    regional_marginals,
)
