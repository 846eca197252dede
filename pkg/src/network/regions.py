import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.cluster import KMeans

from src.network.graph import RoadGraph
from src.network.paths import DistanceMatrix
from src.utils.errors import ConfigurationError
from src.utils.utils import write_csv_atomic

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-6


@dataclass(frozen=True)
class RegionPartition:
    R: int
    assignment: np.ndarray
    seeds: np.ndarray

    def nodes_of(self, region: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == region)

    def region_of(self, node: int) -> int:
        return int(self.assignment[node])

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.R)


@dataclass
class DemandDensity:
    """Node-level demand weights, globally normalized."""

    phi: np.ndarray
    _region_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def restricted(self, nodes: np.ndarray) -> np.ndarray:
        """Weights of ``nodes`` renormalized to sum to one."""
        key = nodes.tobytes()
        cached = self._region_cache.get(key)
        if cached is None:
            weights = self.phi[nodes]
            total = weights.sum()
            cached = weights / total if total > 0 else np.full(len(nodes), 1.0 / len(nodes))
            self._region_cache[key] = cached
        return cached


def kmeans_partition(graph: RoadGraph, R: int, seed: int) -> RegionPartition:
    """Lloyd K-means on node coordinates; regions are numbered by centroid x, then y."""
    n = graph.num_nodes
    if R < 1 or R > n:
        raise ConfigurationError(f"Region count must be in 1..{n}, got {R}")
    coords = graph.coordinates()

    kmeans = KMeans(n_clusters=R, n_init=1, max_iter=100, tol=0.0, random_state=seed, algorithm="lloyd")
    labels = kmeans.fit_predict(coords).astype(int)

    # re-seed any empty cluster with the node farthest from its current centroid
    counts = np.bincount(labels, minlength=R)
    while np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        centers = np.array([
            coords[labels == r].mean(axis=0) if counts[r] else np.zeros(2) for r in range(R)
        ])
        spread = np.linalg.norm(coords - centers[labels], axis=1)
        spread[counts[labels] <= 1] = -1.0
        labels[int(np.argmax(spread))] = empty
        counts = np.bincount(labels, minlength=R)

    centers = np.array([coords[labels == r].mean(axis=0) for r in range(R)])
    order = np.lexsort((centers[:, 1], centers[:, 0]))
    relabel = np.empty(R, dtype=int)
    relabel[order] = np.arange(R)
    partition = RegionPartition(R=R, assignment=relabel[labels], seeds=centers[order])
    logger.debug(f"K-means partition into {R} regions, sizes {partition.sizes().tolist()}")
    return partition


def regional_marginals(density: DemandDensity, partition: RegionPartition) -> np.ndarray:
    mass = np.bincount(partition.assignment, weights=density.phi, minlength=partition.R)
    return mass / mass.sum()


def default_hotspots(graph: RoadGraph, partition: RegionPartition) -> list[int]:
    coords = graph.coordinates()
    hotspots = []
    for region in range(partition.R):
        members = partition.nodes_of(region)
        gaps = np.linalg.norm(coords[members] - partition.seeds[region], axis=1)
        hotspots.append(int(members[np.argmin(gaps)]))
    return hotspots


def build_hotspot_density(
    graph: RoadGraph,
    dist: DistanceMatrix,
    partition: RegionPartition,
    marginals: Sequence[float],
    bandwidth_km: float = 0.6,
    hotspots: Optional[Sequence[int]] = None,
) -> DemandDensity:
    """Per-region truncated Gaussian bump around a hotspot node.

    Each region receives exactly its marginal mass; every node keeps at least the floor
    weight before normalization so no node is unreachable as an origin.
    """
    marginals = np.asarray(marginals, dtype=float)
    if marginals.shape != (partition.R,):
        raise ConfigurationError(f"Expected {partition.R} regional marginals, got {marginals.shape[0]}")
    if bandwidth_km <= 0:
        raise ConfigurationError(f"Hotspot bandwidth must be positive, got {bandwidth_km}")
    if hotspots is None:
        hotspots = default_hotspots(graph, partition)
    if len(hotspots) != partition.R:
        raise ConfigurationError(f"Expected one hotspot per region ({partition.R}), got {len(hotspots)}")

    phi = np.zeros(graph.num_nodes)
    for region in range(partition.R):
        members = partition.nodes_of(region)
        hotspot = int(hotspots[region])
        if partition.region_of(hotspot) != region:
            raise ConfigurationError(f"Hotspot node {hotspot} is not inside region {region}")
        d = dist.dist[hotspot, members]
        kernel = np.exp(-0.5 * (d / bandwidth_km) ** 2)
        kernel[d > 3.0 * bandwidth_km] = 0.0
        kernel += DENSITY_FLOOR
        phi[members] = marginals[region] * kernel / kernel.sum()
    phi /= phi.sum()
    return DemandDensity(phi=phi)


def uniform_density(num_nodes: int) -> DemandDensity:
    return DemandDensity(phi=np.full(num_nodes, 1.0 / num_nodes))


def rebalance_lengths(dist: DistanceMatrix, partition: RegionPartition) -> np.ndarray:
    """Average length of an empty trip from region I to the nearest node of region J."""
    R = partition.R
    lengths = np.zeros((R, R))
    for I in range(R):
        sources = partition.nodes_of(I)
        for J in range(R):
            if I == J:
                continue
            targets = partition.nodes_of(J)
            lengths[I, J] = dist.dist[np.ix_(sources, targets)].min(axis=1).mean()
    return lengths


def nearest_node_in_region(dist: DistanceMatrix, partition: RegionPartition) -> np.ndarray:
    """Table ``[node, J]`` of the closest node of region J by shortest-path distance."""
    table = np.empty((dist.num_nodes, partition.R), dtype=int)
    for J in range(partition.R):
        targets = partition.nodes_of(J)
        table[:, J] = targets[np.argmin(dist.dist[:, targets], axis=1)]
    return table


def save_partition(partition: RegionPartition, path: str) -> None:
    df = pd.DataFrame({"node_id": np.arange(len(partition.assignment)), "region_id": partition.assignment})
    write_csv_atomic(df, path)
