import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.network.paths import DistanceMatrix

logger = logging.getLogger(__name__)


class CoverageConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r: float = Field(1.5, gt=0, description="service radius in km")
    dump_partitions: bool = False


@dataclass(frozen=True)
class VoronoiCell:
    owner: int
    owner_node: int
    nodes: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])


def _sorted_vehicles(vehicle_nodes: Mapping[int, int]) -> tuple[np.ndarray, np.ndarray]:
    ids = np.array(sorted(vehicle_nodes), dtype=int)
    nodes = np.array([vehicle_nodes[i] for i in ids], dtype=int)
    return ids, nodes


def graph_voronoi(
    dist: DistanceMatrix,
    vehicle_nodes: Mapping[int, int],
    r: float,
    scope: Sequence[int],
) -> dict[int, VoronoiCell]:
    """r-limited Voronoi partition of the scoped nodes among the vehicles.

    A node belongs to the closest vehicle (lowest id on ties) if that vehicle is within r.
    """
    scope = np.asarray(scope, dtype=int)
    ids, nodes = _sorted_vehicles(vehicle_nodes)
    if ids.size == 0:
        return {}
    d = dist.dist[np.ix_(nodes, scope)]
    owner_index = np.argmin(d, axis=0)
    covered = d[owner_index, np.arange(scope.size)] <= r

    cells = {}
    for k, vehicle in enumerate(ids):
        members = np.sort(scope[covered & (owner_index == k)])
        cells[int(vehicle)] = VoronoiCell(owner=int(vehicle), owner_node=int(nodes[k]), nodes=members)
    return cells


def cell_centroid(
    cell: VoronoiCell,
    phi: np.ndarray,
    dist: DistanceMatrix,
    prefer: Optional[int] = None,
) -> int:
    """Cell node minimizing the demand-weighted distance to the rest of the cell.

    Ties go to ``prefer`` when it is among the minimizers, otherwise to the lowest node id.
    """
    if cell.size == 0:
        raise ValueError(f"Vehicle {cell.owner} has an empty cell")
    nodes = cell.nodes
    cost = dist.dist[np.ix_(nodes, nodes)] @ phi[nodes]
    best = cost.min()
    if prefer is not None:
        hits = np.flatnonzero(nodes == prefer)
        if hits.size and cost[hits[0]] <= best:
            return int(prefer)
    return int(nodes[np.argmin(cost)])


def coverage_step(
    idle_vehicles: Mapping[int, int],
    dist: DistanceMatrix,
    phi: np.ndarray,
    config: CoverageConfig,
    scope: Sequence[int],
) -> dict[int, int]:
    """One Lloyd update: each idle vehicle's target is the centroid of its cell.

    A vehicle whose cell is empty (another vehicle with a lower id shares its node)
    keeps its own node.
    """
    if not idle_vehicles:
        return {}
    cells = graph_voronoi(dist, idle_vehicles, config.r, scope)
    targets = {}
    for vehicle, cell in cells.items():
        if cell.size == 0:
            targets[vehicle] = cell.owner_node
        else:
            targets[vehicle] = cell_centroid(cell, phi, dist, prefer=cell.owner_node)
    return targets


def coverage_objective(
    vehicle_nodes: Sequence[int],
    phi: np.ndarray,
    dist: DistanceMatrix,
    r: float,
    scope: Sequence[int],
) -> float:
    """sum over scope of phi(q) * min(distance to the closest vehicle, r)."""
    scope = np.asarray(scope, dtype=int)
    vehicle_nodes = np.asarray(vehicle_nodes, dtype=int)
    if vehicle_nodes.size == 0:
        return float(phi[scope].sum() * r)
    nearest = dist.dist[np.ix_(vehicle_nodes, scope)].min(axis=0)
    return float(phi[scope] @ np.minimum(nearest, r))


def lloyd_teleport(
    vehicle_nodes: Mapping[int, int],
    phi: np.ndarray,
    dist: DistanceMatrix,
    config: CoverageConfig,
    scope: Sequence[int],
    max_iter: Optional[int] = None,
) -> tuple[dict[int, int], list[float]]:
    """Repeat partition-then-jump-to-centroid until no vehicle moves.

    Returns the final positions and the objective before each iteration and at the end.
    """
    positions = dict(vehicle_nodes)
    max_iter = len(scope) if max_iter is None else max_iter
    history = [coverage_objective(list(positions.values()), phi, dist, config.r, scope)]
    for _ in range(max_iter):
        targets = coverage_step(positions, dist, phi, config, scope)
        if targets == positions:
            break
        positions = targets
        history.append(coverage_objective(list(positions.values()), phi, dist, config.r, scope))
    return positions, history
