import logging
import os
from typing import Optional

import numpy as np
import pandas as pd

from src.simulator.views import Request, ScenarioConfig
from src.simulator.world import World
from src.utils.errors import ConfigurationError, DataError
from src.utils.utils import write_csv_atomic

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["id", "t_issue_s", "origin_node", "dest_node"]
_MAX_RESAMPLES = 100


def _arrival_times(rate: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    if rate <= 0 or horizon <= 0:
        return np.zeros(0)
    expected = rate * horizon
    chunk = int(expected + 10.0 * np.sqrt(expected) + 10)
    times = np.cumsum(rng.exponential(1.0 / rate, size=chunk))
    while times[-1] < horizon:
        more = times[-1] + np.cumsum(rng.exponential(1.0 / rate, size=chunk))
        times = np.concatenate([times, more])
    return times[times < horizon]


def _sample_nodes(regions: np.ndarray, world: World, rng: np.random.Generator) -> np.ndarray:
    nodes = np.empty(regions.shape[0], dtype=int)
    for region in range(world.R):
        mask = regions == region
        count = int(mask.sum())
        if count:
            members = world.region_nodes(region)
            nodes[mask] = rng.choice(members, size=count, p=world.density.restricted(members))
    return nodes


def generate_requests(
    config: ScenarioConfig,
    world: World,
    rng: np.random.Generator,
    horizon: Optional[float] = None,
) -> list[Request]:
    """Poisson arrivals with origin region ~ phi_o and destination region ~ phi_d.

    ``horizon`` defaults to the simulated duration; a longer horizon yields the
    demand that forecasts look ahead into.
    """
    horizon = config.sim_duration if horizon is None else horizon
    times = _arrival_times(config.request_rate, horizon, rng)
    n = times.shape[0]
    if n == 0:
        return []
    R = world.R
    origin_regions = rng.choice(R, size=n, p=np.asarray(config.phi_o))
    dest_regions = rng.choice(R, size=n, p=np.asarray(config.phi_d))
    origins = _sample_nodes(origin_regions, world, rng)
    destinations = _sample_nodes(dest_regions, world, rng)

    for _ in range(_MAX_RESAMPLES):
        clash = np.flatnonzero(origins == destinations)
        if clash.size == 0:
            break
        destinations[clash] = _sample_nodes(dest_regions[clash], world, rng)
    else:
        # single-node destination regions can never avoid the origin; move those trips
        clash = np.flatnonzero(origins == destinations)
        dest_regions[clash] = rng.choice(R, size=clash.size, p=np.asarray(config.phi_d))
        destinations[clash] = _sample_nodes(dest_regions[clash], world, rng)
        destinations[origins == destinations] = (origins[origins == destinations] + 1) % world.num_nodes

    return [
        Request(id=i, t_issue=float(t), origin=int(o), destination=int(d))
        for i, (t, o, d) in enumerate(zip(times, origins, destinations))
    ]


def save_trace(requests: list[Request], path: str) -> str:
    df = pd.DataFrame(
        [(r.id, r.t_issue, r.origin, r.destination) for r in requests],
        columns=TRACE_COLUMNS,
    )
    return write_csv_atomic(df, path)


def load_trace(path: str, world: World) -> list[Request]:
    if not os.path.exists(path):
        raise ConfigurationError(f"Request trace '{path}' not found")
    df = pd.read_csv(path, encoding="utf-8")
    if list(df.columns) != TRACE_COLUMNS:
        raise DataError(f"{path}: expected header {','.join(TRACE_COLUMNS)}, got {','.join(df.columns)}")
    df = df.sort_values(["t_issue_s", "id"], kind="stable")
    for column in ("origin_node", "dest_node"):
        bad = df[(df[column] < 0) | (df[column] >= world.num_nodes)]
        if len(bad):
            raise DataError(f"{path}: {column} {int(bad[column].iloc[0])} is not a node of the network")
    same = df[df["origin_node"] == df["dest_node"]]
    if len(same):
        raise DataError(f"{path}: request {int(same['id'].iloc[0])} starts and ends at node {int(same['origin_node'].iloc[0])}")
    requests = [
        Request(id=int(row.id), t_issue=float(row.t_issue_s), origin=int(row.origin_node), destination=int(row.dest_node))
        for row in df.itertuples(index=False)
    ]
    logger.info(f"📍 Loaded {len(requests)} requests from {path}")
    return requests


def demand_matrices(requests: list[Request], world: World, T_u: float, num_windows: int) -> np.ndarray:
    """(num_windows, R, R) origin-destination request counts per upper window."""
    counts = np.zeros((num_windows, world.R, world.R))
    if not requests:
        return counts
    t = np.array([r.t_issue for r in requests])
    windows = np.floor(t / T_u).astype(int)
    keep = windows < num_windows
    regions = world.partition.assignment
    o = regions[np.array([r.origin for r in requests])]
    d = regions[np.array([r.destination for r in requests])]
    np.add.at(counts, (windows[keep], o[keep], d[keep]), 1.0)
    return counts
