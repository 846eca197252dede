import logging

import numpy as np

from src.coverage.voronoi import CoverageConfig
from src.deepc.hankel import CollectedData
from src.policies.policy import PolicyContext, PolicyKind, build_policy
from src.simulator.fleet_sim import FleetSimulator
from src.simulator.views import ScenarioConfig
from src.simulator.world import World

logger = logging.getLogger(__name__)


def collect_data_run(
    scenario: ScenarioConfig,
    world: World,
    coverage: CoverageConfig,
    T_d: int,
    seed: int,
) -> CollectedData:
    """Drive the fleet with random transfer ratios for T_d upper windows and record (u, w, y)."""
    collection_scenario = scenario.model_copy(update={"sim_duration": T_d * scenario.T_u, "seed": seed})
    policy = build_policy(PolicyContext(kind=PolicyKind.RANDOM_COLLECT, coverage=coverage))
    sim = FleetSimulator(collection_scenario, world, policy=policy, label="collection")
    logger.info(f"📍 Collecting {T_d} windows of excitation data (seed {seed})")
    sim.run()

    u = np.array(policy.recorded_u)
    w = np.array([m.w for m in sim.measurements])
    y = np.array([m.y for m in sim.measurements])
    e = np.array(policy.recorded_e)
    if u.shape[0] != T_d or w.shape[0] != T_d:
        raise RuntimeError(f"Collection produced {u.shape[0]} commands and {w.shape[0]} windows, expected {T_d}")
    return CollectedData(
        u=u,
        w=w,
        y=y,
        metadata={
            "T_d": T_d,
            "T_u": scenario.T_u,
            "R": world.R,
            "seed": seed,
            "fleet_size": scenario.fleet_size,
        },
        e=e,
    )
