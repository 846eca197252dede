import logging
from collections import defaultdict

import numpy as np

from src.coverage.voronoi import cell_centroid, coverage_objective, coverage_step, graph_voronoi
from src.deepc.controller import integer_command
from src.deepc.views import ControlCommand
from src.policies.assignment import solve_assignment
from src.policies.policy import Policy, PolicyKind, register_policy
from src.simulator.views import RequestStatus, VehicleStatus

logger = logging.getLogger(__name__)


def lower_layer_targets(sim, coverage, step: int) -> dict[int, int]:
    """Coverage targets for every idle vehicle, computed region by region."""
    world = sim.world
    phi = world.density.phi
    by_region: dict[int, dict[int, int]] = defaultdict(dict)
    for vehicle in sim.vehicles:
        if vehicle.status == VehicleStatus.IDLE:
            node = sim.nearest_node(vehicle)
            by_region[int(world.partition.assignment[node])][vehicle.id] = node

    targets: dict[int, int] = {}
    for region in sorted(by_region):
        idle = by_region[region]
        scope = world.region_nodes(region)
        region_targets = coverage_step(idle, world.dist, phi, coverage, scope)
        targets.update(region_targets)
        if coverage.dump_partitions:
            cells = graph_voronoi(world.dist, idle, coverage.r, scope)
            objective = coverage_objective(list(idle.values()), phi, world.dist, coverage.r, scope)
            for vehicle_id, cell in cells.items():
                sim.partition_rows.append(
                    (step, vehicle_id, cell.owner_node, cell.size, region_targets[vehicle_id], objective)
                )
    return targets


@register_policy(PolicyKind.NO_CONTROL)
class NoControl(Policy):
    """Empty vehicles wait where they became empty."""


@register_policy(PolicyKind.LOWER_ONLY)
class LowerOnly(Policy):
    def __init__(self, context):
        super().__init__(context)
        self.steps = 0

    def on_lower(self, sim) -> None:
        sim.apply_lower_targets(lower_layer_targets(sim, self.context.coverage, self.steps))
        self.steps += 1


@register_policy(PolicyKind.UPPER_ONLY)
class UpperOnly(Policy):
    """Inter-regional transfers from the DeePC controller; arrivals stay where they stop."""

    def on_upper(self, sim, k: int, measurement) -> None:
        controller = self.context.controller
        if measurement is not None:
            controller.observe(measurement.w, measurement.y)
        e = sim.empty_counts()
        w_future = sim.forecast(k, controller.hankels.N, self.context.forecast_sigma2)
        command = controller.step(e, w_future)
        moved = sim.apply_upper_command(command)
        logger.debug(f"Window {k}: e={e.tolist()} relocations={moved}")


@register_policy(PolicyKind.HIERARCHICAL)
class Hierarchical(UpperOnly):
    """Upper-layer transfers, then coverage positioning of the vehicles told to stay."""

    def __init__(self, context):
        super().__init__(context)
        self.steps = 0

    def on_lower(self, sim) -> None:
        if not self.context.lower_enabled:
            return
        sim.apply_lower_targets(lower_layer_targets(sim, self.context.coverage, self.steps))
        self.steps += 1


@register_policy(PolicyKind.LP_REBALANCE)
class LpRebalance(Policy):
    """Periodic min-travel-time assignment of idle vehicles to still-unmatched requests."""

    def __init__(self, context):
        super().__init__(context)
        self.targeted: set[int] = set()

    def on_lower(self, sim) -> None:
        period_ticks = max(1, int(round(self.context.lp_period / sim.scenario.T_l)))
        if int(round(sim.t / sim.scenario.T_l)) % period_ticks:
            return
        self.targeted = {rid for rid in self.targeted if sim.by_id[rid].status == RequestStatus.PENDING}
        requests = [sim.by_id[rid] for rid in sim.pending if rid not in self.targeted]
        idle = [v for v in sim.vehicles if v.status == VehicleStatus.IDLE]
        if not requests or not idle:
            return
        points = [sim.routing_point(v) for v in idle]
        heads = np.array([p[0] for p in points], dtype=int)
        leads = np.array([p[1] for p in points])
        origins = np.array([r.origin for r in requests], dtype=int)
        cost = (leads[:, None] + sim.world.dist.dist[np.ix_(heads, origins)]) / sim.speed
        assignment = solve_assignment(cost)
        for row, col in assignment.pairs():
            request = requests[col]
            sim.dispatch(idle[row], request.origin, int(sim.world.partition.assignment[request.origin]))
            self.targeted.add(request.id)
        logger.debug(f"LP dispatched {len(assignment.rows)} vehicles, total {assignment.total_cost:.0f}s")


@register_policy(PolicyKind.RANDOM_COLLECT)
class RandomCollect(Policy):
    """Excitation policy: Dirichlet transfer ratios every window, coverage underneath."""

    def __init__(self, context, concentration: float = 1.0):
        super().__init__(context)
        self.concentration = concentration
        self.recorded_u: list[np.ndarray] = []
        self.recorded_e: list[np.ndarray] = []
        self.steps = 0

    def on_upper(self, sim, k: int, measurement) -> None:
        R = sim.world.R
        e = sim.empty_counts()
        theta = sim.rng_collection.dirichlet(np.full(R, self.concentration), size=R)
        u_float = theta * e[:, None]
        command = ControlCommand(u_float=u_float, u_int=integer_command(u_float, e), theta=theta)
        sim.apply_upper_command(command)
        self.recorded_u.append(command.u_int.ravel().astype(float))
        self.recorded_e.append(e.astype(float))

    def on_lower(self, sim) -> None:
        sim.apply_lower_targets(lower_layer_targets(sim, self.context.coverage, self.steps))
        self.steps += 1
