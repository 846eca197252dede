import logging
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from src.deepc.forecast import perturb_forecast
from src.deepc.views import ControlCommand
from src.network.paths import shortest_path
from src.simulator.requests import demand_matrices, generate_requests
from src.simulator.views import MetricsReport, Request, RequestStatus, ScenarioConfig, Vehicle, VehicleStatus
from src.simulator.world import World
from src.utils.errors import UndefinedMetricError

logger = logging.getLogger(__name__)

_EPS_KM = 1e-12


@dataclass(frozen=True)
class WindowMeasurement:
    """Regional counts closing upper window k; ``e`` is taken at the window boundary."""

    k: int
    e: np.ndarray
    w_o: np.ndarray
    w_d: np.ndarray
    y: np.ndarray

    @property
    def w(self) -> np.ndarray:
        return np.concatenate([self.w_o, self.w_d])


class SimPolicy(Protocol):
    name: str

    def on_upper(self, sim: "FleetSimulator", k: int, measurement: Optional[WindowMeasurement]) -> None: ...

    def on_lower(self, sim: "FleetSimulator") -> None: ...


class FleetSimulator:
    """Fixed-step fleet simulation at the lower-layer period.

    Per tick: upper-layer decision on window boundaries, request release and
    cancellation, greedy matching, lower-layer decision, then movement.
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        world: World,
        policy: Optional[SimPolicy] = None,
        requests: Optional[list[Request]] = None,
        lookahead_windows: int = 0,
        label: str = "",
    ):
        self.scenario = scenario
        self.world = world
        self.policy = policy
        self.label = label
        self.speed = scenario.speed_kms

        streams = np.random.SeedSequence(scenario.seed).spawn(5)
        self.rng_requests, self.rng_placement, self.rng_policy, self.rng_forecast, self.rng_collection = (
            np.random.default_rng(s) for s in streams
        )

        self.num_windows = scenario.num_windows
        self.lookahead_windows = lookahead_windows
        if requests is None:
            horizon = scenario.sim_duration + lookahead_windows * scenario.T_u
            requests = generate_requests(scenario, world, self.rng_requests, horizon=horizon)
        self.requests = sorted(requests, key=lambda r: (r.t_issue, r.id))
        self.by_id = {r.id: r for r in self.requests}
        self.active = [r for r in self.requests if r.t_issue < scenario.sim_duration]
        self.demand = demand_matrices(self.requests, world, scenario.T_u, self.num_windows + lookahead_windows)

        start_nodes = self.rng_placement.integers(0, world.num_nodes, size=scenario.fleet_size)
        self.vehicles = [Vehicle(id=i, node=int(n)) for i, n in enumerate(start_nodes)]

        self.t = 0.0
        self.pending: list[int] = []
        self._next_release = 0
        self.theta: Optional[np.ndarray] = None
        self.window_matches = np.zeros((self.num_windows, world.R), dtype=int)
        self.measurements: list[WindowMeasurement] = []
        self.command_totals = np.zeros((world.R, world.R), dtype=int)
        self.command_cost = 0.0
        self.shortfall = 0
        self.empty_series: list[tuple[float, int, int]] = []
        self.partition_rows: list[tuple] = []

    # ---- geometry -------------------------------------------------------

    def link_length(self, a: int, b: int) -> float:
        return float(self.world.link_lengths[a, b])

    def nearest_node(self, vehicle: Vehicle) -> int:
        if vehicle.path and vehicle.offset > 0:
            if vehicle.offset < 0.5 * self.link_length(vehicle.node, vehicle.path[0]):
                return vehicle.node
            return vehicle.path[0]
        return vehicle.node

    def vehicle_region(self, vehicle: Vehicle) -> int:
        return int(self.world.partition.assignment[self.nearest_node(vehicle)])

    def routing_point(self, vehicle: Vehicle) -> tuple[int, float]:
        """Node a vehicle can be rerouted from and the km left before reaching it."""
        if vehicle.path and vehicle.offset > 0:
            head = vehicle.path[0]
            return head, self.link_length(vehicle.node, head) - vehicle.offset
        return vehicle.node, 0.0

    def route_to(self, vehicle: Vehicle, target: int) -> None:
        """Install a shortest path to ``target``; a vehicle mid-link finishes its link first."""
        head, lead = self.routing_point(vehicle)
        if lead > 0:
            vehicle.path = [head] + shortest_path(self.world.dist, head, target)[1:]
        else:
            vehicle.offset = 0.0
            vehicle.path = shortest_path(self.world.dist, vehicle.node, target)[1:]

    def eta_seconds(self, vehicle: Vehicle, target: int) -> float:
        head, lead = self.routing_point(vehicle)
        return (lead + float(self.world.dist.dist[head, target])) / self.speed

    def empty_counts(self) -> np.ndarray:
        regions = [self.vehicle_region(v) for v in self.vehicles if v.is_empty]
        return np.bincount(np.array(regions, dtype=int), minlength=self.world.R)

    def window_index(self, t: Optional[float] = None) -> int:
        t = self.t if t is None else t
        return int(np.floor(t / self.scenario.T_u + 1e-9))

    # ---- dynamics -------------------------------------------------------

    def _accrue(self, vehicle: Vehicle, km: float) -> None:
        if vehicle.status in (VehicleStatus.TO_PICKUP, VehicleStatus.OCCUPIED):
            vehicle.odometer_service += km
            vehicle.busy_time += km / self.speed
        else:
            vehicle.odometer_rebalance += km

    def _on_arrival(self, vehicle: Vehicle, t_event: float) -> bool:
        """Handle reaching the end of the path; returns True if the vehicle keeps driving."""
        if vehicle.status == VehicleStatus.TO_PICKUP:
            request = self.by_id[vehicle.assigned_request]
            request.t_pickup = t_event
            vehicle.status = VehicleStatus.OCCUPIED
            vehicle.path = shortest_path(self.world.dist, vehicle.node, request.destination)[1:]
            if vehicle.path:
                return True
            # origin == destination: drop off on the spot
        if vehicle.status == VehicleStatus.OCCUPIED:
            request = self.by_id[vehicle.assigned_request]
            request.t_dropoff = t_event
            request.status = RequestStatus.COMPLETED
            vehicle.status = VehicleStatus.IDLE
            vehicle.assigned_request = None
            self._on_vehicle_emptied(vehicle)
            return False
        if vehicle.status == VehicleStatus.RELOCATING:
            vehicle.status = VehicleStatus.IDLE
            vehicle.target_region = None
        return False

    def _on_vehicle_emptied(self, vehicle: Vehicle) -> None:
        if self.theta is None:
            return
        region = self.vehicle_region(vehicle)
        destination = int(self.rng_policy.choice(self.world.R, p=self.theta[region]))
        if destination != region:
            self.relocate(vehicle, destination)

    def advance(self, dt: float) -> None:
        """Move every vehicle speed*dt km along its path, firing arrivals in order."""
        for vehicle in self.vehicles:
            budget = self.speed * dt
            travelled = 0.0
            if vehicle.status == VehicleStatus.TO_PICKUP and not vehicle.path:
                self._on_arrival(vehicle, self.t)
            while budget > _EPS_KM and vehicle.path:
                to_go = self.link_length(vehicle.node, vehicle.path[0]) - vehicle.offset
                step = min(budget, to_go)
                self._accrue(vehicle, step)
                vehicle.distance_travelled += step
                budget -= step
                travelled += step
                if step >= to_go - _EPS_KM:
                    vehicle.node = vehicle.path.pop(0)
                    vehicle.offset = 0.0
                    if not vehicle.path and not self._on_arrival(vehicle, self.t + travelled / self.speed):
                        break
                else:
                    vehicle.offset += step
        self.t += dt

    def release_requests(self, t: float) -> None:
        while self._next_release < len(self.active) and self.active[self._next_release].t_issue <= t:
            self.pending.append(self.active[self._next_release].id)
            self._next_release += 1

    def cancel_expired(self, t: float) -> None:
        keep = []
        for rid in self.pending:
            request = self.by_id[rid]
            if t - request.t_issue > self.scenario.T_m:
                request.status = RequestStatus.CANCELLED
            else:
                keep.append(rid)
        self.pending = keep

    def match_requests(self, t: float) -> list[tuple[int, int]]:
        """Greedy matching in issue order to the empty vehicle with the smallest ETA."""
        candidates = [v for v in self.vehicles if v.is_empty]
        if not self.pending or not candidates:
            return []
        points = np.array([self.routing_point(v) for v in candidates])
        heads = points[:, 0].astype(int)
        leads = points[:, 1]
        available = np.ones(len(candidates), dtype=bool)
        dist = self.world.dist.dist
        assignments = []
        still_pending = []
        for rid in self.pending:
            request = self.by_id[rid]
            if not available.any():
                still_pending.append(rid)
                continue
            eta_km = np.where(available, leads + dist[heads, request.origin], np.inf)
            j = int(np.argmin(eta_km))
            eta = eta_km[j] / self.speed
            if (t - request.t_issue) + eta <= self.scenario.T_w + 1e-9:
                vehicle = candidates[j]
                available[j] = False
                self._assign(vehicle, request, t)
                assignments.append((rid, vehicle.id))
            else:
                still_pending.append(rid)
        self.pending = still_pending
        return assignments

    def _assign(self, vehicle: Vehicle, request: Request, t: float) -> None:
        self.route_to(vehicle, request.origin)
        vehicle.status = VehicleStatus.TO_PICKUP
        vehicle.assigned_request = request.id
        vehicle.target_region = None
        request.status = RequestStatus.MATCHED
        request.t_matched = t
        request.vehicle_id = vehicle.id
        k = self.window_index(t)
        if k < self.num_windows:
            self.window_matches[k, self.world.partition.assignment[request.origin]] += 1

    # ---- control inputs -------------------------------------------------

    def relocate(self, vehicle: Vehicle, region: int) -> None:
        head, _ = self.routing_point(vehicle)
        self.dispatch(vehicle, int(self.world.nearest_in_region[head, region]), region)

    def dispatch(self, vehicle: Vehicle, target: int, region: Optional[int] = None) -> None:
        self.route_to(vehicle, target)
        vehicle.status = VehicleStatus.RELOCATING
        vehicle.target_region = region
        if not vehicle.path:
            vehicle.status = VehicleStatus.IDLE
            vehicle.target_region = None

    def apply_upper_command(self, command: ControlCommand) -> int:
        """Relocate u_int[I, J] randomly chosen empty vehicles of region I toward region J now,
        and keep theta for vehicles becoming empty later in the window."""
        R = self.world.R
        self.theta = np.array(command.theta, dtype=float)
        self.command_cost += float(self.world.rebalance_weights @ np.asarray(command.u_float, dtype=float).ravel())

        empty = [v for v in self.vehicles if v.is_empty]
        regions = np.array([self.vehicle_region(v) for v in empty], dtype=int)
        moved = 0
        for I in range(R):
            pool = [v for v, region in zip(empty, regions) if region == I]
            wanted = int(sum(command.u_int[I, J] for J in range(R) if J != I))
            if wanted == 0:
                continue
            if wanted > len(pool):
                self.shortfall += wanted - len(pool)
                logger.warning(f"⚠️ Region {I}: {wanted} relocations commanded, {len(pool)} empty vehicles available")
            order = self.rng_policy.permutation(len(pool))
            cursor = 0
            for J in range(R):
                if J == I:
                    continue
                take = min(int(command.u_int[I, J]), len(pool) - cursor)
                for index in order[cursor : cursor + take]:
                    self.relocate(pool[index], J)
                self.command_totals[I, J] += take
                cursor += take
                moved += take
        return moved

    def apply_lower_targets(self, targets: dict[int, int]) -> None:
        for vehicle_id, target in targets.items():
            vehicle = self.vehicles[vehicle_id]
            if vehicle.status != VehicleStatus.IDLE:
                continue
            head, lead = self.routing_point(vehicle)
            if lead == 0 and head == target:
                vehicle.path = []
                vehicle.offset = 0.0
            else:
                self.route_to(vehicle, target)

    # ---- measurement ----------------------------------------------------

    def measure_window(self, k: int) -> WindowMeasurement:
        counts = self.demand[k]
        measurement = WindowMeasurement(
            k=k,
            e=self.empty_counts(),
            w_o=counts.sum(axis=1),
            w_d=counts.sum(axis=0),
            y=self.window_matches[k].astype(float),
        )
        self.measurements.append(measurement)
        return measurement

    def forecast(self, k: int, horizon: int, sigma2: float) -> np.ndarray:
        """Noisy marginals of the true demand of windows k..k+horizon-1, flattened time-major."""
        return perturb_forecast(self.demand[k : k + horizon], sigma2, self.rng_forecast).ravel()

    def record_empty(self, t: float) -> None:
        for region, count in enumerate(self.empty_counts()):
            self.empty_series.append((t, region, int(count)))

    # ---- driver ---------------------------------------------------------

    def tick(self, tick: int) -> None:
        scenario = self.scenario
        t = tick * scenario.T_l
        self.t = t
        if tick % scenario.ticks_per_window == 0:
            k = tick // scenario.ticks_per_window
            previous = self.measure_window(k - 1) if k > 0 else None
            if self.policy is not None:
                self.policy.on_upper(self, k, previous)
        self.release_requests(t)
        self.cancel_expired(t)
        self.match_requests(t)
        if self.policy is not None:
            self.policy.on_lower(self)
        self.record_empty(t)
        self.advance(scenario.T_l)

    def run(self) -> MetricsReport:
        scenario = self.scenario
        total_ticks = int(np.ceil(scenario.sim_duration / scenario.T_l - 1e-9))
        name = getattr(self.policy, "name", "none")
        logger.info(f"📍 Simulating {name}: {scenario.fleet_size} vehicles, {len(self.active)} requests, {total_ticks} ticks")
        for tick in range(total_ticks):
            self.tick(tick)
        self.t = total_ticks * scenario.T_l
        self.measure_window(self.num_windows - 1)
        report = self.compute_metrics()
        logger.info(
            f"✅ {name} seed {scenario.seed}: answer rate {report.answer_rate:.3f}, "
            f"wait {report.avg_wait:.1f}s, rebalance {report.rebalance_km:.1f} km, VUR {report.vur:.3f}"
        )
        return report

    def compute_metrics(self) -> MetricsReport:
        scenario = self.scenario
        issued = len(self.active)
        if issued == 0:
            raise UndefinedMetricError("No requests were issued; answer rate is undefined")
        R = self.world.R
        answered = sum(1 for r in self.active if r.answered)
        cancelled = sum(1 for r in self.active if r.status == RequestStatus.CANCELLED)
        waits = [r.t_pickup - r.t_issue for r in self.active if r.answered and r.t_pickup is not None]

        regions = self.world.partition.assignment
        origin_regions = np.array([regions[r.origin] for r in self.active], dtype=int)
        answered_mask = np.array([r.answered for r in self.active])
        cancelled_mask = np.array([r.status == RequestStatus.CANCELLED for r in self.active])

        return MetricsReport(
            policy=getattr(self.policy, "name", "none"),
            seed=scenario.seed,
            fleet_size=scenario.fleet_size,
            issued=issued,
            answered=answered,
            cancelled=cancelled,
            pending=issued - answered - cancelled,
            answer_rate=answered / issued,
            avg_wait=float(np.mean(waits)) if waits else 0.0,
            rebalance_km=float(sum(v.odometer_rebalance for v in self.vehicles)),
            vur=float(sum(v.busy_time for v in self.vehicles) / (scenario.fleet_size * scenario.sim_duration)),
            command_cost=self.command_cost,
            label=self.label,
            region_issued=np.bincount(origin_regions, minlength=R),
            region_answered=np.bincount(origin_regions[answered_mask], minlength=R),
            region_cancelled=np.bincount(origin_regions[cancelled_mask], minlength=R),
            empty_series=list(self.empty_series),
            command_totals=self.command_totals.copy(),
        )
