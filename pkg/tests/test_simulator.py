import sys

sys.path.append(".")

import numpy as np
import pytest

from src.deepc.views import ControlCommand
from src.network.graph import generate_grid_network
from src.network.paths import shortest_path
from src.policies.policy import PolicyContext, PolicyKind, build_policy
from src.simulator.fleet_sim import FleetSimulator
from src.simulator.requests import generate_requests, load_trace, save_trace
from src.simulator.views import Request, RequestStatus, ScenarioConfig, Vehicle, VehicleStatus
from src.simulator.world import build_world
from src.utils.errors import ConfigurationError, DataError, UndefinedMetricError


def _scenario(**overrides) -> ScenarioConfig:
    values = dict(
        fleet_size=1,
        sim_duration=1800.0,
        request_rate=0.02,
        phi_o=[0.5, 0.5],
        phi_d=[0.5, 0.5],
    )
    values.update(overrides)
    return ScenarioConfig(**values)


@pytest.fixture(scope="module")
def world():
    return build_world(generate_grid_network(4, 6, 0.5), _scenario())


def _sim(world, requests=None, vehicles=None, **overrides) -> FleetSimulator:
    sim = FleetSimulator(_scenario(**overrides), world, requests=[] if requests is None else requests)
    if vehicles is not None:
        sim.vehicles = [Vehicle(id=i, node=node) for i, node in enumerate(vehicles)]
    return sim


def test_zero_rate_gives_no_requests(world):
    assert generate_requests(_scenario(request_rate=0.0), world, np.random.default_rng(0)) == []


def test_one_hot_origin_marginal(world):
    requests = generate_requests(_scenario(phi_o=[1.0, 0.0]), world, np.random.default_rng(1))
    assert requests
    regions = world.partition.assignment
    assert all(regions[r.origin] == 0 for r in requests)
    assert all(r.origin != r.destination for r in requests)


def test_poisson_request_count(world):
    requests = generate_requests(_scenario(request_rate=0.5, sim_duration=11000.0), world, np.random.default_rng(2))
    assert 5200 <= len(requests) <= 5800
    times = [r.t_issue for r in requests]
    assert times == sorted(times)
    assert times[-1] < 11000.0


def test_advance_moves_along_links(world):
    sim = _sim(world, vehicles=[0])
    vehicle = sim.vehicles[0]
    sim.dispatch(vehicle, 2)
    assert vehicle.path == [1, 2]

    # 30 km/h over 0.5 km links
    sim.advance(90.0)
    assert vehicle.node == 1
    assert vehicle.offset == pytest.approx(0.25)
    assert vehicle.odometer_rebalance == pytest.approx(0.75)
    assert vehicle.odometer_service == 0.0

    sim.advance(30.0)
    assert vehicle.node == 2
    assert vehicle.status == VehicleStatus.IDLE
    assert vehicle.odometer_rebalance == pytest.approx(1.0)


def test_match_within_waiting_limit(world):
    request = Request(id=0, t_issue=120.0, origin=2, destination=8)
    sim = _sim(world, requests=[request], vehicles=[0])
    sim.release_requests(240.0)
    # waited 120 s, ETA 120 s, limit 240 s
    assert sim.match_requests(240.0) == [(0, 0)]
    assert request.status == RequestStatus.MATCHED
    assert sim.vehicles[0].status == VehicleStatus.TO_PICKUP


def test_no_match_beyond_waiting_limit(world):
    request = Request(id=0, t_issue=0.0, origin=5, destination=0)
    sim = _sim(world, requests=[request], vehicles=[0])
    sim.release_requests(0.0)
    # ETA 300 s
    assert sim.match_requests(0.0) == []
    assert sim.pending == [0]

    sim.cancel_expired(60.0)
    assert request.status == RequestStatus.PENDING
    sim.cancel_expired(61.0)
    assert request.status == RequestStatus.CANCELLED
    assert sim.pending == []


def test_pickup_and_dropoff(world):
    request = Request(id=0, t_issue=0.0, origin=1, destination=2)
    sim = _sim(world, requests=[request], vehicles=[0])
    sim.release_requests(0.0)
    sim.match_requests(0.0)
    sim.advance(60.0)
    assert request.t_pickup == pytest.approx(60.0)
    assert sim.vehicles[0].status == VehicleStatus.OCCUPIED
    sim.advance(60.0)
    assert request.status == RequestStatus.COMPLETED
    assert request.t_dropoff == pytest.approx(120.0)
    assert sim.vehicles[0].status == VehicleStatus.IDLE
    assert sim.vehicles[0].odometer_service == pytest.approx(1.0)


def test_same_node_trip_frees_vehicle(world):
    requests = [
        Request(id=0, t_issue=0.0, origin=1, destination=1),
        Request(id=1, t_issue=30.0, origin=2, destination=3),
    ]
    sim = _sim(world, requests=requests, vehicles=[0])
    for tick in range(10):
        sim.tick(tick)

    vehicle = sim.vehicles[0]
    assert requests[0].status == RequestStatus.COMPLETED
    assert requests[0].t_pickup == pytest.approx(60.0)
    assert requests[0].t_dropoff == pytest.approx(60.0)
    # freed at node 1 in time to serve the next request
    assert requests[1].status == RequestStatus.COMPLETED
    assert requests[1].t_matched == pytest.approx(60.0)
    assert vehicle.status == VehicleStatus.IDLE
    assert vehicle.assigned_request is None
    assert vehicle.path == []


def test_apply_upper_command_relocates_empty_vehicles(world):
    home = int(world.region_nodes(0)[0])
    sim = _sim(world, vehicles=[home] * 4, fleet_size=4)
    command = ControlCommand(
        u_float=np.array([[1.0, 3.0], [0.0, 0.0]]),
        u_int=np.array([[1, 3], [0, 0]]),
        theta=np.array([[0.25, 0.75], [0.0, 1.0]]),
    )
    assert sim.apply_upper_command(command) == 3
    relocating = [v for v in sim.vehicles if v.status == VehicleStatus.RELOCATING]
    assert len(relocating) == 3
    assert all(v.target_region == 1 for v in relocating)
    assert sim.command_totals[0, 1] == 3
    assert sim.shortfall == 0


def test_upper_command_shortfall(world):
    home = int(world.region_nodes(0)[0])
    sim = _sim(world, vehicles=[home] * 4, fleet_size=4)
    command = ControlCommand(u_float=np.array([[0.0, 6.0], [0.0, 0.0]]), u_int=np.array([[0, 6], [0, 0]]), theta=np.array([[0.0, 1.0], [0.0, 1.0]]))
    assert sim.apply_upper_command(command) == 4
    assert sim.shortfall == 2


def test_vehicle_emptied_follows_transfer_ratios(world):
    members = world.region_nodes(0)
    route = shortest_path(world.dist, int(members[0]), int(members[-1]))
    last, before = route[-1], route[-2]
    request = Request(id=0, t_issue=0.0, origin=before, destination=last, status=RequestStatus.MATCHED)
    sim = _sim(world, requests=[request], vehicles=[before])
    vehicle = sim.vehicles[0]
    vehicle.status = VehicleStatus.OCCUPIED
    vehicle.assigned_request = 0
    vehicle.path = [last]
    sim.theta = np.array([[0.0, 1.0], [0.0, 1.0]])

    sim.advance(60.0)
    assert request.status == RequestStatus.COMPLETED
    assert vehicle.status == VehicleStatus.RELOCATING
    assert vehicle.target_region == 1


def test_apply_lower_targets(world):
    sim = _sim(world, vehicles=[0, 7, 9], fleet_size=3)
    sim.vehicles[1].status = VehicleStatus.OCCUPIED
    sim.apply_lower_targets({0: 2, 1: 0, 2: 9})
    assert sim.vehicles[0].path == [1, 2]
    assert sim.vehicles[0].status == VehicleStatus.IDLE
    assert sim.vehicles[1].path == []
    assert sim.vehicles[2].path == []


def test_measure_window_counts(world):
    a, b = int(world.region_nodes(0)[0]), int(world.region_nodes(1)[0])
    requests = [
        Request(id=0, t_issue=10.0, origin=a, destination=b),
        Request(id=1, t_issue=20.0, origin=a, destination=b),
        Request(id=2, t_issue=30.0, origin=b, destination=a),
        Request(id=3, t_issue=700.0, origin=a, destination=b),
    ]
    sim = _sim(world, requests=requests, vehicles=[a, a, b], fleet_size=3)
    measurement = sim.measure_window(0)
    np.testing.assert_array_equal(measurement.w_o, [2, 1])
    np.testing.assert_array_equal(measurement.w_d, [1, 2])
    np.testing.assert_array_equal(measurement.e, [2, 1])
    np.testing.assert_array_equal(measurement.y, [0, 0])
    np.testing.assert_array_equal(measurement.w, [2, 1, 1, 2])


def test_metrics_undefined_without_requests(world):
    sim = _sim(world)
    with pytest.raises(UndefinedMetricError):
        sim.run()


def _no_control_run(world, seed: int):
    scenario = _scenario(fleet_size=4, request_rate=0.02, seed=seed)
    sim = FleetSimulator(scenario, world, policy=build_policy(PolicyContext(kind=PolicyKind.NO_CONTROL)))
    return sim, sim.run()


def test_request_accounting(world):
    sim, report = _no_control_run(world, 4)
    assert report.issued == len(sim.active)
    assert report.issued == report.answered + report.cancelled + report.pending
    assert 0.0 <= report.answer_rate <= 1.0
    assert 0.0 <= report.vur <= 1.0
    assert report.region_issued.sum() == report.issued
    for r in sim.active:
        if r.t_pickup is not None:
            assert r.t_pickup - r.t_issue <= sim.scenario.T_w + 1e-6


def test_runs_are_deterministic(world):
    _, first = _no_control_run(world, 11)
    _, second = _no_control_run(world, 11)
    assert first.as_row() == second.as_row()
    assert first.empty_series == second.empty_series


def test_trace_round_trip(world, tmp_path):
    requests = generate_requests(_scenario(), world, np.random.default_rng(5))
    path = save_trace(requests, str(tmp_path / "trace.csv"))
    loaded = load_trace(path, world)
    assert [(r.id, r.origin, r.destination) for r in loaded] == [(r.id, r.origin, r.destination) for r in requests]
    np.testing.assert_allclose([r.t_issue for r in loaded], [r.t_issue for r in requests])


def test_trace_errors(world, tmp_path):
    with pytest.raises(ConfigurationError):
        load_trace(str(tmp_path / "missing.csv"), world)

    bad_header = tmp_path / "bad.csv"
    bad_header.write_text("id,t,o,d\n0,1.0,0,1\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_trace(str(bad_header), world)

    bad_node = tmp_path / "node.csv"
    bad_node.write_text("id,t_issue_s,origin_node,dest_node\n0,1.0,0,999\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_trace(str(bad_node), world)

    same_node = tmp_path / "same.csv"
    same_node.write_text("id,t_issue_s,origin_node,dest_node\n0,1.0,3,3\n", encoding="utf-8")
    with pytest.raises(DataError, match="starts and ends"):
        load_trace(str(same_node), world)
