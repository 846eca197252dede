from src.simulator.views import MetricsReport, Request, RequestStatus, ScenarioConfig, Vehicle, VehicleStatus
