from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_PHI_O = [0.06, 0.35, 0.22, 0.29, 0.08]
DEFAULT_PHI_D = [0.16, 0.28, 0.17, 0.27, 0.12]


class VehicleStatus(str, Enum):
    IDLE = "idle"
    RELOCATING = "relocating"
    TO_PICKUP = "to_pickup"
    OCCUPIED = "occupied"


class RequestStatus(str, Enum):
    PENDING = "pending"
    MATCHED = "matched"
    CANCELLED = "cancelled"
    COMPLETED = "completed"


@dataclass
class Vehicle:
    """A fleet vehicle between ``node`` (last passed) and ``path[0]`` at ``offset`` km."""

    id: int
    node: int
    path: list[int] = field(default_factory=list)
    offset: float = 0.0
    status: VehicleStatus = VehicleStatus.IDLE
    assigned_request: Optional[int] = None
    target_region: Optional[int] = None
    odometer_rebalance: float = 0.0
    odometer_service: float = 0.0
    busy_time: float = 0.0
    distance_travelled: float = 0.0

    @property
    def is_empty(self) -> bool:
        return self.status in (VehicleStatus.IDLE, VehicleStatus.RELOCATING)

    @property
    def is_moving(self) -> bool:
        return bool(self.path)

    @property
    def odometer_total(self) -> float:
        return self.odometer_rebalance + self.odometer_service


@dataclass
class Request:
    id: int
    t_issue: float
    origin: int
    destination: int
    status: RequestStatus = RequestStatus.PENDING
    vehicle_id: Optional[int] = None
    t_matched: Optional[float] = None
    t_pickup: Optional[float] = None
    t_dropoff: Optional[float] = None

    @property
    def answered(self) -> bool:
        return self.status in (RequestStatus.MATCHED, RequestStatus.COMPLETED)


class ScenarioConfig(BaseModel):
    """Demand and fleet scenario. Times in seconds, speed in km/h."""

    model_config = ConfigDict(extra="forbid")

    fleet_size: int = Field(60, ge=1)
    sim_duration: float = Field(10800.0, gt=0)
    request_rate: float = Field(0.12, ge=0, description="Poisson arrivals per second")
    phi_o: list[float] = Field(default_factory=lambda: list(DEFAULT_PHI_O))
    phi_d: list[float] = Field(default_factory=lambda: list(DEFAULT_PHI_D))
    speed_kmh: float = Field(30.0, gt=0)
    T_l: float = Field(30.0, gt=0)
    T_u: float = Field(600.0, gt=0)
    T_m: float = Field(60.0, gt=0)
    T_w: float = Field(240.0, gt=0)
    hotspot_bandwidth_km: float = Field(0.6, gt=0)
    hotspots: Optional[list[int]] = None
    seed: int = 0

    @field_validator("phi_o", "phi_d")
    @classmethod
    def _is_distribution(cls, value: list[float]) -> list[float]:
        if any(v < 0 for v in value):
            raise ValueError("regional demand probabilities must be nonnegative")
        if abs(sum(value) - 1.0) > 1e-6:
            raise ValueError(f"regional demand probabilities must sum to 1, got {sum(value)}")
        return value

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.phi_o) != len(self.phi_d):
            raise ValueError("phi_o and phi_d must have the same number of regions")
        ratio = self.T_u / self.T_l
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"T_u ({self.T_u}) must be a multiple of T_l ({self.T_l})")
        return self

    @property
    def speed_kms(self) -> float:
        return self.speed_kmh / 3600.0

    @property
    def ticks_per_window(self) -> int:
        return int(round(self.T_u / self.T_l))

    @property
    def num_windows(self) -> int:
        return int(np.ceil(self.sim_duration / self.T_u - 1e-9))


@dataclass
class MetricsReport:
    policy: str
    seed: int
    fleet_size: int
    issued: int
    answered: int
    cancelled: int
    pending: int
    answer_rate: float
    avg_wait: float
    rebalance_km: float
    vur: float
    command_cost: float = 0.0
    label: str = ""
    region_issued: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    region_answered: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    region_cancelled: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    empty_series: list[tuple[float, int, int]] = field(default_factory=list)
    command_totals: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=int))

    @property
    def region_answer_rate(self) -> np.ndarray:
        issued = self.region_issued.astype(float)
        return np.divide(self.region_answered, issued, out=np.zeros_like(issued), where=issued > 0)

    def as_row(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "answer_rate": self.answer_rate,
            "avg_wait_s": self.avg_wait,
            "rebalance_km": self.rebalance_km,
            "vur": self.vur,
            "command_cost": self.command_cost,
            "fleet_size": self.fleet_size,
            "label": self.label,
        }
