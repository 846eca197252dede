import os
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.coverage.voronoi import CoverageConfig
from src.deepc.views import DeepcParams
from src.network.graph import DEFAULT_MAX_NODES
from src.policies.policy import PolicyKind
from src.simulator.views import ScenarioConfig


class NetworkSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["grid", "files"] = "grid"
    rows: int = Field(15, ge=2)
    cols: int = Field(15, ge=2)
    spacing_km: float = Field(0.3, gt=0)
    nodes_path: Optional[str] = None
    links_path: Optional[str] = None
    max_nodes: int = Field(DEFAULT_MAX_NODES, ge=1)

    @model_validator(mode="after")
    def _files_exist(self):
        if self.kind == "files":
            for path in (self.nodes_path, self.links_path):
                if not path or not os.path.exists(path):
                    raise ValueError(f"network file '{path}' does not exist")
        return self


class RunConfig(BaseModel):
    """Everything one experiment needs; serialized as a single JSON document."""

    model_config = ConfigDict(extra="forbid")

    network: NetworkSource = Field(default_factory=NetworkSource)
    R: int = Field(5, ge=1)
    partition_seed: int = 0
    coverage: CoverageConfig = Field(default_factory=CoverageConfig)
    deepc: DeepcParams = Field(default_factory=DeepcParams)
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    policy: PolicyKind = PolicyKind.HIERARCHICAL
    lp_period: float = Field(30.0, gt=0)
    rebalance_lengths: Optional[list[list[float]]] = None
    trace_path: Optional[str] = None
    output_dir: str = Field(default_factory=lambda: os.getenv("AMOD_OUTPUT_DIR", "./tmp/runs"))
    seeds: list[int] = Field(default_factory=lambda: [0])

    @field_validator("seeds")
    @classmethod
    def _seeds_present(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("seed list must not be empty")
        return value

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.scenario.phi_o) != self.R:
            raise ValueError(f"scenario has {len(self.scenario.phi_o)} regional probabilities but R = {self.R}")
        m, p = self.R * self.R, self.R
        if self.deepc.Q is not None and len(self.deepc.Q) != p:
            raise ValueError(f"deepc.Q must have {p} entries")
        if self.deepc.Rw is not None and len(self.deepc.Rw) != m:
            raise ValueError(f"deepc.Rw must have {m} entries")
        if self.rebalance_lengths is not None:
            if len(self.rebalance_lengths) != self.R or any(len(row) != self.R for row in self.rebalance_lengths):
                raise ValueError(f"rebalance_lengths must be {self.R}x{self.R}")
            if any(v < 0 for row in self.rebalance_lengths for v in row):
                raise ValueError("rebalance_lengths must be nonnegative")
        if self.trace_path is not None and not os.path.exists(self.trace_path):
            raise ValueError(f"request trace '{self.trace_path}' does not exist")
        return self

    @property
    def collected_data_path(self) -> str:
        return self.deepc.data_file or os.path.join(self.output_dir, "collected.csv")


SweepParameter = Literal["alpha", "sigma2", "lambda_g", "lambda_y", "snr_db", "fleet_size"]


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    parameter: SweepParameter
    values: list[float]
    base: RunConfig = Field(default_factory=RunConfig)

    @field_validator("values")
    @classmethod
    def _values_valid(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("sweep value list must not be empty")
        if any(v < 0 for v in value):
            raise ValueError("sweep values must be nonnegative")
        return value

    @model_validator(mode="after")
    def _fleet_sizes_integral(self):
        if self.parameter == "fleet_size" and any(v < 1 or v != int(v) for v in self.values):
            raise ValueError("fleet_size sweep values must be positive integers")
        if self.parameter in ("lambda_g", "lambda_y") and any(v <= 0 for v in self.values):
            raise ValueError(f"{self.parameter} sweep values must be positive")
        return self
