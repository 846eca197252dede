from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


@dataclass(frozen=True)
class SignalSeries:
    """Time-ordered samples, one row per step."""

    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError("A signal series needs at least one sample of a fixed dimension")
        object.__setattr__(self, "samples", samples)

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def length(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class HankelSet:
    U_p: np.ndarray
    U_f: np.ndarray
    W_p: np.ndarray
    W_f: np.ndarray
    Y_p: np.ndarray
    Y_f: np.ndarray
    m: int
    q: int
    p: int
    T_ini: int
    N: int
    T_d: int

    @property
    def columns(self) -> int:
        return self.U_p.shape[1]


@dataclass(frozen=True)
class QProblem:
    """min 1/2 x'Px + c'x + constant  s.t.  A_eq x = b_eq,  G x <= h."""

    P: np.ndarray
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    G: np.ndarray
    h: np.ndarray
    constant: float = 0.0

    @property
    def dim(self) -> int:
        return self.c.shape[0]


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


@dataclass(frozen=True)
class QSolution:
    x: np.ndarray
    status: SolveStatus
    objective: float
    iterations: int
    equality_residual: float
    inequality_residual: float
    stationarity_residual: float
    complementarity_residual: float

    @property
    def primal_residual(self) -> float:
        return max(self.equality_residual, self.inequality_residual)

    @property
    def dual_residual(self) -> float:
        return max(self.stationarity_residual, self.complementarity_residual)

    @property
    def max_residual(self) -> float:
        return max(self.primal_residual, self.dual_residual)


@dataclass(frozen=True)
class ControlCommand:
    u_float: np.ndarray
    u_int: np.ndarray
    theta: np.ndarray

    @classmethod
    def stay(cls, e: np.ndarray) -> "ControlCommand":
        e = np.asarray(e)
        R = e.shape[0]
        return cls(u_float=np.diag(e.astype(float)), u_int=np.diag(e.astype(int)), theta=np.eye(R))

    @property
    def relocations(self) -> int:
        off_diagonal = self.u_int - np.diag(np.diag(self.u_int))
        return int(off_diagonal.sum())


class DeepcParams(BaseModel):
    """Upper-layer controller hyperparameters."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    T_ini: int = Field(35, ge=1)
    N: int = Field(10, ge=1)
    T_d: int = Field(3000, ge=2)
    lambda_g: float = Field(1000.0, gt=0)
    lambda_y: float = Field(0.01, gt=0)
    alpha: float = Field(150.0, ge=0)
    Q: Optional[list[float]] = None
    Rw: Optional[list[float]] = None
    n_assumed: Optional[int] = Field(None, ge=0)
    tol: float = Field(1e-6, gt=0)
    max_iter: int = Field(20000, ge=1)
    relaxed_tol: float = Field(1e-3, gt=0)
    sigma2: float = Field(0.0, ge=0)
    integer_commands: bool = True
    data_file: Optional[str] = None
    collection_seed: int = 1000

    @field_validator("Q", "Rw")
    @classmethod
    def _nonnegative_weights(cls, value):
        if value is not None and any(v < 0 for v in value):
            raise ValueError("weights must be elementwise nonnegative")
        return value

    @model_validator(mode="after")
    def _data_long_enough(self):
        if self.T_d < self.T_ini + self.N:
            raise ValueError(f"T_d ({self.T_d}) must be at least T_ini + N ({self.T_ini + self.N})")
        return self
