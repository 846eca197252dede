import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Type

from src.coverage.voronoi import CoverageConfig
from src.deepc.controller import DeepcController
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


class PolicyKind(str, Enum):
    NO_CONTROL = "no_control"
    LOWER_ONLY = "lower_only"
    UPPER_ONLY = "upper_only"
    HIERARCHICAL = "hierarchical"
    LP_REBALANCE = "lp_rebalance"
    RANDOM_COLLECT = "random_collect"

    @property
    def uses_upper(self) -> bool:
        return self in (PolicyKind.UPPER_ONLY, PolicyKind.HIERARCHICAL)

    @property
    def uses_lower(self) -> bool:
        return self in (PolicyKind.LOWER_ONLY, PolicyKind.HIERARCHICAL, PolicyKind.RANDOM_COLLECT)

    @property
    def display_name(self) -> str:
        return {
            PolicyKind.NO_CONTROL: "No Control",
            PolicyKind.LOWER_ONLY: "Lower Only",
            PolicyKind.UPPER_ONLY: "Upper Only",
            PolicyKind.HIERARCHICAL: "Upper + Lower",
            PolicyKind.LP_REBALANCE: "LP",
            PolicyKind.RANDOM_COLLECT: "Random (collection)",
        }[self]


@dataclass
class PolicyContext:
    kind: PolicyKind
    controller: Optional[DeepcController] = None
    coverage: Optional[CoverageConfig] = None
    lp_period: float = 30.0
    forecast_sigma2: float = 0.0
    lower_enabled: bool = True

    def __post_init__(self):
        if self.kind.uses_upper != (self.controller is not None):
            raise ConfigurationError(f"Policy {self.kind.value} {'needs' if self.kind.uses_upper else 'takes no'} DeePC controller")
        if self.kind.uses_lower and self.coverage is None:
            raise ConfigurationError(f"Policy {self.kind.value} needs a coverage configuration")
        if not self.kind.uses_lower:
            self.coverage = None
        if self.lp_period <= 0:
            raise ConfigurationError(f"LP period must be positive, got {self.lp_period}")


class Policy:
    """Per-tick decision maker; consumes simulator snapshots and emits commands or targets."""

    kind: PolicyKind

    def __init__(self, context: PolicyContext):
        self.context = context

    @property
    def name(self) -> str:
        return self.kind.value

    def on_upper(self, sim, k: int, measurement) -> None:
        pass

    def on_lower(self, sim) -> None:
        pass


POLICY_REGISTRY: dict[PolicyKind, Type[Policy]] = {}


def register_policy(kind: PolicyKind) -> Callable[[Type[Policy]], Type[Policy]]:
    def decorator(cls: Type[Policy]) -> Type[Policy]:
        cls.kind = kind
        POLICY_REGISTRY[kind] = cls
        return cls

    return decorator


def build_policy(context: PolicyContext) -> Policy:
    # strategies register themselves on import
    from src.policies import strategies  # noqa: F401

    try:
        cls = POLICY_REGISTRY[context.kind]
    except KeyError:
        raise ConfigurationError(f"Unknown policy: {context.kind}")
    return cls(context)
