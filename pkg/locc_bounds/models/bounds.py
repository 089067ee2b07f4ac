"""Bound models"""

import enum
from dataclasses import dataclass
from typing import Optional

from locc_bounds.models.program import SolveStatus


class Direction(str, enum.Enum):
    """Which party measures first and sends the message"""
    A_TO_B = "ab"
    B_TO_A = "ba"


class Method(str, enum.Enum):
    """How a bound was obtained"""
    GLOBAL = "global"
    PPT = "ppt"
    ONEROUND = "oneround"
    NONADAPTIVE = "nonadaptive"
    SEESAW_ONEROUND = "seesaw_oneround"
    SEESAW_NONADAPTIVE = "seesaw_nonadaptive"
    ANALYTIC = "analytic"


class BoundKind(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"
    ANALYTIC = "analytic"


@dataclass(frozen=True)
class HierarchyParams:
    """Message alphabet size m, hierarchy level k and direction"""

    m: int = 1
    k: int = 1
    direction: Direction = Direction.A_TO_B

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        object.__setattr__(self, "direction", Direction(self.direction))


@dataclass(frozen=True)
class BoundResult:
    """A bound on the optimal success probability"""

    value: float
    kind: BoundKind
    method: Method
    params: Optional[HierarchyParams] = None
    gap: float = 0.0
    status: SolveStatus = SolveStatus.OPTIMAL
    wall_time_s: float = 0.0

    def __post_init__(self):
        slack = 10 * self.gap + 1e-6  # solver feasibility tolerance
        if self.status == SolveStatus.OPTIMAL and not (-slack <= self.value <= 1 + slack):
            raise ValueError(f"Bound value {self.value} outside [0, 1 + 10 gap]")
