"""Run record schema shared by the CSV and JSON outputs"""

import math
from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, Field, field_validator

from locc_bounds.models.bounds import BoundKind, BoundResult, Direction

SWEEP_HEADER = ["tau", "method", "m", "k", "direction", "kind", "value", "gap"]
RECORD_HEADER = ["ensemble", "method", "m", "k", "direction", "kind", "value", "gap", "wall_time_s", "seed"]


class RunRecord(BaseModel):
    """One bound, as printed by `bound`, `seesaw` and `sweep`"""

    ensemble: str
    method: str
    m: int = Field(1, ge=1)
    k: int = Field(1, ge=0)
    direction: Direction = Direction.A_TO_B
    kind: BoundKind
    value: float
    gap: float = 0.0
    wall_time_s: float = 0.0
    seed: Optional[int] = None
    tau: Optional[float] = None
    tangle: Optional[float] = None

    @field_validator("value", "gap")
    @classmethod
    def check_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"must be finite, got {value}")
        return value

    @classmethod
    def from_result(cls, ensemble: str, method: str, result: BoundResult, seed: Optional[int] = None, **extra) -> "RunRecord":
        params = result.params
        return cls(
            ensemble=ensemble,
            method=method,
            m=params.m if params else 1,
            k=params.k if params else 1,
            direction=params.direction if params else Direction.A_TO_B,
            kind=result.kind,
            value=result.value,
            gap=result.gap,
            wall_time_s=result.wall_time_s,
            seed=seed,
            **extra,
        )

    def csv_row(self, header: Sequence[str]) -> List[str]:
        data = self.model_dump(mode="json")
        return ["" if data[name] is None else str(data[name]) for name in header]

    @classmethod
    def from_csv_row(cls, header: Sequence[str], row: Sequence[str], ensemble: str = "bell") -> "RunRecord":
        data: Dict[str, object] = {"ensemble": ensemble}
        data.update({name: cell for name, cell in zip(header, row) if cell != ""})
        return cls.model_validate(data)
