"""Reference table schemas"""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

TABLE_HEADER = ["which", "m", "column", "kind", "value", "expected", "tol", "verdict"]


class ReferenceColumn(BaseModel):
    name: Literal["1r_seesaw", "1r_sdp", "na_seesaw", "na_sdp"]
    kind: Literal["upper", "lower"]
    tol: float = Field(..., gt=0)
    expected: List[float]


class ReferenceTable(BaseModel):
    """One `[which]` section of the reference file"""

    ensemble: str
    k: int = Field(..., ge=1)
    m: List[int] = Field(..., min_length=1)
    columns: List[ReferenceColumn] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_lengths(self) -> "ReferenceTable":
        for column in self.columns:
            if len(column.expected) != len(self.m):
                raise ValueError(f"column {column.name} has {len(column.expected)} values for {len(self.m)} rows")
        return self


class TableCell(BaseModel):
    """One computed cell with its verdict against the expected constant"""

    which: str
    m: int
    column: str
    kind: Literal["upper", "lower"]
    value: Optional[float] = None
    expected: float
    tol: float
    verdict: Literal["ok", "mismatch", "below", "refused", "failed"]
    gap: float = 0.0

    @property
    def passed(self) -> bool:
        return self.verdict == "ok"

    def csv_row(self) -> List[str]:
        value = "" if self.value is None else f"{self.value:.6f}"
        return [self.which, str(self.m), self.column, self.kind, value, f"{self.expected:g}", f"{self.tol:g}", self.verdict]
