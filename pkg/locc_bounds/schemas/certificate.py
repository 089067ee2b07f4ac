"""Certificate file and residual report schemas"""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from locc_bounds.schemas.ensemble import MatrixEncoding


class CertificateEntry(BaseModel):
    """One operator; `lam` is set for one-round entries, `b` is an int (1R) or a list (NA)"""

    a: List[int]
    lam: Optional[int] = Field(None, alias="lambda")
    b: int | List[int]
    op: MatrixEncoding

    model_config = {"populate_by_name": True}


class CertificateFile(BaseModel):
    """JSON certificate: index tuples as arrays, operators in the ensemble matrix encoding"""

    variant: Literal["1r", "na"]
    m: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    d_A: int = Field(..., ge=1)
    d_B: int = Field(..., ge=1)
    entries: List[CertificateEntry] = Field(..., min_length=1)
    claimed: Optional[List[MatrixEncoding]] = None

    @model_validator(mode="after")
    def check_entry_kinds(self) -> "CertificateFile":
        for index, entry in enumerate(self.entries):
            if self.variant == "1r" and (entry.lam is None or not isinstance(entry.b, int)):
                raise ValueError(f"entry {index} needs integer 'lambda' and 'b' for a 1r certificate")
            if self.variant == "na" and not isinstance(entry.b, list):
                raise ValueError(f"entry {index} needs a list 'b' for an na certificate")
        return self


class ResidualReport(BaseModel):
    """Per-family maximum residuals of a certificate check"""

    variant: Literal["1r", "na"]
    tol: float
    psd_min_eig: float
    ppt_min_eig: Dict[int, float]
    marginal_A: float
    marginal_B: float
    symmetry: float
    normalization: float
    reconstruction: Optional[float] = None
    value: Optional[float] = None
    failed: List[str] = []
    verdict: Literal["pass", "fail"]

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"
