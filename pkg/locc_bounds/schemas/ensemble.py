"""Ensemble file schemas"""

from typing import Dict, List

import numpy as np
from pydantic import BaseModel, Field, field_validator

# A matrix is encoded row-major as rows of [re, im] pairs
MatrixEncoding = List[List[List[float]]]


def encode_matrix(arr: np.ndarray) -> MatrixEncoding:
    arr = np.asarray(arr, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in arr]


def decode_matrix(rows: MatrixEncoding) -> np.ndarray:
    data = np.asarray(rows, dtype=float)
    if data.ndim != 3 or data.shape[2] != 2 or data.shape[0] != data.shape[1]:
        raise ValueError(f"Matrix encoding must be n x n x 2, got shape {data.shape}")
    return data[..., 0] + 1j * data[..., 1]


class EnsembleItemFile(BaseModel):
    """One (prior, state) entry"""

    prior: float = Field(..., gt=0, description="Prior probability; zero priors are rejected")
    state: MatrixEncoding

    @field_validator("state")
    @classmethod
    def check_square(cls, value: MatrixEncoding) -> MatrixEncoding:
        decode_matrix(value)
        return value


class EnsembleFile(BaseModel):
    """JSON ensemble file: {"d_A", "d_B", "items": [{"prior", "state"}], "params"}"""

    d_A: int = Field(..., ge=1)
    d_B: int = Field(..., ge=1)
    items: List[EnsembleItemFile] = Field(..., min_length=1)
    params: Dict[str, float] = Field(default_factory=dict, description="Construction parameters, e.g. the Bell-family angles")
