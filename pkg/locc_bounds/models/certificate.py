"""Certificate arrays for the one-round and non-adaptive hierarchies"""

from dataclasses import dataclass
from typing import Dict, Tuple

from locc_bounds.models.operators import HermitianOp

Index = Tuple[int, ...]


class CertificateSchemaError(ValueError):
    """A certificate is malformed or its index set is incomplete"""


def _check_tuple(values: Index, length: int, upper: int, what: str) -> None:
    if len(values) != length or any(v < 1 or v > upper for v in values):
        raise CertificateSchemaError(f"{what} {values} is not in {{1..{upper}}}^{length}")


@dataclass(frozen=True, eq=False)
class CertificateArray1R:
    """
    Operators R^{a λ b} on A_1..A_k ⊗ B, keyed by (a, λ, b)

    Only orbit representatives (non-decreasing a) need to be present.
    """

    m: int
    k: int
    n: int
    d_A: int
    d_B: int
    entries: Dict[Tuple[Index, int, int], HermitianOp]

    def __post_init__(self):
        dims = self.dims
        for (a, lam, b), op in self.entries.items():
            _check_tuple(tuple(a), self.k, self.m, "a")
            _check_tuple((lam,), 1, self.n, "λ")
            _check_tuple((b,), 1, self.m, "b")
            if op.shape.dims != dims:
                raise CertificateSchemaError(f"Entry {(a, lam, b)} has dims {op.shape.dims}, expected {dims}")

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.d_A,) * self.k + (self.d_B,)


@dataclass(frozen=True, eq=False)
class CertificateArrayNA:
    """Operators R^{a b⃗} on A_1..A_k ⊗ B, keyed by (a, b⃗) with b⃗ in {1..n}^m"""

    m: int
    k: int
    n: int
    d_A: int
    d_B: int
    entries: Dict[Tuple[Index, Index], HermitianOp]

    def __post_init__(self):
        dims = self.dims
        for (a, bvec), op in self.entries.items():
            _check_tuple(tuple(a), self.k, self.m, "a")
            _check_tuple(tuple(bvec), self.m, self.n, "b")
            if op.shape.dims != dims:
                raise CertificateSchemaError(f"Entry {(a, bvec)} has dims {op.shape.dims}, expected {dims}")

    @property
    def dims(self) -> Tuple[int, ...]:
        return (self.d_A,) * self.k + (self.d_B,)
