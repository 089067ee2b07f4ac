"""Operator value types on multipartite tensor spaces"""

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence, Tuple

import numpy as np

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class SystemShape:
    """Local dimensions of the tensor factors, in order"""

    dims: Tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("SystemShape needs at least one factor")
        if any(d < 1 for d in dims):
            raise ValueError(f"Local dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return prod(self.dims)

    @property
    def factors(self) -> int:
        return len(self.dims)

    def concat(self, other: "SystemShape") -> "SystemShape":
        return SystemShape(self.dims + other.dims)

    def check_subsystems(self, subsystems: Iterable[int]) -> Tuple[int, ...]:
        """
        Validate 1-based subsystem indices

        Returns:
            Sorted, de-duplicated 0-based indices
        """
        picked = sorted(set(int(s) for s in subsystems))
        for s in picked:
            if s < 1 or s > self.factors:
                raise ValueError(f"Subsystem index {s} out of range for shape {self.dims}")
        return tuple(s - 1 for s in picked)

    def without(self, zero_based: Sequence[int]) -> "SystemShape":
        kept = tuple(d for i, d in enumerate(self.dims) if i not in set(zero_based))
        return SystemShape(kept or (1,))


@dataclass(frozen=True, eq=False)
class Operator:
    """A square complex matrix with an explicit tensor-factor shape"""

    shape: SystemShape
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        n = self.shape.total
        if arr.shape != (n, n):
            raise ValueError(f"Entries of shape {arr.shape} do not match dims {self.shape.dims}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def dim(self) -> int:
        return self.shape.total

    def allclose(self, other: "Operator", atol: float = 1e-12) -> bool:
        return self.shape == other.shape and np.allclose(self.entries, other.entries, rtol=0, atol=atol)


@dataclass(frozen=True, eq=False)
class HermitianOp(Operator):
    """Hermitian operator; entries equal their conjugate transpose"""

    def __post_init__(self):
        super().__post_init__()
        arr = self.entries
        scale = np.linalg.norm(arr)
        if np.linalg.norm(arr - arr.conj().T) > HERMITICITY_TOL * max(scale, 1e-300):
            raise ValueError("Entries are not Hermitian")

    @classmethod
    def from_array(cls, arr, dims: Sequence[int], hermitize: bool = False) -> "HermitianOp":
        arr = np.asarray(arr, dtype=complex)
        if hermitize:
            arr = (arr + arr.conj().T) / 2
        return cls(SystemShape(tuple(dims)), arr)

    @classmethod
    def identity(cls, dims: Sequence[int]) -> "HermitianOp":
        shape = SystemShape(tuple(dims))
        return cls(shape, np.eye(shape.total, dtype=complex))

    @classmethod
    def projector(cls, vector, dims: Sequence[int]) -> "HermitianOp":
        """Rank-1 projector onto a (normalised) state vector"""
        v = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("Cannot build a projector from the zero vector")
        v = v / norm
        return cls.from_array(np.outer(v, v.conj()), dims, hermitize=True)

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def __neg__(self) -> "HermitianOp":
        return HermitianOp(self.shape, -self.entries)


@dataclass(frozen=True)
class Permutation:
    """A bijection on {1..k}, stored as its 1-based images"""

    images: Tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(i) for i in self.images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise ValueError(f"{images} is not a permutation of 1..{len(images)}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, k: int) -> "Permutation":
        return cls(tuple(range(1, k + 1)))

    @classmethod
    def from_zero_based(cls, images: Sequence[int]) -> "Permutation":
        return cls(tuple(int(i) + 1 for i in images))

    @property
    def k(self) -> int:
        return len(self.images)

    @property
    def zero_based(self) -> Tuple[int, ...]:
        return tuple(i - 1 for i in self.images)

    def inverse(self) -> "Permutation":
        inv = [0] * self.k
        for j, i in enumerate(self.images):
            inv[i - 1] = j + 1
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """(self ∘ other)(j) = self(other(j))"""
        if other.k != self.k:
            raise ValueError("Cannot compose permutations of different size")
        return Permutation(tuple(self.images[i - 1] for i in other.images))

    def apply(self, items: Sequence) -> tuple:
        """Place items[j] at position σ(j)"""
        out = [None] * self.k
        for j, i in enumerate(self.images):
            out[i - 1] = items[j]
        return tuple(out)
