"""State ensemble model"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from locc_bounds.models.operators import HermitianOp

PRIOR_TOL = 1e-12
STATE_TOL = 1e-10


class EnsembleValidationError(ValueError):
    """An ensemble violates one of its invariants"""


@dataclass(frozen=True, eq=False)
class StateEnsemble:
    """
    Priors p_λ and density matrices ρ_λ on C^d_A ⊗ C^d_B

    `name` and `params` record how the ensemble was built (e.g. the Bell-basis
    angles) so that callers can pick matching deterministic strategies.
    """

    d_A: int
    d_B: int
    items: Tuple[Tuple[float, HermitianOp], ...]
    name: str = "custom"
    params: Dict[str, Any] = field(default_factory=dict)
    swapped: bool = False

    def __post_init__(self):
        if self.d_A < 1 or self.d_B < 1:
            raise EnsembleValidationError(f"Local dimensions must be >= 1, got ({self.d_A}, {self.d_B})")
        if not self.items:
            raise EnsembleValidationError("Ensemble has no states")
        items = tuple((float(p), rho) for p, rho in self.items)
        object.__setattr__(self, "items", items)

        priors = np.array([p for p, _ in items])
        if np.any(priors < 0):
            bad = int(np.argmax(priors < 0)) + 1
            raise EnsembleValidationError(f"prior of state {bad} is negative")
        if abs(priors.sum() - 1.0) > PRIOR_TOL:
            raise EnsembleValidationError(f"priors do not sum to 1 (sum = {priors.sum():.15g})")

        for index, (_, rho) in enumerate(items, start=1):
            if rho.shape.dims != (self.d_A, self.d_B):
                raise EnsembleValidationError(
                    f"state {index} has shape {rho.shape.dims}, expected ({self.d_A}, {self.d_B})"
                )
            if abs(rho.trace() - 1.0) > STATE_TOL:
                raise EnsembleValidationError(f"state {index} does not have unit trace")
            if rho.eigvalsh()[0] < -STATE_TOL:
                raise EnsembleValidationError(f"state {index} is not positive semidefinite")

    @property
    def n(self) -> int:
        return len(self.items)

    @property
    def priors(self) -> np.ndarray:
        return np.array([p for p, _ in self.items])

    @property
    def states(self) -> List[HermitianOp]:
        return [rho for _, rho in self.items]

    @property
    def dim(self) -> int:
        return self.d_A * self.d_B

    def weighted_states(self) -> List[np.ndarray]:
        """p_λ ρ_λ as raw arrays"""
        return [p * rho.entries for p, rho in self.items]

    def allclose(self, other: "StateEnsemble", atol: float = 1e-12) -> bool:
        if (self.d_A, self.d_B, self.n) != (other.d_A, other.d_B, other.n):
            return False
        return bool(
            np.allclose(self.priors, other.priors, rtol=0, atol=atol)
            and all(a.allclose(b, atol) for a, b in zip(self.states, other.states))
        )
