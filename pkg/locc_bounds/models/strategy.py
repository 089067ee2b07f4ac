"""Explicit LOCC strategies"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from locc_bounds.models.bounds import Direction
from locc_bounds.models.operators import HermitianOp
from locc_bounds.services.linalg import is_povm

POVM_TOL = 1e-9
POST_TOL = 1e-12


def _check_povm(effects: Tuple[HermitianOp, ...], what: str) -> None:
    if not effects:
        raise ValueError(f"{what} has no effects")
    if not is_povm(list(effects), POVM_TOL):
        raise ValueError(f"{what} is not a POVM within {POVM_TOL:g}")


@dataclass(frozen=True, eq=False)
class OneRoundStrategy:
    """
    The first party measures {A^a} and sends a; the second party measures
    {B^{λ|a}} and guesses λ

    With direction BtoA the first party is Bob: `alice` acts on d_B and
    `bob` on d_A.
    """

    alice: Tuple[HermitianOp, ...]
    bob: Tuple[Tuple[HermitianOp, ...], ...]
    direction: Direction = Direction.A_TO_B

    def __post_init__(self):
        object.__setattr__(self, "alice", tuple(self.alice))
        object.__setattr__(self, "bob", tuple(tuple(b) for b in self.bob))
        object.__setattr__(self, "direction", Direction(self.direction))
        _check_povm(self.alice, "first-party POVM")
        if len(self.bob) != len(self.alice):
            raise ValueError(f"{len(self.alice)} messages but {len(self.bob)} second-party POVMs")
        outcomes = {len(b) for b in self.bob}
        if len(outcomes) != 1:
            raise ValueError("Second-party POVMs must share one outcome count")
        for a, povm in enumerate(self.bob, start=1):
            _check_povm(povm, f"second-party POVM for message {a}")

    @property
    def m(self) -> int:
        return len(self.alice)

    @property
    def n(self) -> int:
        return len(self.bob[0])


@dataclass(frozen=True, eq=False)
class NonAdaptiveStrategy:
    """
    Both parties measure independently; post[a, b] is the distribution of
    the guess λ
    """

    alice: Tuple[HermitianOp, ...]
    bob: Tuple[HermitianOp, ...]
    post: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alice", tuple(self.alice))
        object.__setattr__(self, "bob", tuple(self.bob))
        _check_povm(self.alice, "Alice's POVM")
        _check_povm(self.bob, "Bob's POVM")
        post = np.array(self.post, dtype=float)
        if post.ndim != 3 or post.shape[:2] != (len(self.alice), len(self.bob)):
            raise ValueError(f"post has shape {post.shape}, expected ({len(self.alice)}, {len(self.bob)}, n)")
        if np.any(post < -POST_TOL) or np.any(np.abs(post.sum(axis=2) - 1) > POST_TOL):
            raise ValueError("Every post[a, b] must be a probability vector")
        post.setflags(write=False)
        object.__setattr__(self, "post", post)

    @property
    def m(self) -> int:
        return len(self.alice)

    @property
    def m_B(self) -> int:
        return len(self.bob)

    @property
    def n(self) -> int:
        return self.post.shape[2]
