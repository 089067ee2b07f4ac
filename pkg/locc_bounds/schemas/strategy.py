"""Strategy dump schema"""

import json
from pathlib import Path
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, Field

from locc_bounds.models.bounds import Direction
from locc_bounds.models.operators import HermitianOp
from locc_bounds.models.strategy import NonAdaptiveStrategy, OneRoundStrategy
from locc_bounds.schemas.ensemble import MatrixEncoding, decode_matrix, encode_matrix


class StrategyFile(BaseModel):
    """
    JSON strategy: `alice` is the first party's POVM; `bob` is a list of
    POVMs (one per message) for one-round strategies and a single POVM for
    non-adaptive ones, where `post[a][b]` is the guess distribution
    """

    variant: Literal["1r", "na"]
    direction: Direction = Direction.A_TO_B
    value: Optional[float] = None
    alice: List[MatrixEncoding] = Field(..., min_length=1)
    bob: Union[List[List[MatrixEncoding]], List[MatrixEncoding]]
    post: Optional[List[List[List[float]]]] = None


def _encode(ops) -> List[MatrixEncoding]:
    return [encode_matrix(op.entries) for op in ops]


def _decode(rows: List[MatrixEncoding]) -> tuple:
    out = []
    for raw in rows:
        arr = decode_matrix(raw)
        out.append(HermitianOp.from_array(arr, (arr.shape[0],)))
    return tuple(out)


def strategy_to_file(s: Union[OneRoundStrategy, NonAdaptiveStrategy], value: Optional[float] = None) -> StrategyFile:
    if isinstance(s, OneRoundStrategy):
        return StrategyFile(
            variant="1r", direction=s.direction, value=value,
            alice=_encode(s.alice), bob=[_encode(povm) for povm in s.bob],
        )
    return StrategyFile(
        variant="na", value=value, alice=_encode(s.alice), bob=_encode(s.bob), post=s.post.tolist(),
    )


def strategy_from_file(document: StrategyFile) -> Union[OneRoundStrategy, NonAdaptiveStrategy]:
    """
    Raises:
        ValueError: If the operators do not form valid POVMs
    """
    alice = _decode(document.alice)
    if document.variant == "1r":
        return OneRoundStrategy(alice, tuple(_decode(povm) for povm in document.bob), document.direction)
    if document.post is None:
        raise ValueError("a non-adaptive strategy needs 'post'")
    return NonAdaptiveStrategy(alice, _decode(document.bob), np.asarray(document.post))


def save_strategy(s: Union[OneRoundStrategy, NonAdaptiveStrategy], path: Union[str, Path], value: Optional[float] = None) -> None:
    Path(path).write_text(json.dumps(strategy_to_file(s, value).model_dump(mode="json", exclude_none=True), indent=1))


def load_strategy(path: Union[str, Path]) -> Union[OneRoundStrategy, NonAdaptiveStrategy]:
    return strategy_from_file(StrategyFile.model_validate(json.loads(Path(path).read_text())))
