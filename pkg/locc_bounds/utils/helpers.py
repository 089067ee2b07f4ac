"""Helper utilities for the command line"""

import math
import re
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from locc_bounds.models.bounds import Direction, Method
from locc_bounds.models.ensemble import StateEnsemble
from locc_bounds.services.ensembles import ensemble_service

METHOD_NAMES = {
    "global": Method.GLOBAL,
    "ppt": Method.PPT,
    "1r": Method.ONEROUND,
    "na": Method.NONADAPTIVE,
    "analytic": Method.ANALYTIC,
    "seesaw": Method.SEESAW_ONEROUND,
}

_ITEM = re.compile(r"^(?P<name>[a-z0-9]+)(?::(?P<dir>ab|ba|na))?(?:@(?P<k>\d+))?$")


@dataclass(frozen=True)
class MethodItem:
    """One entry of a `--methods` list"""

    name: str
    method: Method
    direction: Optional[Direction] = None
    k: Optional[int] = None

    @property
    def label(self) -> str:
        if self.method == Method.SEESAW_NONADAPTIVE:
            return "seesaw_na"
        return self.name


def parse_ensemble(text: str) -> StateEnsemble:
    """
    Build an ensemble from its command-line form

    Args:
        text: `bell:δ,τ,ξ` (angles in units of π), `trine`, `ququart` or `file:PATH`

    Returns:
        StateEnsemble

    Raises:
        ValueError: If the form is not recognised
    """
    text = text.strip()
    if text == "trine":
        return ensemble_service.double_trine()
    if text == "ququart":
        return ensemble_service.ququart_ensemble()
    if text.startswith("file:"):
        return ensemble_service.load_ensemble(text[len("file:"):])
    if text.startswith("bell:"):
        parts = text[len("bell:"):].split(",")
        if len(parts) != 3:
            raise ValueError(f"bell ensemble needs three angles, got {text!r}")
        try:
            delta, tau, xi = (float(p) * math.pi for p in parts)
        except ValueError as e:
            raise ValueError(f"Invalid angle in {text!r}") from e
        return ensemble_service.bell_basis_family(delta, tau, xi)
    raise ValueError(f"Unknown ensemble {text!r}; use bell:δ,τ,ξ, trine, ququart or file:PATH")


def parse_tau_grid(text: str) -> List[float]:
    """
    `START:STOP:COUNT` in units of π to a list of radians, endpoints included

    Raises:
        ValueError: If the grid is malformed or COUNT < 1
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"tau grid must be START:STOP:COUNT, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ValueError(f"Invalid tau grid {text!r}") from e
    if count < 1:
        raise ValueError(f"tau grid needs COUNT >= 1, got {count}")
    return [float(t) * math.pi for t in np.linspace(start, stop, count)]


def parse_method_item(text: str) -> MethodItem:
    """
    Parse `METHOD[:DIR][@K]`, e.g. `ppt`, `1r:ba`, `1r:ab@2`, `seesaw:na`

    Raises:
        ValueError: On unknown methods or directions that do not apply
    """
    match = _ITEM.match(text.strip().lower())
    if not match or match.group("name") not in METHOD_NAMES:
        raise ValueError(f"Unknown method item {text!r}")
    name, tag, k = match.group("name"), match.group("dir"), match.group("k")
    method = METHOD_NAMES[name]
    if tag == "na":
        if method != Method.SEESAW_ONEROUND:
            raise ValueError(f"':na' only applies to seesaw, got {text!r}")
        return MethodItem(name, Method.SEESAW_NONADAPTIVE, None, None)
    if tag and method in (Method.GLOBAL, Method.PPT, Method.ANALYTIC):
        raise ValueError(f"{name} takes no direction, got {text!r}")
    if k is not None and method not in (Method.ONEROUND, Method.NONADAPTIVE):
        raise ValueError(f"{name} takes no level, got {text!r}")
    return MethodItem(name, method, Direction(tag) if tag else None, int(k) if k else None)


def parse_method_list(text: str) -> List[MethodItem]:
    items = [parse_method_item(part) for part in text.split(",") if part.strip()]
    if not items:
        raise ValueError("Empty method list")
    return items


def format_value(value: float, digits: int = 6) -> str:
    """Fixed-point rendering for tables; empty for missing values"""
    if value is None or not math.isfinite(value):
        return ""
    return f"{value:.{digits}f}"
