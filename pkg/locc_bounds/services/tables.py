"""Reproduction of the reference bound tables"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from loguru import logger

from locc_bounds.config import settings
from locc_bounds.models.bounds import BoundResult, HierarchyParams, Method
from locc_bounds.models.ensemble import StateEnsemble
from locc_bounds.schemas.tables import ReferenceColumn, ReferenceTable, TableCell
from locc_bounds.services.hierarchies import HierarchyService, SizeCapExceeded, hierarchy_service
from locc_bounds.services.seesaw import SolverFailure, seesaw_service
from locc_bounds.utils.helpers import parse_ensemble

REFERENCE_FILE = Path(__file__).resolve().parent.parent / "data" / "reference_tables.toml"

# (lower, upper) column pairs of the ordering chain
CHAIN = [
    ("na_seesaw", "na_sdp"),
    ("na_sdp", "1r_sdp"),
    ("1r_seesaw", "1r_sdp"),
    ("1r_sdp", "ppt"),
    ("ppt", "global"),
]


@dataclass
class TableReport:
    which: str
    k: int
    cells: List[TableCell]
    reference_bounds: Dict[str, float] = field(default_factory=dict)
    chain_violations: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells) and not self.chain_violations


class TablesService:
    """Recomputes every cell of a reference table and grades it"""

    def __init__(self, reference_file: Optional[Path] = None):
        self.reference_file = Path(reference_file or REFERENCE_FILE)

    def load_reference(self, which: str) -> ReferenceTable:
        """
        Raises:
            ValueError: If `which` has no section in the reference file
        """
        with open(self.reference_file, "rb") as f:
            data = tomllib.load(f)
        if which not in data:
            raise ValueError(f"No reference table {which!r}; have {sorted(data)}")
        return ReferenceTable.model_validate(data[which])

    def grade(self, which: str, m: int, column: ReferenceColumn, expected: float, result: Optional[BoundResult], verdict: Optional[str] = None) -> TableCell:
        value = None if result is None or result.value != result.value else result.value
        if verdict is None:
            if value is None:
                verdict = "failed"
            elif column.kind == "upper":
                verdict = "ok" if abs(value - expected) <= column.tol else "mismatch"
            else:
                verdict = "ok" if value >= expected - column.tol else "below"
        return TableCell(
            which=which, m=m, column=column.name, kind=column.kind, value=value,
            expected=expected, tol=column.tol, verdict=verdict, gap=result.gap if result else 0.0,
        )

    def _compute(self, e: StateEnsemble, column: str, m: int, k: int, hierarchy: HierarchyService, restarts: Optional[int], seed: int, eps: Optional[float]) -> BoundResult:
        if column == "1r_sdp":
            return hierarchy.upper_bound(e, Method.ONEROUND, HierarchyParams(m, k), eps)
        if column == "na_sdp":
            return hierarchy.upper_bound(e, Method.NONADAPTIVE, HierarchyParams(m, k), eps)
        if column == "1r_seesaw":
            return seesaw_service.seesaw_oneround(e, m, restarts, seed=seed, workers=1)[0]
        if column == "na_seesaw":
            return seesaw_service.seesaw_nonadaptive(e, m, restarts=restarts, seed=seed, workers=1)[0]
        raise ValueError(f"Unknown table column {column!r}")

    def _cell(self, which: str, e: StateEnsemble, job: Tuple[int, ReferenceColumn, float], k: int, hierarchy: HierarchyService, restarts, seed, eps) -> TableCell:
        m, column, expected = job
        try:
            result = self._compute(e, column.name, m, k, hierarchy, restarts, seed, eps)
        except SizeCapExceeded as err:
            logger.warning(f"{which} m={m} {column.name}: {err}")
            return self.grade(which, m, column, expected, None, "refused")
        except (SolverFailure, ValueError) as err:
            logger.error(f"{which} m={m} {column.name} failed: {err}")
            return self.grade(which, m, column, expected, None, "failed")
        cell = self.grade(which, m, column, expected, result)
        logger.info(f"{which} m={m} {column.name}: {cell.value} (expected {expected}, {cell.verdict})")
        return cell

    def check_chain(self, cells: List[TableCell], reference_bounds: Dict[str, float], eps: float) -> List[str]:
        """seesaw ≤ na ≤ 1r ≤ ppt ≤ global for every m, within 3ε plus the solver gaps"""
        violations = []
        for m in sorted({c.m for c in cells}):
            values = dict(reference_bounds)
            gaps = {}
            for c in cells:
                if c.m == m and c.value is not None:
                    values[c.column] = c.value
                    gaps[c.column] = c.gap
            for low, high in CHAIN:
                if low in values and high in values:
                    slack = 3 * max(eps, gaps.get(low, 0.0), gaps.get(high, 0.0))
                    if values[low] > values[high] + slack:
                        violations.append(f"m={m}: {low} {values[low]:.6f} > {high} {values[high]:.6f}")
        return violations

    def reproduce(self, which: str, k: Optional[int] = None, restarts: Optional[int] = None, seed: int = 0, workers: Optional[int] = None, size_cap: Optional[int] = None, eps: Optional[float] = None) -> TableReport:
        """
        Recompute every cell of a reference table

        Args:
            which: "trine" or "ququart"
            k: Hierarchy level override
            restarts: See-saw restarts per cell
            seed: See-saw seed
            workers: Pool size (defaults to LOCC_BOUNDS_THREADS)
            size_cap: Size cap override for the hierarchy programs
            eps: Target solver gap

        Returns:
            TableReport with cells in table order
        """
        table = self.load_reference(which)
        k = k or table.k
        eps = eps or settings.LOCC_BOUNDS_EPS
        e = parse_ensemble(table.ensemble)
        hierarchy = HierarchyService(size_cap=size_cap) if size_cap else hierarchy_service

        jobs = [(m, column, column.expected[i]) for i, m in enumerate(table.m) for column in table.columns]
        workers = workers or settings.LOCC_BOUNDS_THREADS
        logger.info(f"Reproducing {which} table: {len(jobs)} cells, k={k}, {workers} workers")

        def run(job):
            return self._cell(which, e, job, k, hierarchy, restarts, seed, eps)

        if workers <= 1:
            cells = [run(job) for job in jobs]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                cells = list(pool.map(run, jobs))

        reference_bounds = {}
        for method in (Method.PPT, Method.GLOBAL):
            result = hierarchy.upper_bound(e, method, eps=eps)
            if result.value == result.value:
                reference_bounds[method.value] = result.value

        report = TableReport(which, k, cells, reference_bounds)
        report.chain_violations = self.check_chain(cells, reference_bounds, eps)
        for violation in report.chain_violations:
            logger.warning(f"Ordering chain violated: {violation}")
        return report


# Global tables service instance
tables_service = TablesService()
