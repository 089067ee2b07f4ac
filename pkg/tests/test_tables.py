"""Tests for the reference table reproduction"""

import pytest
from pydantic import ValidationError

from locc_bounds.models.bounds import BoundKind, BoundResult, HierarchyParams, Method
from locc_bounds.models.program import SolveStatus
from locc_bounds.schemas.tables import ReferenceColumn, ReferenceTable, TableCell
from locc_bounds.services.tables import TablesService, tables_service


def upper(value, gap=0.0):
    return BoundResult(value, BoundKind.UPPER, Method.ONEROUND, HierarchyParams(2, 3), gap=gap)


def cell(column, value, m=2, gap=0.0):
    return TableCell(which="trine", m=m, column=column, kind="upper", value=value, expected=value, tol=1e-3, verdict="ok", gap=gap)


class TestReferenceFile:
    def test_trine(self):
        table = tables_service.load_reference("trine")
        assert table.k == 3
        assert table.m == [2, 3, 4]
        columns = {c.name: c for c in table.columns}
        assert columns["na_sdp"].expected == [0.8116, 0.8248, 0.8509]
        assert columns["1r_seesaw"].kind == "lower"

    def test_ququart(self):
        table = tables_service.load_reference("ququart")
        assert table.k == 2
        assert {c.name for c in table.columns} == {"1r_seesaw", "1r_sdp"}

    def test_unknown(self):
        with pytest.raises(ValueError, match="No reference table"):
            tables_service.load_reference("qutrit")

    def test_custom_file(self, tmp_path):
        path = tmp_path / "tables.toml"
        path.write_text(
            '[tiny]\nensemble = "trine"\nk = 1\nm = [2]\n\n'
            '[[tiny.columns]]\nname = "1r_sdp"\nkind = "upper"\ntol = 0.01\nexpected = [0.9]\n'
        )
        table = TablesService(path).load_reference("tiny")
        assert table.columns[0].expected == [0.9]

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            ReferenceTable(
                ensemble="trine", k=1, m=[2, 3],
                columns=[ReferenceColumn(name="1r_sdp", kind="upper", tol=1e-3, expected=[0.9])],
            )


class TestGrade:
    upper_column = ReferenceColumn(name="1r_sdp", kind="upper", tol=1e-3, expected=[0.905])
    lower_column = ReferenceColumn(name="1r_seesaw", kind="lower", tol=5e-3, expected=[0.8976])

    def test_upper_within_tolerance(self):
        assert tables_service.grade("trine", 2, self.upper_column, 0.905, upper(0.9054)).verdict == "ok"

    def test_upper_mismatch_both_ways(self):
        assert tables_service.grade("trine", 2, self.upper_column, 0.905, upper(0.903)).verdict == "mismatch"
        assert tables_service.grade("trine", 2, self.upper_column, 0.905, upper(0.907)).verdict == "mismatch"

    def test_lower_may_exceed(self):
        result = BoundResult(0.91, BoundKind.LOWER, Method.SEESAW_ONEROUND)
        assert tables_service.grade("trine", 2, self.lower_column, 0.8976, result).verdict == "ok"

    def test_lower_below(self):
        result = BoundResult(0.88, BoundKind.LOWER, Method.SEESAW_ONEROUND)
        assert tables_service.grade("trine", 2, self.lower_column, 0.8976, result).verdict == "below"

    def test_missing_value_fails(self):
        result = BoundResult(float("nan"), BoundKind.UPPER, Method.ONEROUND, status=SolveStatus.NUMERICAL_TROUBLE)
        graded = tables_service.grade("trine", 2, self.upper_column, 0.905, result)
        assert graded.verdict == "failed"
        assert graded.value is None
        assert not graded.passed

    def test_csv_row(self):
        graded = tables_service.grade("trine", 2, self.upper_column, 0.905, upper(0.9051234))
        assert graded.csv_row() == ["trine", "2", "1r_sdp", "upper", "0.905123", "0.905", "0.001", "ok"]


class TestChain:
    def test_consistent(self):
        cells = [cell("na_seesaw", 0.80), cell("na_sdp", 0.81), cell("1r_seesaw", 0.89), cell("1r_sdp", 0.905)]
        assert tables_service.check_chain(cells, {"ppt": 0.95, "global": 0.97}, 1e-6) == []

    def test_violation(self):
        cells = [cell("na_sdp", 0.93), cell("1r_sdp", 0.905)]
        violations = tables_service.check_chain(cells, {}, 1e-6)
        assert violations == ["m=2: na_sdp 0.930000 > 1r_sdp 0.905000"]

    def test_gap_slack(self):
        """Differences inside three times the solver gap are tolerated"""
        cells = [cell("na_sdp", 0.9055, gap=1e-3), cell("1r_sdp", 0.905)]
        assert tables_service.check_chain(cells, {}, 1e-6) == []

    def test_rows_are_independent(self):
        cells = [cell("na_sdp", 0.93, m=2), cell("1r_sdp", 0.95, m=3)]
        assert tables_service.check_chain(cells, {}, 1e-6) == []

    def test_ppt_above_global(self):
        violations = tables_service.check_chain([cell("1r_sdp", 0.9)], {"ppt": 0.99, "global": 0.97}, 1e-6)
        assert violations == ["m=2: ppt 0.990000 > global 0.970000"]


class TestReproduce:
    def test_size_cap_refuses_sdp_cells(self, tmp_path):
        """A tiny size cap refuses the hierarchy cells without failing the run"""
        path = tmp_path / "tables.toml"
        path.write_text(
            '[tiny]\nensemble = "trine"\nk = 3\nm = [2]\n\n'
            '[[tiny.columns]]\nname = "1r_sdp"\nkind = "upper"\ntol = 1e-3\nexpected = [0.905]\n'
        )
        report = TablesService(path).reproduce("tiny", size_cap=10, workers=1)
        assert [c.verdict for c in report.cells] == ["refused"]
        assert report.reference_bounds["global"] == pytest.approx(0.971405, abs=1e-5)
        assert report.chain_violations == []

    def test_small_table(self, tmp_path):
        path = tmp_path / "tables.toml"
        path.write_text(
            '[tiny]\nensemble = "trine"\nk = 1\nm = [1]\n\n'
            '[[tiny.columns]]\nname = "1r_seesaw"\nkind = "lower"\ntol = 1e-4\nexpected = [0.6667]\n\n'
            '[[tiny.columns]]\nname = "na_sdp"\nkind = "upper"\ntol = 1e-4\nexpected = [0.6667]\n'
        )
        report = TablesService(path).reproduce("tiny", restarts=1, workers=2)
        assert [c.column for c in report.cells] == ["1r_seesaw", "na_sdp"]
        assert report.passed, [(c.column, c.value, c.verdict) for c in report.cells]


@pytest.mark.slow
def test_trine_table():
    report = tables_service.reproduce("trine")
    assert report.chain_violations == []
    assert all(c.verdict in ("ok", "refused") for c in report.cells)


@pytest.mark.slow
def test_ququart_table():
    report = TablesService().reproduce("ququart", size_cap=10 ** 9)
    assert report.passed, [(c.m, c.column, c.value) for c in report.cells]
