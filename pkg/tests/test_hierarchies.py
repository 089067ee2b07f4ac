"""Tests for the upper-bound programs"""

import itertools

import cvxpy as cp
import numpy as np
import pytest

from locc_bounds.models.bounds import BoundKind, Direction, HierarchyParams, Method
from locc_bounds.models.program import SolveStatus
from locc_bounds.services.certify import analytic_p_succ_AtoB, analytic_p_succ_BtoA, certify_service
from locc_bounds.services.ensembles import ensemble_service
from locc_bounds.services.hierarchies import (
    HierarchyService,
    SizeCapExceeded,
    canonical_form,
    hierarchy_service,
    orbit_representatives,
    ppt_subsets,
    saturation_cutoff,
)

EPS = 1e-7


def completeness_error(measurement):
    total = sum(op.entries for op in measurement)
    return float(np.abs(total - np.eye(total.shape[0])).max())


def embed(op, position, dims):
    """op on one tensor factor, identity on the others"""
    out = np.eye(1)
    for i, d in enumerate(dims):
        out = np.kron(out, op if i == position else np.eye(d))
    return out


def unit(d, i, j):
    out = np.zeros((d, d))
    out[i, j] = 1.0
    return out


def full_index_oneround(e, m):
    """
    The level-2 one-round program with a variable for every (a1, a2, λ, b),
    written directly in cvxpy
    """
    d_A, d_B = e.d_A, e.d_B
    dims = (d_A, d_A, d_B)
    dim = d_A * d_A * d_B
    tuples = list(itertools.product(range(m), repeat=2))
    r = {(t, lam, b): cp.Variable((dim, dim), hermitian=True)
         for t in tuples for lam in range(e.n) for b in range(m)}

    def conjugate_sum(x, position, transpose):
        d = dims[position]
        pairs = itertools.product(range(d), repeat=2)
        if transpose:
            return sum(embed(unit(d, i, j), position, dims) @ x @ embed(unit(d, i, j), position, dims) for i, j in pairs)
        return sum(embed(unit(d, i, j), position, dims) @ x @ embed(unit(d, j, i), position, dims) for i, j in pairs)

    swap = np.kron(sum(np.kron(unit(d_A, i, j), unit(d_A, j, i)) for i in range(d_A) for j in range(d_A)), np.eye(d_B))
    constraints = []
    for (t, lam, b), x in r.items():
        constraints += [
            x >> 0,
            conjugate_sum(x, 0, True) >> 0,
            conjugate_sum(x, 1, True) >> 0,
            conjugate_sum(conjugate_sum(x, 0, True), 1, True) >> 0,
            r[(t[::-1], lam, b)] == swap @ x @ swap,
        ]
    for a2, lam, b in itertools.product(range(m), range(e.n), range(m)):
        total = sum(r[((a1, a2), lam, b)] for a1 in range(m))
        constraints.append(total == conjugate_sum(total, 0, False) / d_A)
    for t in tuples:
        filled = sum(conjugate_sum(r[(t, lam, b)], 2, False) for lam in range(e.n) for b in range(m)) / (m * d_B)
        for b in range(m):
            constraints.append(sum(r[(t, lam, b)] for lam in range(e.n)) == filled)
    for b in range(m):
        constraints.append(cp.real(sum(cp.trace(r[(t, lam, b)]) for t in tuples for lam in range(e.n))) == dim)

    weights = [np.kron(np.eye(d_A), w) / d_A for w in e.weighted_states()]
    objective = sum(cp.real(cp.trace(weights[lam] @ r[(t, lam, t[1])])) for t in tuples for lam in range(e.n))
    problem = cp.Problem(cp.Maximize(objective), constraints)
    problem.solve(solver=cp.CLARABEL)
    return problem.value


class TestSymmetryReduction:
    def test_orbit_sizes_sum(self):
        """Orbit sizes add up to m^k"""
        for m in range(1, 5):
            for k in range(0, 4):
                reps = orbit_representatives(m, k)
                assert sum(size for _, size in reps) == m ** k

    def test_orbit_representatives_m2_k3(self):
        assert orbit_representatives(2, 3) == [
            ((1, 1, 1), 1), ((1, 1, 2), 3), ((1, 2, 2), 3), ((2, 2, 2), 1),
        ]

    def test_orbit_representatives_invalid(self):
        with pytest.raises(ValueError):
            orbit_representatives(0, 2)

    def test_canonical_form_round_trip(self):
        for t in itertools.product(range(1, 4), repeat=3):
            rep, sigma = canonical_form(t)
            assert list(rep) == sorted(t)
            assert sigma.apply(rep) == t

    def test_ppt_subsets_one_per_submultiset(self):
        assert ppt_subsets((1, 1, 2)) == [(1,), (3,), (1, 2), (1, 3), (1, 2, 3)]

    def test_ppt_subsets_distinct_values(self):
        """All 2^k - 1 subsets when every copy differs"""
        assert len(ppt_subsets((1, 2, 3))) == 7

    def test_ppt_subsets_prefixes_only(self):
        assert ppt_subsets((1, 1, 2), all_subsets=False) == [(1,), (1, 2), (1, 2, 3)]

    def test_saturation_cutoff(self):
        assert saturation_cutoff(2) == 4
        assert saturation_cutoff(4) == 16
        with pytest.raises(ValueError):
            saturation_cutoff(0)


class TestBuild:
    def test_size_cap_refusal(self, trine):
        service = HierarchyService(size_cap=1000)
        with pytest.raises(SizeCapExceeded, match="size cap") as info:
            service.build(trine, Method.ONEROUND, HierarchyParams(2, 2))
        assert info.value.estimate > info.value.cap == 1000

    def test_na_size_cap_refusal(self, trine):
        with pytest.raises(SizeCapExceeded):
            HierarchyService(size_cap=1000).build(trine, Method.NONADAPTIVE, HierarchyParams(2, 2))

    def test_hierarchy_needs_params(self, trine):
        with pytest.raises(ValueError, match="HierarchyParams"):
            hierarchy_service.build(trine, Method.ONEROUND)

    def test_lower_bound_method_rejected(self, trine):
        with pytest.raises(ValueError, match="not an upper-bound method"):
            hierarchy_service.build(trine, Method.SEESAW_ONEROUND, HierarchyParams(2, 1))

    def test_oneround_block_count(self, trine):
        """One block per representative, λ and b, plus one slack per PPT subset"""
        program = hierarchy_service.build(trine, Method.ONEROUND, HierarchyParams(2, 2))
        assert len(program.index) == 3 * 3 * 2
        slacks = sum(len(ppt_subsets(rep)) for rep, _ in orbit_representatives(2, 2)) * 3 * 2
        assert len(program.blocks) == len(program.index) + slacks

    def test_na_block_count(self, trine):
        program = hierarchy_service.build(trine, Method.NONADAPTIVE, HierarchyParams(2, 1))
        assert len(program.index) == 2 * 3 ** 2

    def test_swapped_frame(self):
        e = ensemble_service.from_vectors([np.kron([1, 0], [1, 0, 0]), np.kron([0, 1], [0, 1, 0])], 2, 3)
        program = hierarchy_service.build(e, Method.ONEROUND, HierarchyParams(2, 1, Direction.B_TO_A))
        assert (program.frame.d_A, program.frame.d_B) == (3, 2)
        assert program.swapped


class TestGlobalAndPpt:
    def test_global_trine(self, trine):
        result = hierarchy_service.upper_bound(trine, Method.GLOBAL, eps=EPS)
        assert result.kind == BoundKind.UPPER
        assert result.value == pytest.approx(0.971405, abs=1e-5)

    def test_global_orthonormal_basis(self, bell_family):
        result = hierarchy_service.upper_bound(bell_family(np.pi / 5), Method.GLOBAL, eps=EPS)
        assert result.value == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("tau", [0.0, np.pi / 6, np.pi / 3, np.pi / 2])
    def test_ppt_bell_family(self, bell_family, tau):
        """PPT bound equals (1 + cos τ)/2 on the family"""
        result = hierarchy_service.upper_bound(bell_family(tau), Method.PPT, eps=EPS)
        assert result.value == pytest.approx(analytic_p_succ_BtoA(tau), abs=1e-5)

    def test_ppt_ququart(self, ququart):
        result = hierarchy_service.upper_bound(ququart, Method.PPT, eps=EPS)
        assert result.value == pytest.approx(1.0, abs=1e-5)

    def test_ppt_measurement_is_povm(self, trine):
        result, program, report = hierarchy_service.solve_bound(trine, Method.PPT, eps=EPS)
        measurement = program.measurement(report)
        assert completeness_error(measurement) <= 1e-5
        assert all(op.eigvalsh()[0] >= -1e-6 for op in measurement)
        assert result.params is None


class TestOneRound:
    def test_ba_level_one_matches_ppt(self, bell_family):
        """At τ = π/3 the B→A strategy meets the PPT bound, so the hierarchy is tight"""
        e = bell_family(np.pi / 3)
        result = hierarchy_service.upper_bound(e, Method.ONEROUND, HierarchyParams(2, 1, Direction.B_TO_A), EPS)
        assert result.status == SolveStatus.OPTIMAL
        assert result.value == pytest.approx(0.75, abs=1e-4)

    @pytest.mark.parametrize("tau", [0.0, np.pi / 8, np.pi / 4, 3 * np.pi / 8, np.pi / 2])
    def test_ab_level_two_matches_closed_form(self, bell_family, tau):
        """k=2 closes the gap to the A→B strategy across the family, sitting under PPT"""
        e = bell_family(tau)
        result = hierarchy_service.upper_bound(e, Method.ONEROUND, HierarchyParams(2, 2), 1e-6)
        ppt = hierarchy_service.upper_bound(e, Method.PPT, eps=1e-6)
        assert result.status == SolveStatus.OPTIMAL
        assert result.value == pytest.approx(analytic_p_succ_AtoB(tau), abs=5e-3)
        assert analytic_p_succ_AtoB(tau) - 5e-5 <= result.value <= ppt.value + 5e-5

    def test_reduction_matches_full_index_program(self, bell_family):
        """Orbit representatives lose nothing against one variable per index tuple"""
        e = bell_family(np.pi / 3)
        reduced = hierarchy_service.upper_bound(e, Method.ONEROUND, HierarchyParams(2, 2), EPS)
        assert reduced.value == pytest.approx(full_index_oneround(e, 2), abs=2e-6)

    def test_level_monotone(self, trine):
        """Raising k never loosens the bound"""
        low = hierarchy_service.upper_bound(trine, Method.ONEROUND, HierarchyParams(2, 1), EPS)
        high = hierarchy_service.upper_bound(trine, Method.ONEROUND, HierarchyParams(2, 2), EPS)
        assert high.value <= low.value + 1e-5

    def test_solver_certificate_passes(self, bell_family):
        e = bell_family(np.pi / 4)
        params = HierarchyParams(2, 2)
        result, program, report = hierarchy_service.solve_bound(e, Method.ONEROUND, params, EPS)
        claimed = program.measurement(report, original_order=False)
        check = certify_service.check_1r_certificate(
            program.certificate(report), claimed=claimed, tol=1e-5, ensemble=program.frame
        )
        assert check.passed, check.failed
        assert check.value == pytest.approx(result.value, abs=1e-5)

    def test_measurement_is_povm_in_original_order(self, bell_family):
        e = bell_family(np.pi / 3)
        params = HierarchyParams(2, 1, Direction.B_TO_A)
        result, program, report = hierarchy_service.solve_bound(e, Method.ONEROUND, params, EPS)
        measurement = program.measurement(report)
        assert completeness_error(measurement) <= 1e-5
        value = sum(np.trace(mm.entries @ w).real for mm, w in zip(measurement, e.weighted_states()))
        assert value == pytest.approx(result.value, abs=1e-5)


class TestNonAdaptive:
    def test_bell_level_one_above_analytic(self, bell_family):
        tau = np.pi / 3
        e = bell_family(tau)
        result = hierarchy_service.upper_bound(e, Method.NONADAPTIVE, HierarchyParams(2, 1), EPS)
        assert result.value >= analytic_p_succ_AtoB(tau) - 1e-5

    def test_na_below_oneround(self, trine):
        na = hierarchy_service.upper_bound(trine, Method.NONADAPTIVE, HierarchyParams(2, 1), EPS)
        oneround = hierarchy_service.upper_bound(trine, Method.ONEROUND, HierarchyParams(2, 1), EPS)
        assert na.value <= oneround.value + 1e-5

    def test_na_certificate_passes(self, trine):
        params = HierarchyParams(2, 1)
        result, program, report = hierarchy_service.solve_bound(trine, Method.NONADAPTIVE, params, EPS)
        check = certify_service.check_na_certificate(
            program.certificate(report), claimed=program.measurement(report), tol=1e-5, ensemble=trine
        )
        assert check.passed, check.failed
        assert check.value == pytest.approx(result.value, abs=1e-5)

    @pytest.mark.slow
    @pytest.mark.parametrize("m, expected", [(2, 0.8116), (3, 0.8248)])
    def test_trine_table_values(self, trine, m, expected):
        result = hierarchy_service.upper_bound(trine, Method.NONADAPTIVE, HierarchyParams(m, 3), EPS)
        assert result.value == pytest.approx(expected, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("m, expected", [(2, 0.905), (3, 0.9346)])
def test_trine_oneround_table_values(trine, m, expected):
    result = hierarchy_service.upper_bound(trine, Method.ONEROUND, HierarchyParams(m, 3), EPS)
    assert result.value == pytest.approx(expected, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("m, expected", [(2, 0.6667), (3, 0.9623)])
def test_ququart_oneround_table_values(ququart, m, expected):
    result = hierarchy_service.upper_bound(ququart, Method.ONEROUND, HierarchyParams(m, 2), EPS)
    assert result.value == pytest.approx(expected, abs=2e-3)
