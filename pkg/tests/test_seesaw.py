"""Tests for the see-saw lower bounds"""

import numpy as np
import pytest

from locc_bounds.models.bounds import BoundKind, Direction, Method
from locc_bounds.services.certify import analytic_p_succ_BtoA, analytic_strategy_AtoB, analytic_strategy_BtoA
from locc_bounds.services.ensembles import ensemble_service
from locc_bounds.services.linalg import is_povm
from locc_bounds.services.seesaw import SeesawRun, SolverFailure, seesaw_service


def product_basis():
    """|00>, |01>, |10>, |11> with equal priors"""
    return ensemble_service.from_vectors(list(np.eye(4)), 2, 2, name="product")


class TestRandomPovm:
    @pytest.mark.parametrize("d, outcomes", [(2, 2), (2, 4), (4, 2), (3, 1)])
    def test_is_povm(self, rng, d, outcomes):
        povm = seesaw_service.random_povm(d, outcomes, rng)
        assert len(povm) == outcomes
        assert is_povm(povm, 1e-9)

    def test_seeded(self):
        a = seesaw_service.random_povm(2, 3, np.random.default_rng(7))
        b = seesaw_service.random_povm(2, 3, np.random.default_rng(7))
        assert all(x.allclose(y) for x, y in zip(a, b))

    def test_needs_outcomes(self, rng):
        with pytest.raises(ValueError, match="at least one outcome"):
            seesaw_service.random_povm(2, 0, rng)


class TestStrategyValue:
    def test_computational_ququart(self, ququart):
        """Alice's basis outcome leaves Bob three orthogonal basis states"""
        s = seesaw_service.computational_basis_strategy(ququart, 4)
        assert seesaw_service.strategy_value(ququart, s) == pytest.approx(1.0, abs=1e-12)

    def test_computational_needs_enough_messages(self, ququart):
        assert seesaw_service.computational_basis_strategy(ququart, 3) is None

    def test_analytic_ba(self, bell_family):
        tau = np.pi / 3
        value = seesaw_service.strategy_value(bell_family(tau), analytic_strategy_BtoA(tau))
        assert value == pytest.approx(0.75, abs=1e-12)

    def test_analytic_ab_endpoints(self, bell_family):
        assert seesaw_service.strategy_value(bell_family(0.0), analytic_strategy_AtoB(0.0)) == pytest.approx(0.853553, abs=1e-6)
        assert seesaw_service.strategy_value(bell_family(np.pi / 2), analytic_strategy_AtoB(np.pi / 2)) == pytest.approx(0.5, abs=1e-12)

    def test_measurement_is_povm(self, bell_family):
        tau = np.pi / 5
        for s in (analytic_strategy_AtoB(tau), analytic_strategy_BtoA(tau)):
            measurement = seesaw_service.strategy_measurement(bell_family(tau), s)
            total = sum(measurement)
            assert np.allclose(total, np.eye(4), atol=1e-12)

    def test_dimension_mismatch(self, trine, ququart):
        s = seesaw_service.computational_basis_strategy(ququart, 4)
        with pytest.raises(ValueError, match="Strategy acts on"):
            seesaw_service.strategy_value(trine, s)


class TestBestResponses:
    def test_bob_given_analytic_first_measurement(self, bell_family):
        """Bob's best response to the analytic first POVM recovers (1 + cos τ)/2"""
        tau = np.pi / 3
        first = analytic_strategy_BtoA(tau).alice
        bob, value = seesaw_service.optimal_bob_given_alice(bell_family(tau), first, Direction.B_TO_A)
        assert value == pytest.approx(analytic_p_succ_BtoA(tau), abs=1e-5)
        assert len(bob) == 2
        assert all(is_povm(list(povm), 1e-9) for povm in bob)

    def test_alice_given_bob(self, trine):
        """A single trivial message reduces to Helstrom discrimination on one side"""
        bob, _ = seesaw_service.optimal_bob_given_alice(trine, seesaw_service.random_povm(2, 1, np.random.default_rng(0)))
        alice, value = seesaw_service.optimal_alice_given_bob(trine, bob)
        assert len(alice) == 1
        assert value == pytest.approx(2 / 3, abs=1e-5)

    def test_best_post_ties_to_lowest(self):
        e = product_basis()
        eye = [np.eye(2, dtype=complex)]
        post = seesaw_service.best_post(e, eye, eye)
        assert post[0, 0].tolist() == [1.0, 0.0, 0.0, 0.0]


class TestOneRound:
    def test_single_message_is_bob_alone(self, trine):
        """With m = 1 Bob discriminates the trine marginals: 2/3"""
        result, strategy = seesaw_service.seesaw_oneround(trine, 1, restarts=2, max_iters=5, seed=0, workers=1)
        assert result.kind == BoundKind.LOWER
        assert result.method == Method.SEESAW_ONEROUND
        assert result.value == pytest.approx(2 / 3, abs=1e-5)
        assert strategy.m == 1

    def test_deterministic_for_seed(self, trine):
        a = seesaw_service.run_oneround(trine, 2, restarts=3, max_iters=10, seed=11, workers=1)
        b = seesaw_service.run_oneround(trine, 2, restarts=3, max_iters=10, seed=11, workers=1)
        assert a.result.value == pytest.approx(b.result.value, abs=1e-9)
        assert [r.label for r in a.runs] == [r.label for r in b.runs]

    def test_histories_non_decreasing(self, trine):
        report = seesaw_service.run_oneround(trine, 2, restarts=3, max_iters=10, seed=3, workers=1)
        assert report.failed == 0
        for run in report.runs:
            assert all(later >= earlier - 1e-5 for earlier, later in zip(run.history, run.history[1:]))

    def test_between_bob_alone_and_global(self, trine):
        result, strategy = seesaw_service.seesaw_oneround(trine, 2, restarts=3, max_iters=20, seed=0, workers=1)
        assert 2 / 3 - 1e-6 <= result.value <= 0.971405 + 1e-6
        assert seesaw_service.strategy_value(trine, strategy) == pytest.approx(result.value, abs=1e-12)

    def test_ba_starts_from_analytic(self, bell_family):
        tau = np.pi / 3
        report = seesaw_service.run_oneround(bell_family(tau), 2, restarts=0, max_iters=5, direction=Direction.B_TO_A, workers=1)
        assert "analytic_ba" in [r.label for r in report.runs]
        assert report.result.value >= 0.75 - 1e-6
        assert report.strategy.direction == Direction.B_TO_A

    def test_analytic_seed_follows_shape_not_name(self, bell_family, tmp_path):
        """A Bell-family ensemble read back from a file under another name still gets the analytic start"""
        path = tmp_path / "rotated_basis.json"
        ensemble_service.save_ensemble(bell_family(np.pi / 3), path)
        e = ensemble_service.load_ensemble(path)
        assert e.name == "rotated_basis"
        report = seesaw_service.run_oneround(e, 2, restarts=0, max_iters=5, direction=Direction.B_TO_A, workers=1)
        assert "analytic_ba" in [r.label for r in report.runs]
        assert report.result.value >= 0.75 - 1e-6

    def test_no_analytic_seed_for_other_shapes(self, trine):
        report = seesaw_service.run_oneround(trine, 2, restarts=0, max_iters=3, workers=1)
        assert [r.label for r in report.runs] == ["computational"]

    def test_repeat_with_same_seed_is_identical(self, trine):
        """Same seed, same value, also across the thread pool"""
        first, s1 = seesaw_service.seesaw_oneround(trine, 2, restarts=4, max_iters=10, seed=7, workers=2)
        second, s2 = seesaw_service.seesaw_oneround(trine, 2, restarts=4, max_iters=10, seed=7, workers=2)
        assert first.value == pytest.approx(second.value, abs=1e-12)
        assert all(a.allclose(b) for a, b in zip(s1.alice, s2.alice))

    def test_threaded_restarts(self, trine):
        report = seesaw_service.run_oneround(trine, 2, restarts=4, max_iters=5, seed=1, workers=2)
        assert len(report.runs) == 5  # computational seed plus four random starts

    def test_all_restarts_failed(self):
        with pytest.raises(SolverFailure, match="All 2 restarts"):
            seesaw_service._pick_best([SeesawRun("a", error="x"), SeesawRun("b", error="y")], "demo")


class TestNonAdaptive:
    def test_orthogonal_product_states(self):
        result, strategy = seesaw_service.seesaw_nonadaptive(product_basis(), 2, restarts=1, max_iters=5, workers=1)
        assert result.value == pytest.approx(1.0, abs=1e-5)
        assert result.method == Method.SEESAW_NONADAPTIVE
        assert strategy.m_B == 4

    def test_bell_family_reaches_analytic(self, bell_family):
        tau = np.pi / 4
        e = bell_family(tau)
        result, strategy = seesaw_service.seesaw_nonadaptive(e, 2, m_B=2, restarts=2, max_iters=10, workers=1)
        assert result.value >= seesaw_service.strategy_value(e, analytic_strategy_AtoB(tau)) - 1e-5

    def test_rejects_zero_outcomes(self, trine):
        with pytest.raises(ValueError, match="must be >= 1"):
            seesaw_service.run_nonadaptive(trine, 0)


@pytest.mark.slow
@pytest.mark.parametrize("m, expected", [(2, 0.8976), (4, 0.9330)])
def test_trine_oneround_table_values(trine, m, expected):
    result, _ = seesaw_service.seesaw_oneround(trine, m, seed=0)
    assert result.value == pytest.approx(expected, abs=5e-3)


@pytest.mark.slow
@pytest.mark.parametrize("m, expected", [(2, 0.8003), (3, 0.8079)])
def test_trine_nonadaptive_table_values(trine, m, expected):
    result, _ = seesaw_service.seesaw_nonadaptive(trine, m, seed=0)
    assert result.value == pytest.approx(expected, abs=5e-3)


@pytest.mark.slow
@pytest.mark.parametrize("m, expected", [(2, 0.6667), (3, 0.8333), (4, 1.0)])
def test_ququart_oneround_table_values(ququart, m, expected):
    result, _ = seesaw_service.seesaw_oneround(ququart, m, seed=0)
    assert result.value == pytest.approx(expected, abs=5e-3)
