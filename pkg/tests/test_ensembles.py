"""Tests for the ensemble service"""

import json

import numpy as np
import pytest

from locc_bounds.models.ensemble import EnsembleValidationError, StateEnsemble
from locc_bounds.models.operators import HermitianOp
from locc_bounds.schemas.ensemble import encode_matrix
from locc_bounds.services.ensembles import ensemble_service
from locc_bounds.services.linalg import partial_trace


def gram(e):
    """Gram matrix of the (pure) states, from their top eigenvectors"""
    vecs = []
    for rho in e.states:
        vals, v = np.linalg.eigh(rho.entries)
        vecs.append(v[:, -1])
    v = np.array(vecs)
    return np.abs(v.conj() @ v.T)


def write_ensemble(path, d_A, d_B, items):
    path.write_text(json.dumps({
        "d_A": d_A,
        "d_B": d_B,
        "items": [{"prior": p, "state": encode_matrix(s)} for p, s in items],
    }))
    return path


class TestBellBasisFamily:
    def test_maximally_entangled_point(self):
        """τ = π/2 gives tangle 1 for every member"""
        e = ensemble_service.bell_basis_family(np.pi / 4, np.pi / 2, np.pi / 2)
        for rho in e.states:
            assert ensemble_service.tangle(rho) == pytest.approx(1.0, abs=1e-12)

    def test_product_point(self):
        e = ensemble_service.bell_basis_family(np.pi / 4, 0.0, np.pi / 2)
        for rho in e.states:
            assert ensemble_service.tangle(rho) == pytest.approx(0.0, abs=1e-12)

    def test_tangle_formula(self):
        """Tangle of the second member at τ = π/3 is 3/4"""
        e = ensemble_service.bell_basis_family(np.pi / 4, np.pi / 3, np.pi / 2)
        assert ensemble_service.tangle(e.states[1]) == pytest.approx(0.75, abs=1e-12)

    def test_orthonormal_and_tangle_on_random_grid(self, rng):
        for delta, tau, xi in rng.uniform(0, 2 * np.pi, size=(32, 3)):
            e = ensemble_service.bell_basis_family(delta, tau, xi)
            assert np.abs(gram(e) - np.eye(4)).max() <= 1e-12
            expected = np.sin(2 * delta) ** 2 * np.sin(tau) ** 2
            for rho in e.states:
                assert ensemble_service.tangle(rho) == pytest.approx(expected, abs=1e-12)

    def test_uniform_priors_and_params(self):
        e = ensemble_service.bell_basis_family(0.1, 0.2, 0.3)
        assert np.allclose(e.priors, 0.25)
        assert e.name == "bell"
        assert e.params["tau"] == 0.2


class TestBuiltInEnsembles:
    def test_trine_overlaps(self, trine):
        """|<ψ_i|ψ_j>| = 1/4 for i != j"""
        g = gram(trine)
        off = g[~np.eye(3, dtype=bool)]
        assert np.allclose(off, 0.25)

    def test_trine_is_product(self, trine):
        assert np.allclose(trine.priors, 1 / 3)
        for rho in trine.states:
            assert ensemble_service.tangle(rho) == pytest.approx(0.0, abs=1e-12)

    def test_ququart_marginals(self, ququart):
        for rho in ququart.states:
            for s in (1, 2):
                assert np.allclose(partial_trace(rho, [s]).entries, np.eye(4) / 4)

    def test_ququart_orthogonal(self, ququart):
        assert np.allclose(gram(ququart), np.eye(3), atol=1e-12)
        assert np.allclose(ququart.priors, 1 / 3)


class TestValidation:
    def test_priors_must_sum_to_one(self):
        rho = HermitianOp.projector([1, 0, 0, 0], (2, 2))
        with pytest.raises(EnsembleValidationError, match="priors do not sum to 1"):
            StateEnsemble(2, 2, ((0.5, rho), (0.4, rho)))

    def test_negative_prior(self):
        rho = HermitianOp.projector([1, 0, 0, 0], (2, 2))
        with pytest.raises(EnsembleValidationError, match="prior of state 2"):
            StateEnsemble(2, 2, ((1.1, rho), (-0.1, rho)))

    def test_non_psd_state(self):
        bad = HermitianOp.from_array(np.diag([1.5, -0.5, 0, 0]), (2, 2))
        with pytest.raises(EnsembleValidationError, match="state 1 is not positive semidefinite"):
            StateEnsemble(2, 2, ((1.0, bad),))


class TestFiles:
    def test_round_trip(self, trine, tmp_path):
        path = tmp_path / "trine.json"
        ensemble_service.save_ensemble(trine, path)
        loaded = ensemble_service.load_ensemble(path)
        assert loaded.allclose(trine, atol=1e-15)
        assert loaded.name == "trine"

    def test_parameters_survive_round_trip(self, bell_family, tmp_path):
        path = tmp_path / "basis.json"
        ensemble_service.save_ensemble(bell_family(np.pi / 3), path)
        loaded = ensemble_service.load_ensemble(path)
        assert loaded.params["tau"] == pytest.approx(np.pi / 3)
        assert loaded.params["xi"] == pytest.approx(np.pi / 2)

    def test_priors_summing_to_point_nine(self, tmp_path):
        state = np.diag([1.0, 0, 0, 0])
        path = write_ensemble(tmp_path / "bad.json", 2, 2, [(0.45, state), (0.45, state)])
        with pytest.raises(EnsembleValidationError, match="priors do not sum to 1"):
            ensemble_service.load_ensemble(path)

    def test_non_psd_names_index(self, tmp_path):
        good = np.diag([1.0, 0, 0, 0])
        bad = np.diag([1.5, -0.5, 0, 0])
        path = write_ensemble(tmp_path / "bad.json", 2, 2, [(0.5, good), (0.5, bad)])
        with pytest.raises(EnsembleValidationError, match="state 2"):
            ensemble_service.load_ensemble(path)

    def test_zero_prior_rejected(self, tmp_path):
        state = np.diag([1.0, 0, 0, 0])
        path = write_ensemble(tmp_path / "zero.json", 2, 2, [(1.0, state), (0.0, state)])
        with pytest.raises(EnsembleValidationError, match="malformed"):
            ensemble_service.load_ensemble(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(EnsembleValidationError):
            ensemble_service.load_ensemble(path)


class TestSwapAndMarginals:
    def test_involution(self, trine):
        twice = ensemble_service.swap_parties(ensemble_service.swap_parties(trine))
        assert twice.allclose(trine)
        assert not twice.swapped

    def test_symmetric_state_unchanged(self, ququart):
        swapped = ensemble_service.swap_parties(ququart)
        assert swapped.states[0].allclose(ququart.states[0])

    def test_marginals_exchange(self, bell_family):
        e = bell_family(np.pi / 3)
        swapped = ensemble_service.swap_parties(e)
        for i in range(e.n):
            assert np.allclose(ensemble_service.marginal(swapped, i, "B"), ensemble_service.marginal(e, i, "A"))

    def test_swap_exchanges_dims(self):
        e = ensemble_service.from_vectors([np.kron([1, 0], [1, 0, 0])], 2, 3)
        swapped = ensemble_service.swap_parties(e)
        assert (swapped.d_A, swapped.d_B) == (3, 2)

    def test_tangle_rejects_mixed_state(self):
        mixed = HermitianOp.from_array(np.eye(4) / 4, (2, 2))
        with pytest.raises(ValueError, match="not pure"):
            ensemble_service.tangle(mixed)
