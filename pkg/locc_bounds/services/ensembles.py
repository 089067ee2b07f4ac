"""Ensemble construction, serialization and characterization"""

import json
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from locc_bounds.models.ensemble import EnsembleValidationError, StateEnsemble
from locc_bounds.models.operators import HermitianOp
from locc_bounds.schemas.ensemble import EnsembleFile, EnsembleItemFile, decode_matrix, encode_matrix
from locc_bounds.services.linalg import partial_trace, ptrace_array, swap_array

PURITY_TOL = 1e-10


def _ket(*amplitudes) -> np.ndarray:
    return np.asarray(amplitudes, dtype=complex)


class EnsembleService:
    """Builders and I/O for state ensembles"""

    def from_vectors(self, vectors: Sequence[np.ndarray], d_A: int, d_B: int, priors=None, name: str = "custom", params=None) -> StateEnsemble:
        """
        Build an ensemble of pure states

        Args:
            vectors: State vectors on C^d_A ⊗ C^d_B
            d_A: Local dimension of the first party
            d_B: Local dimension of the second party
            priors: Prior probabilities (uniform when omitted)
            name: Ensemble identifier
            params: Construction parameters kept with the ensemble

        Returns:
            StateEnsemble with density-matrix states
        """
        n = len(vectors)
        if priors is None:
            priors = [1.0 / n] * n
        items = tuple(
            (float(p), HermitianOp.projector(v, (d_A, d_B))) for p, v in zip(priors, vectors)
        )
        return StateEnsemble(d_A, d_B, items, name=name, params=dict(params or {}))

    def bell_basis_family(self, delta: float, tau: float, xi: float) -> StateEnsemble:
        """
        Two-qubit orthonormal bases parametrised by (δ, τ, ξ), uniform priors

        Basis order is |00>, |01>, |10>, |11> with Alice's qubit first.
        """
        sd, cd = np.sin(delta), np.cos(delta)
        st, ct = np.sin(tau), np.cos(tau)
        phase = np.exp(1j * xi)
        vectors = [
            _ket(0, sd, st * cd, -ct * cd),
            _ket(0, cd, -st * sd, ct * sd),
            _ket(-cd * phase, 0, ct * sd, st * sd),
            _ket(sd * phase, 0, ct * cd, st * cd),
        ]
        return self.from_vectors(
            vectors, 2, 2, name="bell", params={"delta": delta, "tau": tau, "xi": xi}
        )

    def double_trine(self) -> StateEnsemble:
        """Three product states |s_i>|s_i> with trine qubit states"""
        trine = [
            _ket(1, 0),
            _ket(-0.5, -np.sqrt(3) / 2),
            _ket(-0.5, np.sqrt(3) / 2),
        ]
        return self.from_vectors([np.kron(s, s) for s in trine], 2, 2, name="trine")

    def ququart_ensemble(self) -> StateEnsemble:
        """Three maximally entangled states on C^4 ⊗ C^4"""

        def ket(*terms):
            v = np.zeros(16, dtype=complex)
            for sign, i, j in terms:
                v[4 * i + j] = sign * 0.5
            return v

        vectors = [
            ket((1, 0, 0), (1, 1, 1), (1, 2, 2), (1, 3, 3)),
            ket((1, 0, 3), (1, 1, 2), (1, 2, 1), (1, 3, 0)),
            ket((1, 0, 1), (1, 1, 0), (-1, 2, 3), (-1, 3, 2)),
        ]
        return self.from_vectors(vectors, 4, 4, name="ququart")

    def tangle(self, pure_state: HermitianOp) -> float:
        """
        Tangle 2(1 - Tr[(Tr_B |ψ><ψ|)^2]) of a pure bipartite state

        Raises:
            ValueError: If the input is not a normalised rank-1 state
        """
        if pure_state.shape.factors != 2:
            raise ValueError(f"Tangle needs a bipartite state, got dims {pure_state.shape.dims}")
        rho = pure_state.entries
        if abs(np.trace(rho).real - 1.0) > PURITY_TOL:
            raise ValueError("Tangle input must have unit trace")
        purity = float(np.real(np.trace(rho @ rho)))
        if abs(purity - 1.0) > PURITY_TOL:
            raise ValueError(f"Tangle input is not pure (purity = {purity:.12g})")
        reduced = partial_trace(pure_state, [2]).entries
        return float(2.0 * (1.0 - np.real(np.trace(reduced @ reduced))))

    def swap_parties(self, e: StateEnsemble) -> StateEnsemble:
        """Exchange the roles of the two parties"""
        items = tuple(
            (p, HermitianOp.from_array(swap_array(rho.entries, e.d_A, e.d_B), (e.d_B, e.d_A)))
            for p, rho in e.items
        )
        return StateEnsemble(e.d_B, e.d_A, items, name=e.name, params=dict(e.params), swapped=not e.swapped)

    def marginal(self, e: StateEnsemble, index: int, party: str) -> np.ndarray:
        """Reduced state of item `index` (0-based) on party "A" or "B" """
        if party not in ("A", "B"):
            raise ValueError(f"Unknown party {party!r}")
        traced = [1] if party == "A" else [0]
        return ptrace_array(e.states[index].entries, (e.d_A, e.d_B), traced)

    def save_ensemble(self, e: StateEnsemble, path: Union[str, Path]) -> None:
        document = EnsembleFile(
            d_A=e.d_A,
            d_B=e.d_B,
            items=[EnsembleItemFile(prior=p, state=encode_matrix(rho.entries)) for p, rho in e.items],
            params={key: float(value) for key, value in e.params.items() if isinstance(value, (int, float))},
        )
        Path(path).write_text(json.dumps(document.model_dump(), indent=1))
        logger.debug(f"Saved ensemble with {e.n} states to {path}")

    def load_ensemble(self, path: Union[str, Path]) -> StateEnsemble:
        """
        Load an ensemble JSON file

        Raises:
            EnsembleValidationError: If the file is malformed or an invariant fails
        """
        try:
            raw = json.loads(Path(path).read_text())
            document = EnsembleFile.model_validate(raw)
        except (OSError, json.JSONDecodeError, ValidationError) as e:
            raise EnsembleValidationError(f"malformed ensemble file {path}: {e}") from e

        items = []
        for index, item in enumerate(document.items, start=1):
            matrix = decode_matrix(item.state)
            if matrix.shape[0] != document.d_A * document.d_B:
                raise EnsembleValidationError(f"state {index} has dimension {matrix.shape[0]}, expected {document.d_A * document.d_B}")
            try:
                rho = HermitianOp.from_array(matrix, (document.d_A, document.d_B))
            except ValueError as e:
                raise EnsembleValidationError(f"state {index} is not Hermitian") from e
            items.append((item.prior, rho))

        ensemble = StateEnsemble(
            document.d_A, document.d_B, tuple(items), name=Path(path).stem, params=dict(document.params)
        )
        logger.info(f"Loaded ensemble {ensemble.name} with {ensemble.n} states on ({ensemble.d_A}, {ensemble.d_B})")
        return ensemble


# Global ensemble service instance
ensemble_service = EnsembleService()
