"""See-saw lower bounds over explicit strategies"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from locc_bounds.config import settings
from locc_bounds.models.bounds import BoundKind, BoundResult, Direction, HierarchyParams, Method
from locc_bounds.models.ensemble import StateEnsemble
from locc_bounds.models.operators import HermitianOp
from locc_bounds.models.program import SolveStatus
from locc_bounds.models.strategy import NonAdaptiveStrategy, OneRoundStrategy
from locc_bounds.services import certify
from locc_bounds.services.conic import conic_solver
from locc_bounds.services.ensembles import ensemble_service
from locc_bounds.services.hierarchies import hierarchy_service
from locc_bounds.services.linalg import (
    basis_projectors,
    hermitize,
    inverse_sqrt,
    project_povm,
    ptrace_array,
    swap_array,
)

Strategy = Union[OneRoundStrategy, NonAdaptiveStrategy]
RANDOM_POVM_RETRIES = 20


class SolverFailure(RuntimeError):
    """A see-saw sub-problem did not solve to optimality"""


@dataclass
class SeesawRun:
    """One restart of the alternation"""
    label: str
    value: float = float("nan")
    history: List[float] = field(default_factory=list)
    strategy: Optional[Strategy] = None
    error: Optional[str] = None


@dataclass
class SeesawReport:
    result: BoundResult
    strategy: Strategy
    runs: List[SeesawRun]

    @property
    def failed(self) -> int:
        return sum(1 for r in self.runs if r.error is not None)


def _ops(arrays: Sequence[np.ndarray], d: int) -> Tuple[HermitianOp, ...]:
    return tuple(HermitianOp.from_array(x, (d,), hermitize=True) for x in arrays)


def _pad(effects: List[np.ndarray], outcomes: int) -> Optional[List[np.ndarray]]:
    """Extend a POVM with zero effects; None if it has too many outcomes"""
    if len(effects) > outcomes:
        return None
    zero = np.zeros_like(effects[0])
    return list(effects) + [zero] * (outcomes - len(effects))


def _family_tau(e: StateEnsemble) -> Optional[float]:
    """τ of a two-qubit four-state ensemble that records one, else None"""
    if e.d_A != 2 or e.d_B != 2 or e.n != 4 or "tau" not in e.params:
        return None
    return float(e.params["tau"])


class SeesawService:
    """Alternating optimisation of one party's POVM with the other fixed"""

    def __init__(self, eps: Optional[float] = None):
        self.eps = eps

    # ---- evaluation -------------------------------------------------------

    def _frame(self, e: StateEnsemble, direction: Direction) -> StateEnsemble:
        return ensemble_service.swap_parties(e) if Direction(direction) == Direction.B_TO_A else e

    def strategy_measurement(self, e: StateEnsemble, s: Strategy) -> List[np.ndarray]:
        """
        M^λ of a strategy in the ensemble's party order

        Raises:
            ValueError: If the strategy dimensions do not match the ensemble
        """
        if isinstance(s, OneRoundStrategy):
            frame = self._frame(e, s.direction)
            self._check_dims(frame, s.alice[0].dim, s.bob[0][0].dim, s.n)
            outs = [sum(np.kron(a.entries, bob[lam].entries) for a, bob in zip(s.alice, s.bob)) for lam in range(s.n)]
            if s.direction == Direction.B_TO_A:
                outs = [swap_array(o, frame.d_A, frame.d_B) for o in outs]
            return outs
        self._check_dims(e, s.alice[0].dim, s.bob[0].dim, s.n)
        outs = []
        for lam in range(s.n):
            acc = np.zeros((e.dim, e.dim), dtype=complex)
            for a, a_op in enumerate(s.alice):
                for b, b_op in enumerate(s.bob):
                    if s.post[a, b, lam]:
                        acc += s.post[a, b, lam] * np.kron(a_op.entries, b_op.entries)
            outs.append(acc)
        return outs

    def _check_dims(self, frame: StateEnsemble, d_first: int, d_second: int, n: int) -> None:
        if (d_first, d_second) != (frame.d_A, frame.d_B):
            raise ValueError(f"Strategy acts on ({d_first}, {d_second}), ensemble frame is ({frame.d_A}, {frame.d_B})")
        if n != frame.n:
            raise ValueError(f"Strategy guesses among {n} states, ensemble has {frame.n}")

    def strategy_value(self, e: StateEnsemble, s: Strategy) -> float:
        """Σ_λ p_λ Tr(M^λ ρ_λ) for the strategy's measurement"""
        measurement = self.strategy_measurement(e, s)
        return float(sum(np.real(np.trace(mm @ w)) for mm, w in zip(measurement, e.weighted_states())))

    # ---- building blocks --------------------------------------------------

    def random_povm(self, d: int, outcomes: int, rng: np.random.Generator) -> List[HermitianOp]:
        """
        Random POVM from isotropic complex vectors, normalised by G^{-1/2}

        With fewer outcomes than d each effect gets ceil(d / outcomes)
        vectors so that G is invertible.

        Raises:
            ValueError: If outcomes < 1
            RuntimeError: If G stays singular after the retry budget
        """
        if outcomes < 1:
            raise ValueError(f"A POVM needs at least one outcome, got {outcomes}")
        rank = max(1, -(-d // outcomes))
        for _ in range(RANDOM_POVM_RETRIES):
            vecs = rng.standard_normal((outcomes, rank, d)) + 1j * rng.standard_normal((outcomes, rank, d))
            effects = [v.T @ v.conj() for v in vecs]
            try:
                w = inverse_sqrt(sum(effects), floor=1e-10)
            except np.linalg.LinAlgError:
                continue
            return list(_ops([w @ x @ w for x in effects], d))
        raise RuntimeError(f"Could not sample an invertible frame operator for d={d}, outcomes={outcomes}")

    def _solve_povm(self, weights: Sequence[np.ndarray], what: str) -> Tuple[List[np.ndarray], float]:
        """Best POVM for max Σ_i Tr(X_i K_i), returned as exact effects"""
        d = weights[0].shape[0]
        if len(weights) == 1:
            effects = [np.eye(d, dtype=complex)]
        else:
            program = hierarchy_service.discrimination_program(weights, (d,), name=what)
            report = conic_solver.solve(program, self.eps)
            if report.status != SolveStatus.OPTIMAL:
                raise SolverFailure(f"{what}: {report.status.value}")
            effects = project_povm([report.block_values[f"M[{i}]"].entries for i in range(1, len(weights) + 1)])
        value = float(sum(np.real(np.trace(x @ k)) for x, k in zip(effects, weights)))
        return effects, value

    def _bob_weights(self, frame: StateEnsemble, a_op: np.ndarray) -> List[np.ndarray]:
        """G_λ = p_λ Tr_A[(A ⊗ 1) ρ_λ]"""
        lift = np.kron(a_op, np.eye(frame.d_B))
        return [hermitize(ptrace_array(lift @ w, (frame.d_A, frame.d_B), [0])) for w in frame.weighted_states()]

    def _alice_weights(self, frame: StateEnsemble, b_op: np.ndarray) -> List[np.ndarray]:
        """p_λ Tr_B[(1 ⊗ B) ρ_λ] for every λ"""
        lift = np.kron(np.eye(frame.d_A), b_op)
        return [hermitize(ptrace_array(lift @ w, (frame.d_A, frame.d_B), [1])) for w in frame.weighted_states()]

    def _best_bob(self, frame, alice: List[np.ndarray]) -> Tuple[List[List[np.ndarray]], float]:
        bob, total = [], 0.0
        for a, a_op in enumerate(alice, start=1):
            effects, value = self._solve_povm(self._bob_weights(frame, a_op), f"bob[a={a}]")
            bob.append(effects)
            total += value
        return bob, total

    def _best_alice(self, frame, bob: List[List[np.ndarray]]) -> Tuple[List[np.ndarray], float]:
        dims = (frame.d_A, frame.d_B)
        weights = []
        for povm in bob:
            # K^a = Σ_λ p_λ Tr_B[(1 ⊗ B^{λ|a}) ρ_λ]
            weights.append(sum(
                hermitize(ptrace_array(np.kron(np.eye(frame.d_A), b_op) @ w, dims, [1]))
                for b_op, w in zip(povm, frame.weighted_states())
            ))
        return self._solve_povm(weights, "alice")

    def optimal_bob_given_alice(self, e: StateEnsemble, alice: Sequence[HermitianOp], direction: Direction = Direction.A_TO_B) -> Tuple[Tuple[Tuple[HermitianOp, ...], ...], float]:
        """
        Best second-party POVM for every message

        Args:
            e: The ensemble
            alice: First-party POVM
            direction: Which party measures first

        Returns:
            (per-message POVMs, total success probability)

        Raises:
            SolverFailure: If a per-message SDP fails (names the message)
        """
        frame = self._frame(e, direction)
        bob, value = self._best_bob(frame, [a.entries for a in alice])
        return tuple(_ops(povm, frame.d_B) for povm in bob), value

    def optimal_alice_given_bob(self, e: StateEnsemble, bob: Sequence[Sequence[HermitianOp]], direction: Direction = Direction.A_TO_B) -> Tuple[Tuple[HermitianOp, ...], float]:
        """
        Best first-party POVM for fixed second-party POVMs

        Returns:
            (first-party POVM, success probability)
        """
        frame = self._frame(e, direction)
        alice, value = self._best_alice(frame, [[b.entries for b in povm] for povm in bob])
        return _ops(alice, frame.d_A), value

    # ---- deterministic seeds ----------------------------------------------

    def computational_basis_strategy(self, e: StateEnsemble, m: int, direction: Direction = Direction.A_TO_B) -> Optional[OneRoundStrategy]:
        """
        First party measures the computational basis; the second party
        measures its computational basis and guesses the likeliest λ

        Returns:
            None when m is smaller than the first party's dimension
        """
        frame = self._frame(e, direction)
        alice = _pad(basis_projectors(frame.d_A), m)
        if alice is None:
            return None
        bob = []
        for a_op in alice:
            weights = self._bob_weights(frame, a_op)
            povm = [np.zeros((frame.d_B, frame.d_B), dtype=complex) for _ in range(frame.n)]
            for proj in basis_projectors(frame.d_B):
                scores = [np.real(np.trace(proj @ g)) for g in weights]
                povm[int(np.argmax(scores))] += proj
            bob.append(_ops(povm, frame.d_B))
        return OneRoundStrategy(_ops(alice, frame.d_A), tuple(bob), direction)

    def _oneround_seeds(self, e: StateEnsemble, m: int, direction: Direction) -> List[Tuple[str, List[np.ndarray]]]:
        seeds = []
        frame = self._frame(e, direction)
        basis = _pad(basis_projectors(frame.d_A), m)
        if basis is not None:
            seeds.append(("computational", basis))
        tau = _family_tau(e)
        if tau is not None and m >= 2:
            if Direction(direction) == Direction.A_TO_B:
                first = [op.entries for op in certify.analytic_strategy_AtoB(tau).alice]
            else:
                first = [op.entries for op in certify.analytic_strategy_BtoA(tau).alice]
            seeds.append((f"analytic_{Direction(direction).value}", _pad(first, m)))
        return seeds

    # ---- alternation ------------------------------------------------------

    def _oneround_value(self, frame: StateEnsemble, alice, bob) -> float:
        total = 0.0
        for a_op, povm in zip(alice, bob):
            for b_op, w in zip(povm, frame.weighted_states()):
                total += float(np.real(np.trace(np.kron(a_op, b_op) @ w)))
        return total

    def _run_oneround(self, frame, label, alice, max_iters, conv_tol, direction) -> SeesawRun:
        run = SeesawRun(label)
        try:
            bob = None
            for _ in range(max_iters):
                bob, _ = self._best_bob(frame, alice)
                alice, _ = self._best_alice(frame, bob)
                run.history.append(self._oneround_value(frame, alice, bob))
                if len(run.history) > 1 and run.history[-1] - run.history[-2] < conv_tol:
                    break
            run.strategy = OneRoundStrategy(
                _ops(alice, frame.d_A), tuple(_ops(p, frame.d_B) for p in bob), direction
            )
            run.value = run.history[-1]
        except (SolverFailure, np.linalg.LinAlgError, ValueError) as e:
            run.error = str(e)
            logger.warning(f"See-saw restart {label} failed: {e}")
        return run

    def _pick_best(self, runs: List[SeesawRun], what: str) -> SeesawRun:
        best = None
        for run in runs:
            if run.error is None and (best is None or run.value > best.value):
                best = run
        if best is None:
            raise SolverFailure(f"All {len(runs)} restarts of {what} failed")
        failed = sum(1 for r in runs if r.error is not None)
        logger.info(f"{what}: best {best.value:.6f} from {best.label} ({len(runs)} restarts, {failed} failed)")
        return best

    def _map(self, fn, jobs, workers: Optional[int]) -> List[SeesawRun]:
        workers = workers or settings.LOCC_BOUNDS_THREADS
        if workers <= 1 or len(jobs) <= 1:
            return [fn(job) for job in jobs]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))

    def run_oneround(self, e: StateEnsemble, m: int, restarts: Optional[int] = None, max_iters: Optional[int] = None, conv_tol: Optional[float] = None, seed: int = 0, direction: Direction = Direction.A_TO_B, workers: Optional[int] = None) -> SeesawReport:
        """One-round see-saw with every restart's history kept"""
        if m < 1:
            raise ValueError(f"m must be >= 1, got {m}")
        restarts = settings.LOCC_BOUNDS_SEESAW_RESTARTS if restarts is None else restarts
        max_iters = max_iters or settings.LOCC_BOUNDS_SEESAW_MAX_ITERS
        conv_tol = settings.LOCC_BOUNDS_SEESAW_CONV_TOL if conv_tol is None else conv_tol
        direction = Direction(direction)
        frame = self._frame(e, direction)

        jobs = self._oneround_seeds(e, m, direction)
        for i, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
            rng = np.random.default_rng(child)
            jobs.append((f"random_{i}", [op.entries for op in self.random_povm(frame.d_A, m, rng)]))
        logger.info(f"One-round see-saw on {e.name}: m={m}, {len(jobs)} starts, direction {direction.value}")

        runs = self._map(lambda job: self._run_oneround(frame, job[0], job[1], max_iters, conv_tol, direction), jobs, workers)
        best = self._pick_best(runs, f"seesaw_oneround[{e.name},m={m}]")
        value = self.strategy_value(e, best.strategy)
        result = BoundResult(value, BoundKind.LOWER, Method.SEESAW_ONEROUND, HierarchyParams(m, 1, direction))
        return SeesawReport(result, best.strategy, runs)

    def seesaw_oneround(self, e: StateEnsemble, m: int, restarts: Optional[int] = None, max_iters: Optional[int] = None, conv_tol: Optional[float] = None, seed: int = 0, direction: Direction = Direction.A_TO_B, workers: Optional[int] = None) -> Tuple[BoundResult, OneRoundStrategy]:
        """
        Lower bound on the one-round LOCC_m success probability

        Returns:
            (BoundResult with kind=lower, best strategy)
        """
        report = self.run_oneround(e, m, restarts, max_iters, conv_tol, seed, direction, workers)
        return report.result, report.strategy

    def best_post(self, e: StateEnsemble, alice: Sequence[np.ndarray], bob: Sequence[np.ndarray]) -> np.ndarray:
        """Deterministic argmax_λ p_λ Tr[(A^a ⊗ B^b) ρ_λ]; ties go to the lowest λ"""
        weighted = e.weighted_states()
        post = np.zeros((len(alice), len(bob), e.n))
        for a, a_op in enumerate(alice):
            for b, b_op in enumerate(bob):
                lift = np.kron(a_op, b_op)
                scores = [np.real(np.trace(lift @ w)) for w in weighted]
                post[a, b, int(np.argmax(scores))] = 1.0
        return post

    def _na_value(self, e, alice, bob, post) -> float:
        total = 0.0
        weighted = e.weighted_states()
        for a, a_op in enumerate(alice):
            for b, b_op in enumerate(bob):
                lift = np.kron(a_op, b_op)
                total += sum(post[a, b, lam] * np.real(np.trace(lift @ weighted[lam])) for lam in range(e.n))
        return float(total)

    def _run_nonadaptive(self, e, label, alice, bob, max_iters, conv_tol) -> SeesawRun:
        run = SeesawRun(label)
        try:
            for _ in range(max_iters):
                post = self.best_post(e, alice, bob)
                parts = [self._alice_weights(e, b_op) for b_op in bob]
                alice_w = [
                    sum(post[a, b, lam] * parts[b][lam] for b in range(len(bob)) for lam in range(e.n))
                    for a in range(len(alice))
                ]
                alice, _ = self._solve_povm(alice_w, "alice")
                parts = [self._bob_weights(e, a_op) for a_op in alice]
                bob_w = [
                    sum(post[a, b, lam] * parts[a][lam] for a in range(len(alice)) for lam in range(e.n))
                    for b in range(len(bob))
                ]
                bob, _ = self._solve_povm(bob_w, "bob")
                run.history.append(self._na_value(e, alice, bob, post))
                if len(run.history) > 1 and run.history[-1] - run.history[-2] < conv_tol:
                    break
            post = self.best_post(e, alice, bob)
            run.strategy = NonAdaptiveStrategy(_ops(alice, e.d_A), _ops(bob, e.d_B), post)
            run.value = self._na_value(e, alice, bob, post)
        except (SolverFailure, np.linalg.LinAlgError, ValueError) as err:
            run.error = str(err)
            logger.warning(f"Non-adaptive restart {label} failed: {err}")
        return run

    def run_nonadaptive(self, e: StateEnsemble, m: int, m_B: Optional[int] = None, restarts: Optional[int] = None, max_iters: Optional[int] = None, conv_tol: Optional[float] = None, seed: int = 0, workers: Optional[int] = None) -> SeesawReport:
        """Non-adaptive see-saw with every restart's history kept"""
        m_B = m_B or e.d_B * e.d_B
        if m < 1 or m_B < 1:
            raise ValueError(f"m and m_B must be >= 1, got m={m}, m_B={m_B}")
        restarts = settings.LOCC_BOUNDS_SEESAW_RESTARTS if restarts is None else restarts
        max_iters = max_iters or settings.LOCC_BOUNDS_SEESAW_MAX_ITERS
        conv_tol = settings.LOCC_BOUNDS_SEESAW_CONV_TOL if conv_tol is None else conv_tol

        jobs = []
        first, second = _pad(basis_projectors(e.d_A), m), _pad(basis_projectors(e.d_B), m_B)
        if first is not None and second is not None:
            jobs.append(("computational", first, second))
        tau = _family_tau(e)
        if tau is not None and m >= 2 and m_B >= 2:
            analytic = certify.analytic_strategy_AtoB(tau)
            jobs.append((
                "analytic_ab",
                _pad([op.entries for op in analytic.alice], m),
                _pad([op.entries for op in analytic.bob], m_B),
            ))
        for i, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
            rng = np.random.default_rng(child)
            alice = [op.entries for op in self.random_povm(e.d_A, m, rng)]
            bob = [op.entries for op in self.random_povm(e.d_B, m_B, rng)]
            jobs.append((f"random_{i}", alice, bob))
        logger.info(f"Non-adaptive see-saw on {e.name}: m={m}, m_B={m_B}, {len(jobs)} starts")

        runs = self._map(lambda job: self._run_nonadaptive(e, job[0], job[1], job[2], max_iters, conv_tol), jobs, workers)
        best = self._pick_best(runs, f"seesaw_nonadaptive[{e.name},m={m},m_B={m_B}]")
        value = self.strategy_value(e, best.strategy)
        result = BoundResult(value, BoundKind.LOWER, Method.SEESAW_NONADAPTIVE, HierarchyParams(m, 1, Direction.A_TO_B))
        return SeesawReport(result, best.strategy, runs)

    def seesaw_nonadaptive(self, e: StateEnsemble, m: int, m_B: Optional[int] = None, restarts: Optional[int] = None, max_iters: Optional[int] = None, conv_tol: Optional[float] = None, seed: int = 0, workers: Optional[int] = None) -> Tuple[BoundResult, NonAdaptiveStrategy]:
        """
        Lower bound on the non-adaptive LOCC_m success probability

        Args:
            m_B: Bob's outcome count (defaults to d_B^2)

        Returns:
            (BoundResult with kind=lower, best strategy)
        """
        report = self.run_nonadaptive(e, m, m_B, restarts, max_iters, conv_tol, seed, workers)
        return report.result, report.strategy


# Global see-saw service instance
seesaw_service = SeesawService()
