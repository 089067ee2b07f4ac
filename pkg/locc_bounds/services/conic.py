"""Conic solver service backed by cvxpy"""

import json
import time
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional, Union

import cvxpy as cp
import numpy as np
import scipy.sparse as sp
from loguru import logger

from locc_bounds.config import settings
from locc_bounds.models.operators import HermitianOp
from locc_bounds.models.program import ConicProgram, SolveReport, SolveStatus
from locc_bounds.services import superops


@lru_cache(maxsize=64)
def embedding_reader(n: int) -> sp.csr_matrix:
    """
    Map vec_F(Z) of a real 2n x 2n PSD variable to the Hermitian coordinates
    of X = (Z11 + Z22)/2 + i (Z21 - Z21^T)/2

    X is PSD whenever Z is, and every PSD X arises this way.
    """
    size = 2 * n

    def pos(r, c):
        return c * size + r

    ri, rj = np.triu_indices(n)
    ii, ij = np.triu_indices(n, 1)
    n_re = len(ri)
    re_rows = np.arange(n_re)
    im_rows = n_re + np.arange(len(ii))
    rows = np.concatenate([re_rows, re_rows, im_rows, im_rows])
    cols = np.concatenate([pos(ri, rj), pos(n + ri, n + rj), pos(n + ii, ij), pos(n + ij, ii)])
    data = np.concatenate([
        np.full(n_re, 0.5), np.full(n_re, 0.5), np.full(len(ii), 0.5), np.full(len(ii), -0.5)
    ])
    return sp.csr_matrix((data, (rows, cols)), shape=(n * n, size * size))


class ConicSolver:
    """Solves ConicPrograms through the real PSD embedding"""

    def __init__(self, solver: Optional[str] = None, fallback: Optional[str] = None):
        self.solver = solver or settings.LOCC_BOUNDS_SOLVER
        self.fallback = fallback or settings.LOCC_BOUNDS_FALLBACK_SOLVER

    def _options(self, solver: str, eps: float) -> Dict[str, float]:
        if solver == "CLARABEL":
            return {"tol_gap_abs": eps / 10, "tol_gap_rel": eps / 10, "tol_feas": eps / 10, "max_iter": 500}
        if solver == "SCS":
            return {"eps_abs": eps / 10, "eps_rel": eps / 10, "max_iters": 200_000}
        if solver == "MOSEK":
            return {"mosek_params": {"MSK_DPAR_INTPNT_CO_TOL_REL_GAP": eps / 10}}
        return {}

    def solve(self, program: ConicProgram, eps: Optional[float] = None) -> SolveReport:
        """
        Solve a conic program

        Args:
            program: The program (maximisation)
            eps: Target duality gap (defaults to settings)

        Returns:
            SolveReport; infeasibility and solver trouble are statuses

        Raises:
            ValueError: If the program has no blocks
        """
        eps = eps if eps is not None else settings.LOCC_BOUNDS_EPS
        if not program.blocks:
            raise ValueError("Cannot solve an empty program")

        started = time.perf_counter()
        a, b, c = program.assemble()
        logger.debug(
            f"Solving {program.name}: {len(program.blocks)} blocks, {program.num_coordinates} coordinates, "
            f"{a.shape[0]} equalities after dedup"
        )

        variables = {}
        pieces = []
        for label, spec in program.blocks.items():
            n = spec.dim
            z = cp.Variable((2 * n, 2 * n), PSD=True)
            variables[label] = z
            pieces.append(embedding_reader(n) @ cp.reshape(z, (4 * n * n,), order="F"))
        coords = cp.hstack(pieces) if len(pieces) > 1 else pieces[0]

        constraints = [a @ coords == b] if a.shape[0] else []
        problem = cp.Problem(cp.Minimize(-(c @ coords)), constraints)

        used = self._run(problem, program.name, [self.solver, self.fallback], eps)
        elapsed = time.perf_counter() - started
        if used is None:
            return SolveReport(SolveStatus.NUMERICAL_TROUBLE, float("nan"), float("nan"), float("inf"),
                               solver=self.fallback, wall_time_s=elapsed)
        if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            logger.info(f"{program.name} is infeasible ({used}, {elapsed:.2f}s)")
            return SolveReport(SolveStatus.INFEASIBLE, float("nan"), float("nan"), float("inf"),
                               solver=used, wall_time_s=elapsed)

        measured = self._measure(problem, program, variables, constraints, coords, a, b, c)
        if measured is None:
            logger.warning(f"{program.name}: solver status {problem.status}")
            return SolveReport(SolveStatus.NUMERICAL_TROUBLE, float("nan"), float("nan"), float("inf"),
                               solver=used, wall_time_s=elapsed)

        inaccurate = problem.status == cp.OPTIMAL_INACCURATE
        if inaccurate and measured[3] > eps:
            # tighter pass with the same solver, then the fallback only if still past 10 eps
            for retry_solver, retry_eps in ((used, eps / 100), (self.fallback, eps)):
                if retry_solver != used and measured[3] <= 10 * eps:
                    break
                logger.warning(
                    f"{program.name}: inaccurate solve with gap {measured[3]:.2e}; "
                    f"retrying {retry_solver} at tolerance {retry_eps / 10:.0e}"
                )
                if self._run(problem, program.name, [retry_solver], retry_eps) is None:
                    continue
                retried = self._measure(problem, program, variables, constraints, coords, a, b, c)
                if retried is not None and retried[3] < measured[3]:
                    measured, used = retried, retry_solver
                    inaccurate = problem.status == cp.OPTIMAL_INACCURATE
                if measured[3] <= eps:
                    break
        values, primal, dual, gap = measured
        elapsed = time.perf_counter() - started

        status = SolveStatus.OPTIMAL
        if inaccurate and gap > 10 * eps:
            status = SolveStatus.NUMERICAL_TROUBLE
        elif gap > eps:
            logger.warning(f"{program.name}: duality gap {gap:.2e} above target {eps:.0e}")

        blocks = {}
        for label, spec in program.blocks.items():
            x = superops.from_coordinates(program.block_coordinates(label, values), spec.dim)
            blocks[label] = HermitianOp.from_array(x, spec.shape.dims, hermitize=True)

        logger.info(f"{program.name}: {status.value} value={primal:.8f} gap={gap:.1e} ({used}, {elapsed:.2f}s)")
        return SolveReport(status, primal, dual, gap, blocks, solver=used, wall_time_s=elapsed)

    def _run(self, problem: cp.Problem, name: str, solvers, eps: float) -> Optional[str]:
        """Try each solver in turn; the name of the one that returned, or None"""
        for solver in solvers:
            try:
                problem.solve(solver=solver, **self._options(solver, eps))
                return solver
            except (cp.error.SolverError, ValueError) as e:
                logger.warning(f"{solver} failed on {name} ({e})")
        logger.error(f"No solver finished {name}")
        return None

    def _measure(self, problem, program, variables, constraints, coords, a, b, c):
        """(coordinates, primal, dual, gap) of the current solve, or None without a usable point"""
        if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or coords.value is None:
            return None
        values = np.asarray(coords.value).reshape(-1)
        primal = float(c @ values)
        dual = self._dual_value(program, variables, constraints[0], a, b, c) if constraints else primal
        return values, primal, dual, abs(primal - dual)

    def _dual_value(self, program, variables, constraint, a, b, c) -> float:
        """
        b . y for the equality multipliers, with the sign fixed by dual
        feasibility: the slack of each block must be PSD
        """
        y = np.asarray(constraint.dual_value, dtype=float).reshape(-1)
        best_sign, best_eig = 1.0, -np.inf
        for sign in (1.0, -1.0):
            residual = a.T @ (sign * y) - c
            worst = np.inf
            for label, spec in program.blocks.items():
                n = spec.dim
                part = residual[spec.offset:spec.offset + spec.size]
                slack = (embedding_reader(n).T @ part).reshape(2 * n, 2 * n, order="F")
                worst = min(worst, float(np.linalg.eigvalsh((slack + slack.T) / 2)[0]))
            if worst > best_eig:
                best_sign, best_eig = sign, worst
        return float(b @ (best_sign * y))

    def dump_program(self, program: ConicProgram, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(program.to_dict()))
        logger.info(f"Wrote program {program.name} to {path}")


# Global solver instance
conic_solver = ConicSolver()
