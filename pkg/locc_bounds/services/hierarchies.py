"""Upper-bound SDPs: global, PPT, one-round and non-adaptive hierarchies"""

import itertools
from collections import Counter
from functools import lru_cache
from math import factorial, prod
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from locc_bounds.config import settings
from locc_bounds.models.bounds import BoundKind, BoundResult, Direction, HierarchyParams, Method
from locc_bounds.models.certificate import CertificateArray1R, CertificateArrayNA
from locc_bounds.models.ensemble import StateEnsemble
from locc_bounds.models.operators import HermitianOp, Permutation
from locc_bounds.models.program import ConicProgram, PartialTransposeImage, SolveReport, SolveStatus
from locc_bounds.services import superops
from locc_bounds.services.conic import conic_solver
from locc_bounds.services.ensembles import ensemble_service
from locc_bounds.services.linalg import permutation_matrix, ptrace_array, swap_array

Index = Tuple[int, ...]


class SizeCapExceeded(RuntimeError):
    """A hierarchy program would exceed the configured size cap"""

    def __init__(self, estimate: int, cap: int, what: str):
        self.estimate = estimate
        self.cap = cap
        super().__init__(
            f"{what} needs {estimate:,} real PSD entries, above the size cap of {cap:,}"
        )


def orbit_representatives(m: int, k: int) -> List[Tuple[Index, int]]:
    """
    Non-decreasing tuples in {1..m}^k with the sizes of their S_k orbits

    Returns:
        List of (representative, orbit size); the sizes sum to m^k
    """
    if m < 1 or k < 0:
        raise ValueError(f"orbit_representatives needs m >= 1 and k >= 0, got m={m}, k={k}")
    out = []
    for rep in itertools.combinations_with_replacement(range(1, m + 1), k):
        size = factorial(k)
        for count in Counter(rep).values():
            size //= factorial(count)
        out.append((rep, size))
    return out


def canonical_form(t: Sequence[int]) -> Tuple[Index, Permutation]:
    """
    Representative of a tuple and σ with σ(rep) = t, so that
    R^t = U^σ R^rep U^σ†
    """
    order = np.argsort(np.asarray(t), kind="stable")
    rep = tuple(int(t[i]) for i in order)
    return rep, Permutation.from_zero_based(order)


def saturation_cutoff(d_A: int) -> int:
    """Extremal POVMs on C^d have at most d^2 non-zero effects"""
    if d_A < 1:
        raise ValueError(f"d_A must be >= 1, got {d_A}")
    return d_A * d_A


def ppt_subsets(rep: Index, all_subsets: bool = True) -> List[Tuple[int, ...]]:
    """
    1-based copy subsets whose partial transposes are constrained

    For a representative block every subset of copies is equivalent, under
    its stabiliser, to one choosing the leading positions of each value run;
    one subset per distinct sub-multiset of values is enough.
    """
    k = len(rep)
    if not all_subsets:
        return [tuple(range(1, ell + 1)) for ell in range(1, k + 1)]
    runs: Dict[int, List[int]] = {}
    for pos, value in enumerate(rep, start=1):
        runs.setdefault(value, []).append(pos)
    groups = list(runs.values())
    subsets = []
    for counts in itertools.product(*[range(len(g) + 1) for g in groups]):
        if sum(counts) == 0:
            continue
        subsets.append(tuple(sorted(p for g, c in zip(groups, counts) for p in g[:c])))
    return sorted(subsets, key=lambda s: (len(s), s))


@lru_cache(maxsize=128)
def _copy_unitary(k: int, d_A: int, d_B: int, images: Tuple[int, ...]) -> np.ndarray:
    """U^σ on the A copies, identity on B"""
    return np.kron(permutation_matrix(k, d_A, Permutation(images)), np.eye(d_B))


class HierarchyProgram(ConicProgram):
    """A ConicProgram that knows how to turn its solution into M^λ"""

    def __init__(self, name: str, variant: Method, frame: StateEnsemble, params: Optional[HierarchyParams]):
        super().__init__(name)
        self.variant = variant
        self.frame = frame
        self.params = params
        self.index: Dict[tuple, str] = {}

    @property
    def swapped(self) -> bool:
        return self.params is not None and self.params.direction == Direction.B_TO_A

    def _to_original(self, arr: np.ndarray, original_order: bool = True) -> HermitianOp:
        d_A, d_B = self.frame.d_A, self.frame.d_B
        if self.swapped and original_order:
            return HermitianOp.from_array(swap_array(arr, d_A, d_B), (d_B, d_A), hermitize=True)
        return HermitianOp.from_array(arr, (d_A, d_B), hermitize=True)

    def measurement(self, report: SolveReport, original_order: bool = True) -> List[HermitianOp]:
        """
        Assemble the measurement operators M^λ from a solution, in the
        original party order unless `original_order` is False
        """
        if not report.block_values:
            raise ValueError(f"Solve of {self.name} returned no blocks ({report.status.value})")
        blocks = report.block_values
        e = self.frame
        if self.variant in (Method.GLOBAL, Method.PPT):
            return [self._to_original(blocks[self.index[(lam,)]].entries, original_order) for lam in range(1, e.n + 1)]

        m, k = self.params.m, self.params.k
        d_A, d_B = e.d_A, e.d_B
        dims = (d_A,) * k + (d_B,)
        outs = [np.zeros((e.dim, e.dim), dtype=complex) for _ in range(e.n)]
        for t in itertools.product(range(1, m + 1), repeat=k):
            rep, sigma = canonical_form(t)
            u = _copy_unitary(k, d_A, d_B, sigma.images)
            if self.variant == Method.ONEROUND:
                for lam in range(1, e.n + 1):
                    x = blocks[self.index[(rep, lam, t[-1])]].entries
                    outs[lam - 1] += ptrace_array(u @ x @ u.conj().T, dims, range(k - 1))
            else:
                for bvec in itertools.product(range(1, e.n + 1), repeat=m):
                    lam = bvec[t[-1] - 1]
                    x = blocks[self.index[(rep, bvec)]].entries
                    outs[lam - 1] += ptrace_array(u @ x @ u.conj().T, dims, range(k - 1))
        scale = d_A ** (k - 1)
        return [self._to_original(o / scale, original_order) for o in outs]

    def certificate(self, report: SolveReport):
        """Representative certificate array in the builder's party order"""
        e = self.frame
        if self.variant == Method.ONEROUND:
            entries = {key: report.block_values[label] for key, label in self.index.items()}
            return CertificateArray1R(self.params.m, self.params.k, e.n, e.d_A, e.d_B, entries)
        if self.variant == Method.NONADAPTIVE:
            entries = {key: report.block_values[label] for key, label in self.index.items()}
            return CertificateArrayNA(self.params.m, self.params.k, e.n, e.d_A, e.d_B, entries)
        raise ValueError(f"{self.variant.value} programs carry no hierarchy certificate")


class HierarchyService:
    """Builds and solves the upper-bound programs"""

    def __init__(self, size_cap: Optional[int] = None, all_subsets: Optional[bool] = None):
        self.size_cap = size_cap if size_cap is not None else settings.LOCC_BOUNDS_SIZE_CAP
        self.all_subsets = all_subsets if all_subsets is not None else settings.LOCC_BOUNDS_PPT_ALL_SUBSETS

    def discrimination_program(self, operators: Sequence[np.ndarray], dims: Sequence[int], name: str = "discrimination", program_cls=ConicProgram, **kwargs) -> ConicProgram:
        """
        max Σ_i Tr(K_i X_i) over POVMs {X_i}

        Args:
            operators: The weights K_i (Hermitian)
            dims: Tensor shape of the measured space
        """
        dim = prod(dims)
        program = program_cls(name, **kwargs)
        labels = []
        for i, k_op in enumerate(operators, start=1):
            label = program.add_psd_block(f"M[{i}]", dim, dims)
            labels.append(label)
            program.add_objective({label: superops.trace_functional(k_op)})
        program.add_equality(
            {label: superops.identity_map(dim) for label in labels},
            superops.to_coordinates(np.eye(dim)),
            family="completeness",
        )
        return program

    def build_global_sdp(self, e: StateEnsemble) -> HierarchyProgram:
        program = self.discrimination_program(
            e.weighted_states(), (e.d_A, e.d_B), name=f"global[{e.name}]",
            program_cls=HierarchyProgram, variant=Method.GLOBAL, frame=e, params=None,
        )
        program.index = {(lam,): f"M[{lam}]" for lam in range(1, e.n + 1)}
        return program

    def build_ppt_sdp(self, e: StateEnsemble) -> HierarchyProgram:
        program = self.build_global_sdp(e)
        program.name = f"ppt[{e.name}]"
        program.variant = Method.PPT
        for lam in range(1, e.n + 1):
            program.add_psd_image(f"M[{lam}]", PartialTransposeImage((1,)))
        return program

    def _frame(self, e: StateEnsemble, p: HierarchyParams) -> StateEnsemble:
        return ensemble_service.swap_parties(e) if p.direction == Direction.B_TO_A else e

    def _check_size(self, what: str, block_dim: int, counts: Sequence[int]) -> int:
        estimate = sum(counts) * (2 * block_dim) ** 2
        if estimate > self.size_cap:
            logger.warning(f"Refusing {what}: {estimate:,} real PSD entries > cap {self.size_cap:,}")
            raise SizeCapExceeded(estimate, self.size_cap, what)
        return estimate

    def _shared_maps(self, k: int, d_A: int, d_B: int):
        """Coordinate maps used by every representative"""
        dims = (d_A,) * k + (d_B,)
        n_dim = prod(dims)
        rest_dim = n_dim // d_A
        # X - 1_A/d_A ⊗ Tr_{A_1} X
        marginal_a = superops.identity_map(n_dim) - superops.kron_left_map(
            np.eye(d_A) / d_A, rest_dim
        ) @ superops.partial_trace_map(dims, (0,))
        trace_b = superops.partial_trace_map(dims, (k,))
        return dims, n_dim, marginal_a, trace_b

    def _stabiliser_swaps(self, rep: Index) -> List[Tuple[int, ...]]:
        swaps = []
        k = len(rep)
        for i in range(k - 1):
            if rep[i] == rep[i + 1]:
                images = list(range(1, k + 1))
                images[i], images[i + 1] = images[i + 1], images[i]
                swaps.append(tuple(images))
        return swaps

    def build_1r_sdp(self, e: StateEnsemble, p: HierarchyParams) -> HierarchyProgram:
        """
        One-round LOCC_m hierarchy at level k

        Blocks R^{a λ b} exist only for non-decreasing a; permuted tuples are
        reached by conjugation with U^σ and each block commutes with its
        stabiliser.

        Raises:
            SizeCapExceeded: If the program would exceed the size cap
        """
        frame = self._frame(e, p)
        m, k, n = p.m, p.k, frame.n
        d_A, d_B = frame.d_A, frame.d_B
        reps = orbit_representatives(m, k)
        subsets = {rep: ppt_subsets(rep, self.all_subsets) for rep, _ in reps}
        dims, n_dim, marginal_a, trace_b = self._shared_maps(k, d_A, d_B)
        what = f"1R hierarchy (m={m}, k={k}) on {e.name}"
        estimate = self._check_size(what, n_dim, [n * m * (1 + len(subsets[rep])) for rep, _ in reps])

        program = HierarchyProgram(f"oneround[{e.name},m={m},k={k},{p.direction.value}]", Method.ONEROUND, frame, p)

        def label(rep, lam, b):
            return f"R[{','.join(map(str, rep))}|{lam}|{b}]"

        for rep, _ in reps:
            for lam in range(1, n + 1):
                for b in range(1, m + 1):
                    name = program.add_psd_block(label(rep, lam, b), n_dim, dims)
                    program.index[(rep, lam, b)] = name
                    for subset in subsets[rep]:
                        program.add_psd_image(name, PartialTransposeImage(subset))

        identity = superops.identity_map(n_dim)
        conj_cache: Dict[Tuple[int, ...], object] = {}

        def conj(images):
            if images not in conj_cache:
                conj_cache[images] = superops.conjugation_map(_copy_unitary(k, d_A, d_B, images))
            return conj_cache[images]

        marginal_cache: Dict[Tuple[int, ...], object] = {}

        def marginal_term(images):
            if images not in marginal_cache:
                marginal_cache[images] = superops.coordinate_map(marginal_a @ conj(images), n_dim, n_dim)
            return marginal_cache[images]

        zeros = np.zeros(n_dim * n_dim)

        # Σ_{a_1} R^{a_1 rest λ b} = 1_A/d_A ⊗ Σ_{a_1} Tr_{A_1} R^{a_1 rest λ b}
        for rest, _ in orbit_representatives(m, k - 1):
            for lam in range(1, n + 1):
                for b in range(1, m + 1):
                    terms: Dict[str, object] = {}
                    for a1 in range(1, m + 1):
                        rep, sigma = canonical_form((a1,) + rest)
                        key = program.index[(rep, lam, b)]
                        term = marginal_term(sigma.images)
                        terms[key] = terms[key] + term if key in terms else term
                    program.add_equality(terms, zeros, family="marginal_A")

        # Σ_λ R^{a λ b0} = Σ_λ Σ_b' Tr_B(R^{a λ b'}) ⊗ 1_B/(m d_B), and the
        # left side does not depend on b
        fill_b = superops.coordinate_map(
            superops.kron_right_map(np.eye(d_B) / (m * d_B), n_dim // d_B) @ trace_b, n_dim, n_dim
        )
        for rep, _ in reps:
            terms = {}
            for lam in range(1, n + 1):
                for b in range(1, m + 1):
                    key = program.index[(rep, lam, b)]
                    terms[key] = (identity - fill_b) if b == 1 else -fill_b
            program.add_equality(terms, zeros, family="marginal_B")
            for b in range(2, m + 1):
                terms = {}
                for lam in range(1, n + 1):
                    terms[program.index[(rep, lam, b)]] = identity
                    terms[program.index[(rep, lam, 1)]] = -identity
                program.add_equality(terms, zeros, family="marginal_B")

        # Each representative commutes with its stabiliser
        for rep, _ in reps:
            for images in self._stabiliser_swaps(rep):
                swap_term = superops.coordinate_map(conj(images), n_dim, n_dim) - identity
                for lam in range(1, n + 1):
                    for b in range(1, m + 1):
                        program.add_equality({program.index[(rep, lam, b)]: swap_term}, zeros, family="symmetry")

        # Σ_{a, λ} Tr R^{a λ b} = d_A^k d_B
        trace_row = superops.trace_functional(np.eye(n_dim))
        for b in range(1, m + 1):
            terms = {}
            for rep, size in reps:
                for lam in range(1, n + 1):
                    terms[program.index[(rep, lam, b)]] = size * trace_row
            program.add_equality(terms, float(n_dim), family="normalization")

        self._add_objective(program, frame, m, k, lambda rep, t, lam: [(rep, lam, t[-1])])
        logger.info(
            f"Built {program.name}: {len(program.blocks)} blocks of dim {n_dim}, "
            f"{program.num_equalities} equality rows, size {estimate:,}"
        )
        return program

    def build_na_sdp(self, e: StateEnsemble, p: HierarchyParams) -> HierarchyProgram:
        """
        Non-adaptive LOCC_m hierarchy at level k

        Blocks R^{a b⃗} for representative a and every b⃗ in {1..n}^m.

        Raises:
            SizeCapExceeded: If the program would exceed the size cap
        """
        frame = self._frame(e, p)
        m, k, n = p.m, p.k, frame.n
        d_A, d_B = frame.d_A, frame.d_B
        reps = orbit_representatives(m, k)
        bvecs = list(itertools.product(range(1, n + 1), repeat=m))
        subsets = {rep: ppt_subsets(rep, self.all_subsets) for rep, _ in reps}
        dims, n_dim, marginal_a, trace_b = self._shared_maps(k, d_A, d_B)
        what = f"NA hierarchy (m={m}, k={k}) on {e.name}"
        estimate = self._check_size(what, n_dim, [len(bvecs) * (1 + len(subsets[rep])) for rep, _ in reps])

        program = HierarchyProgram(f"nonadaptive[{e.name},m={m},k={k},{p.direction.value}]", Method.NONADAPTIVE, frame, p)
        for rep, _ in reps:
            for bvec in bvecs:
                name = program.add_psd_block(
                    f"R[{','.join(map(str, rep))}|{''.join(map(str, bvec))}]", n_dim, dims
                )
                program.index[(rep, bvec)] = name
                for subset in subsets[rep]:
                    program.add_psd_image(name, PartialTransposeImage(subset))

        identity = superops.identity_map(n_dim)
        zeros = np.zeros(n_dim * n_dim)
        marginal_cache: Dict[Tuple[int, ...], object] = {}

        def marginal_term(images):
            if images not in marginal_cache:
                u = _copy_unitary(k, d_A, d_B, images)
                marginal_cache[images] = superops.coordinate_map(marginal_a @ superops.conjugation_map(u), n_dim, n_dim)
            return marginal_cache[images]

        for rest, _ in orbit_representatives(m, k - 1):
            for bvec in bvecs:
                terms: Dict[str, object] = {}
                for a1 in range(1, m + 1):
                    rep, sigma = canonical_form((a1,) + rest)
                    key = program.index[(rep, bvec)]
                    term = marginal_term(sigma.images)
                    terms[key] = terms[key] + term if key in terms else term
                program.add_equality(terms, zeros, family="marginal_A")

        # Σ_b⃗ R^{a b⃗} = Σ_b⃗ Tr_B(R^{a b⃗}) ⊗ 1_B/d_B
        fill_b = superops.coordinate_map(
            superops.kron_right_map(np.eye(d_B) / d_B, n_dim // d_B) @ trace_b, n_dim, n_dim
        )
        for rep, _ in reps:
            program.add_equality(
                {program.index[(rep, bvec)]: identity - fill_b for bvec in bvecs}, zeros, family="marginal_B"
            )

        for rep, _ in reps:
            for images in self._stabiliser_swaps(rep):
                u = _copy_unitary(k, d_A, d_B, images)
                swap_term = superops.coordinate_map(superops.conjugation_map(u), n_dim, n_dim) - identity
                for bvec in bvecs:
                    program.add_equality({program.index[(rep, bvec)]: swap_term}, zeros, family="symmetry")

        trace_row = superops.trace_functional(np.eye(n_dim))
        program.add_equality(
            {program.index[(rep, bvec)]: size * trace_row for rep, size in reps for bvec in bvecs},
            float(n_dim),
            family="normalization",
        )

        self._add_objective(
            program, frame, m, k,
            lambda rep, t, lam: [(rep, bvec) for bvec in bvecs if bvec[t[-1] - 1] == lam],
        )
        logger.info(
            f"Built {program.name}: {len(program.blocks)} blocks of dim {n_dim}, "
            f"{program.num_equalities} equality rows, size {estimate:,}"
        )
        return program

    def _add_objective(self, program: HierarchyProgram, frame: StateEnsemble, m: int, k: int, keys_for) -> None:
        """Σ_λ p_λ Tr(ρ_λ M^λ) with M^λ = d_A^{1-k} Σ_t Tr_{A_1..A_{k-1}}(R^t ...)"""
        d_A, d_B = frame.d_A, frame.d_B
        pad = np.eye(d_A ** (k - 1))
        scale = d_A ** (k - 1)
        weights: Dict[Tuple[Tuple[int, ...], int], np.ndarray] = {}
        for t in itertools.product(range(1, m + 1), repeat=k):
            rep, sigma = canonical_form(t)
            for lam, (prior, rho) in enumerate(frame.items, start=1):
                cache_key = (sigma.images, lam)
                if cache_key not in weights:
                    u = _copy_unitary(k, d_A, d_B, sigma.images)
                    w = u.conj().T @ np.kron(pad, rho.entries) @ u
                    weights[cache_key] = superops.trace_functional(prior * w / scale)
                row = weights[cache_key]
                for key in keys_for(rep, t, lam):
                    program.add_objective({program.index[key]: row})

    def build(self, e: StateEnsemble, method: Method, params: Optional[HierarchyParams] = None) -> HierarchyProgram:
        if method == Method.GLOBAL:
            return self.build_global_sdp(e)
        if method == Method.PPT:
            return self.build_ppt_sdp(e)
        if params is None:
            raise ValueError(f"{method.value} bounds need HierarchyParams")
        if method == Method.ONEROUND:
            return self.build_1r_sdp(e, params)
        if method == Method.NONADAPTIVE:
            return self.build_na_sdp(e, params)
        raise ValueError(f"{method.value} is not an upper-bound method")

    def solve_bound(self, e: StateEnsemble, method: Method, params: Optional[HierarchyParams] = None, eps: Optional[float] = None) -> Tuple[BoundResult, HierarchyProgram, SolveReport]:
        """Build, solve and wrap an upper bound, keeping the program and report"""
        program = self.build(e, method, params)
        report = conic_solver.solve(program, eps)
        value = report.primal_value if report.status == SolveStatus.OPTIMAL else float("nan")
        result = BoundResult(
            value=value,
            kind=BoundKind.UPPER,
            method=method,
            params=params if method in (Method.ONEROUND, Method.NONADAPTIVE) else None,
            gap=report.gap,
            status=report.status,
            wall_time_s=report.wall_time_s,
        )
        return result, program, report

    def upper_bound(self, e: StateEnsemble, method: Method, params: Optional[HierarchyParams] = None, eps: Optional[float] = None) -> BoundResult:
        """
        Solve one of the upper-bound programs

        Args:
            e: The ensemble
            method: GLOBAL, PPT, ONEROUND or NONADAPTIVE
            params: m, k and direction for the hierarchies
            eps: Target gap

        Returns:
            BoundResult with kind=upper
        """
        result, _, _ = self.solve_bound(e, method, params, eps)
        return result


# Global hierarchy service instance
hierarchy_service = HierarchyService()
