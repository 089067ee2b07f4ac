"""Certificate checks, forward constructions and analytic Bell-basis strategies"""

import itertools
import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from locc_bounds.models.bounds import Direction
from locc_bounds.models.certificate import CertificateArray1R, CertificateArrayNA, CertificateSchemaError
from locc_bounds.models.ensemble import StateEnsemble
from locc_bounds.models.operators import HermitianOp, Permutation
from locc_bounds.models.strategy import NonAdaptiveStrategy, OneRoundStrategy
from locc_bounds.schemas.certificate import CertificateEntry, CertificateFile, ResidualReport
from locc_bounds.schemas.ensemble import decode_matrix, encode_matrix
from locc_bounds.services.ensembles import ensemble_service
from locc_bounds.services.hierarchies import _copy_unitary, canonical_form
from locc_bounds.services.linalg import (
    hermitize,
    min_eigenvalue,
    operator_norm,
    ptrace_array,
    ptranspose_array,
    sign_projectors,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

Claimed = Optional[Sequence[Union[HermitianOp, np.ndarray]]]


# ---- closed forms -----------------------------------------------------------

def analytic_p_succ_AtoB(tau: float) -> float:
    return float((np.sqrt(2) * np.cos(tau) + 2) / 4)


def analytic_p_succ_BtoA(tau: float) -> float:
    return float((1 + np.cos(tau)) / 2)


def observable_AtoB_first() -> np.ndarray:
    """(σ_x + σ_y)/√2"""
    return (SIGMA_X + SIGMA_Y) / np.sqrt(2)


def observable_AtoB_second(tau: float) -> np.ndarray:
    """
    Bob's fixed observable; its eigenbasis separates ψ_2 from ψ_3 and ψ_1
    from ψ_4 after either outcome of Alice
    """
    s, c = np.sin(tau), np.cos(tau)
    norm = np.sqrt(2) * c + 2
    bloch = np.array([(2 * c + np.sqrt(2)) * s, np.sqrt(2) * s, (2 * c + np.sqrt(2)) * c]) / norm
    return bloch[0] * SIGMA_X + bloch[1] * SIGMA_Y + bloch[2] * SIGMA_Z


def observable_BtoA_first(tau: float) -> np.ndarray:
    """sin τ σ_x + cos τ σ_z"""
    return np.sin(tau) * SIGMA_X + np.cos(tau) * SIGMA_Z


def _reference_family(tau: float) -> StateEnsemble:
    return ensemble_service.bell_basis_family(np.pi / 4, tau, np.pi / 2)


def _likeliest(frame: StateEnsemble, lift: np.ndarray, candidates: Sequence[int]) -> int:
    """0-based λ among candidates maximising p_λ Tr(lift ρ_λ); ties to the lowest"""
    weighted = frame.weighted_states()
    scores = [np.real(np.trace(lift @ weighted[lam])) for lam in candidates]
    return candidates[int(np.argmax(scores))]


def analytic_strategy_AtoB(tau: float) -> NonAdaptiveStrategy:
    """
    Alice measures (σ_x+σ_y)/√2 and Bob a fixed observable

    Alice's + outcome leaves {ψ_2, ψ_3}, her - outcome {ψ_1, ψ_4}; Bob's
    outcome picks the member of the pair.
    """
    e = _reference_family(tau)
    alice = sign_projectors(observable_AtoB_first())
    bob = sign_projectors(observable_AtoB_second(tau))
    pairs = {0: (1, 2), 1: (0, 3)}
    post = np.zeros((2, 2, 4))
    for a, a_op in enumerate(alice):
        for b, b_op in enumerate(bob):
            post[a, b, _likeliest(e, np.kron(a_op, b_op), pairs[a])] = 1.0
    return NonAdaptiveStrategy(
        tuple(HermitianOp.from_array(x, (2,), hermitize=True) for x in alice),
        tuple(HermitianOp.from_array(x, (2,), hermitize=True) for x in bob),
        post,
    )


def analytic_strategy_BtoA(tau: float) -> OneRoundStrategy:
    """
    Bob measures sin τ σ_x + cos τ σ_z and tells Alice the outcome

    Bob's + outcome leaves {ψ_3, ψ_4}, resolved by Alice measuring σ_y; his
    - outcome leaves {ψ_1, ψ_2}, resolved by σ_x.
    """
    frame = ensemble_service.swap_parties(_reference_family(tau))
    first = sign_projectors(observable_BtoA_first(tau))
    branches = [((2, 3), SIGMA_Y), ((0, 1), SIGMA_X)]
    second = []
    for f_op, (pair, observable) in zip(first, branches):
        effects = [np.zeros((2, 2), dtype=complex) for _ in range(4)]
        for proj in sign_projectors(observable):
            effects[_likeliest(frame, np.kron(f_op, proj), pair)] += proj
        second.append(tuple(HermitianOp.from_array(x, (2,), hermitize=True) for x in effects))
    return OneRoundStrategy(
        tuple(HermitianOp.from_array(x, (2,), hermitize=True) for x in first),
        tuple(second),
        Direction.B_TO_A,
    )


def conditional_states(e: StateEnsemble, effect: np.ndarray, party: str = "A") -> List[Optional[np.ndarray]]:
    """
    Normalised states left with the other party after `party` obtains the
    outcome `effect`; None where the outcome is impossible
    """
    dims = (e.d_A, e.d_B)
    if party == "A":
        lift, traced = np.kron(effect, np.eye(e.d_B)), [0]
    elif party == "B":
        lift, traced = np.kron(np.eye(e.d_A), effect), [1]
    else:
        raise ValueError(f"Unknown party {party!r}")
    out = []
    for rho in e.states:
        sigma = hermitize(ptrace_array(lift @ rho.entries, dims, traced))
        prob = float(np.real(np.trace(sigma)))
        out.append(sigma / prob if prob > 1e-14 else None)
    return out


# ---- forward constructions --------------------------------------------------

def _kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def certificate_from_oneround(s: OneRoundStrategy, k: int) -> CertificateArray1R:
    """R^{a λ b} = A^{a_1} ⊗ .. ⊗ A^{a_k} ⊗ B^{λ|b}, representatives only"""
    d_first, d_second = s.alice[0].dim, s.bob[0][0].dim
    dims = (d_first,) * k + (d_second,)
    entries = {}
    for rep in itertools.combinations_with_replacement(range(1, s.m + 1), k):
        left = _kron_all([s.alice[a - 1].entries for a in rep])
        for lam in range(1, s.n + 1):
            for b in range(1, s.m + 1):
                op = np.kron(left, s.bob[b - 1][lam - 1].entries)
                entries[(rep, lam, b)] = HermitianOp.from_array(op, dims, hermitize=True)
    return CertificateArray1R(s.m, k, s.n, d_first, d_second, entries)


def parent_povm(s: NonAdaptiveStrategy) -> Dict[Tuple[int, ...], np.ndarray]:
    """S^{b⃗} = Σ_b Π_a p(b⃗_a | a, b) B^b, so that Σ_{b⃗: b⃗_a = λ} S^{b⃗} = Σ_b p(λ|a,b) B^b"""
    out = {}
    for bvec in itertools.product(range(1, s.n + 1), repeat=s.m):
        acc = np.zeros((s.bob[0].dim, s.bob[0].dim), dtype=complex)
        for b, b_op in enumerate(s.bob):
            weight = float(np.prod([s.post[a, b, bvec[a] - 1] for a in range(s.m)]))
            if weight:
                acc += weight * b_op.entries
        out[bvec] = acc
    return out


def certificate_from_nonadaptive(s: NonAdaptiveStrategy, k: int) -> CertificateArrayNA:
    """R^{a b⃗} = A^{a_1} ⊗ .. ⊗ A^{a_k} ⊗ S^{b⃗}, representatives only"""
    d_A, d_B = s.alice[0].dim, s.bob[0].dim
    dims = (d_A,) * k + (d_B,)
    parents = parent_povm(s)
    entries = {}
    for rep in itertools.combinations_with_replacement(range(1, s.m + 1), k):
        left = _kron_all([s.alice[a - 1].entries for a in rep])
        for bvec, parent in parents.items():
            entries[(rep, bvec)] = HermitianOp.from_array(np.kron(left, parent), dims, hermitize=True)
    return CertificateArrayNA(s.m, k, s.n, d_A, d_B, entries)


def contract_na_certificate(c: CertificateArrayNA) -> CertificateArray1R:
    """R^{a λ b} = Σ_{b⃗: b⃗_b = λ} R^{a b⃗}"""
    sums: Dict[tuple, np.ndarray] = {}
    for (a, bvec), op in c.entries.items():
        for b in range(1, c.m + 1):
            key = (tuple(a), bvec[b - 1], b)
            sums[key] = sums.get(key, 0) + op.entries
    dims = c.dims
    entries = {}
    for a in {tuple(a) for a, _ in c.entries}:
        for lam in range(1, c.n + 1):
            for b in range(1, c.m + 1):
                acc = sums.get((a, lam, b), np.zeros((np.prod(dims), np.prod(dims)), dtype=complex))
                entries[(a, lam, b)] = HermitianOp.from_array(acc, dims, hermitize=True)
    return CertificateArray1R(c.m, c.k, c.n, c.d_A, c.d_B, entries)


# ---- checks -----------------------------------------------------------------

class CertifyService:
    """Feasibility checks of certificate arrays"""

    def _expand(self, entries: Dict, m: int, k: int, d_A: int, d_B: int, tails: Sequence[tuple]) -> Dict[tuple, np.ndarray]:
        """
        Fill in every a ∈ {1..m}^k for each tail index

        Raises:
            CertificateSchemaError: If neither a tuple nor its representative is present
        """
        full = {}
        for t in itertools.product(range(1, m + 1), repeat=k):
            rep, sigma = canonical_form(t)
            u = None
            for tail in tails:
                key = (t,) + tail
                if key in entries:
                    full[key] = entries[key].entries
                    continue
                rep_key = (rep,) + tail
                if rep_key not in entries:
                    raise CertificateSchemaError(f"missing index tuple {key}")
                if u is None:
                    u = _copy_unitary(k, d_A, d_B, sigma.images)
                full[key] = u @ entries[rep_key].entries @ u.conj().T
        return full

    def _cone_residuals(self, full: Dict[tuple, np.ndarray], dims: Tuple[int, ...], k: int) -> Tuple[float, Dict[int, float]]:
        psd = min(min_eigenvalue(x) for x in full.values())
        ppt = {0: psd}
        for ell in range(1, k + 1):
            ppt[ell] = min(min_eigenvalue(ptranspose_array(x, dims, range(ell))) for x in full.values())
        return psd, ppt

    def _symmetry_residual(self, full: Dict[tuple, np.ndarray], m: int, k: int, d_A: int, d_B: int, tails) -> float:
        worst = 0.0
        for images in itertools.permutations(range(1, k + 1)):
            sigma = Permutation(images)
            u = _copy_unitary(k, d_A, d_B, sigma.images)
            for t in itertools.product(range(1, m + 1), repeat=k):
                moved = sigma.apply(t)
                for tail in tails:
                    x = full[(t,) + tail]
                    worst = max(worst, operator_norm(u @ x @ u.conj().T - full[(moved,) + tail]))
        return worst

    def _marginal_a(self, full, m: int, k: int, dims, tails) -> float:
        d_A = dims[0]
        worst = 0.0
        for rest in itertools.product(range(1, m + 1), repeat=k - 1):
            for tail in tails:
                total = sum(full[((a1,) + rest,) + tail] for a1 in range(1, m + 1))
                reduced = ptrace_array(total, dims, [0])
                worst = max(worst, operator_norm(total - np.kron(np.eye(d_A) / d_A, reduced)))
        return worst

    def _report(self, variant: str, tol: float, psd, ppt, marg_a, marg_b, sym, norm, recon) -> ResidualReport:
        failed = []
        if -psd > tol:
            failed.append("psd")
        failed += [f"ppt[{ell}]" for ell, v in ppt.items() if ell > 0 and -v > tol]
        for name, value in (("marginal_A", marg_a), ("marginal_B", marg_b), ("symmetry", sym),
                            ("normalization", norm), ("reconstruction", recon)):
            if value is not None and value > tol:
                failed.append(name)
        return ResidualReport(
            variant=variant, tol=tol, psd_min_eig=psd, ppt_min_eig=ppt, marginal_A=marg_a, marginal_B=marg_b,
            symmetry=sym, normalization=norm, reconstruction=recon, failed=failed,
            verdict="fail" if failed else "pass",
        )

    def _value(self, measured: List[np.ndarray], ensemble: Optional[StateEnsemble], dims: Tuple[int, ...]) -> Optional[float]:
        """Success probability of the reconstructed measurement; the ensemble must be in the certificate frame"""
        if ensemble is None:
            return None
        if (ensemble.d_A, ensemble.d_B, ensemble.n) != (dims[0], dims[-1], len(measured)):
            raise CertificateSchemaError(
                f"certificate acts on ({dims[0]}, {dims[-1]}) with {len(measured)} outcomes, "
                f"ensemble {ensemble.name} on ({ensemble.d_A}, {ensemble.d_B}) with {ensemble.n}"
            )
        return float(sum(np.real(np.trace(mm @ w)) for mm, w in zip(measured, ensemble.weighted_states())))

    def _reconstruction(self, measured: List[np.ndarray], claimed: Claimed) -> Optional[float]:
        if claimed is None:
            return None
        claimed = [c.entries if isinstance(c, HermitianOp) else np.asarray(c) for c in claimed]
        if len(claimed) != len(measured):
            raise CertificateSchemaError(f"{len(claimed)} claimed operators for {len(measured)} outcomes")
        return max(operator_norm(mm - c) for mm, c in zip(measured, claimed))

    def check_1r_certificate(self, c: CertificateArray1R, claimed: Claimed = None, tol: float = 1e-6, ensemble: Optional[StateEnsemble] = None) -> ResidualReport:
        """
        Evaluate every one-round constraint family on a certificate

        Args:
            c: Certificate (representatives are expanded by conjugation)
            claimed: Optional measurement M^λ to compare with the reconstruction
            tol: Pass threshold for every residual
            ensemble: Optional ensemble, in the certificate frame, to evaluate M^λ on

        Returns:
            ResidualReport

        Raises:
            CertificateSchemaError: If the index set is incomplete
        """
        m, k, n, d_A, d_B = c.m, c.k, c.n, c.d_A, c.d_B
        dims = c.dims
        tails = [(lam, b) for lam in range(1, n + 1) for b in range(1, m + 1)]
        full = self._expand(c.entries, m, k, d_A, d_B, tails)

        psd, ppt = self._cone_residuals(full, dims, k)
        marg_a = self._marginal_a(full, m, k, dims, tails)

        marg_b = 0.0
        for t in itertools.product(range(1, m + 1), repeat=k):
            fill = sum(ptrace_array(full[(t, lam, b)], dims, [k]) for lam in range(1, n + 1) for b in range(1, m + 1))
            rhs = np.kron(fill, np.eye(d_B) / (m * d_B))
            for b in range(1, m + 1):
                lhs = sum(full[(t, lam, b)] for lam in range(1, n + 1))
                marg_b = max(marg_b, operator_norm(lhs - rhs))

        sym = self._symmetry_residual(full, m, k, d_A, d_B, tails)

        norm = 0.0
        for b in range(1, m + 1):
            total = sum(np.trace(full[(t, lam, b)]).real for t in itertools.product(range(1, m + 1), repeat=k)
                        for lam in range(1, n + 1))
            norm = max(norm, abs(total - d_A**k * d_B))

        measured = []
        for lam in range(1, n + 1):
            acc = sum(ptrace_array(full[(t, lam, t[-1])], dims, range(k - 1))
                      for t in itertools.product(range(1, m + 1), repeat=k))
            measured.append(acc / d_A ** (k - 1))
        recon = self._reconstruction(measured, claimed)

        report = self._report("1r", tol, psd, ppt, marg_a, marg_b, sym, norm, recon)
        report.value = self._value(measured, ensemble, dims)
        logger.info(f"1R certificate (m={m}, k={k}): {report.verdict} {report.failed or ''}")
        return report

    def check_na_certificate(self, c: CertificateArrayNA, claimed: Claimed = None, tol: float = 1e-6, ensemble: Optional[StateEnsemble] = None) -> ResidualReport:
        """
        Evaluate every non-adaptive constraint family on a certificate

        Raises:
            CertificateSchemaError: If the index set is incomplete
        """
        m, k, n, d_A, d_B = c.m, c.k, c.n, c.d_A, c.d_B
        dims = c.dims
        bvecs = list(itertools.product(range(1, n + 1), repeat=m))
        tails = [(bvec,) for bvec in bvecs]
        full = self._expand(c.entries, m, k, d_A, d_B, tails)

        psd, ppt = self._cone_residuals(full, dims, k)
        marg_a = self._marginal_a(full, m, k, dims, tails)

        marg_b = 0.0
        for t in itertools.product(range(1, m + 1), repeat=k):
            total = sum(full[(t, bvec)] for bvec in bvecs)
            rhs = np.kron(ptrace_array(total, dims, [k]), np.eye(d_B) / d_B)
            marg_b = max(marg_b, operator_norm(total - rhs))

        sym = self._symmetry_residual(full, m, k, d_A, d_B, tails)

        total = sum(np.trace(x).real for x in full.values())
        norm = abs(total - d_A**k * d_B)

        measured = [np.zeros((d_A * d_B, d_A * d_B), dtype=complex) for _ in range(n)]
        for t in itertools.product(range(1, m + 1), repeat=k):
            for bvec in bvecs:
                lam = bvec[t[-1] - 1]
                measured[lam - 1] += ptrace_array(full[(t, bvec)], dims, range(k - 1))
        measured = [x / d_A ** (k - 1) for x in measured]
        recon = self._reconstruction(measured, claimed)

        report = self._report("na", tol, psd, ppt, marg_a, marg_b, sym, norm, recon)
        report.value = self._value(measured, ensemble, dims)
        logger.info(f"NA certificate (m={m}, k={k}): {report.verdict} {report.failed or ''}")
        return report

    # ---- files --------------------------------------------------------------

    def save_certificate(self, c: Union[CertificateArray1R, CertificateArrayNA], path: Union[str, Path], claimed: Claimed = None) -> None:
        if isinstance(c, CertificateArray1R):
            variant = "1r"
            entries = [CertificateEntry(a=list(a), lam=lam, b=b, op=encode_matrix(op.entries))
                       for (a, lam, b), op in c.entries.items()]
        else:
            variant = "na"
            entries = [CertificateEntry(a=list(a), b=list(bvec), op=encode_matrix(op.entries))
                       for (a, bvec), op in c.entries.items()]
        document = CertificateFile(
            variant=variant, m=c.m, k=c.k, n=c.n, d_A=c.d_A, d_B=c.d_B, entries=entries,
            claimed=[encode_matrix(x.entries if isinstance(x, HermitianOp) else x) for x in claimed] if claimed else None,
        )
        Path(path).write_text(json.dumps(document.model_dump(by_alias=True, exclude_none=True)))
        logger.info(f"Wrote {variant} certificate with {len(entries)} operators to {path}")

    def load_certificate(self, path: Union[str, Path]):
        """
        Read a certificate file

        Returns:
            (certificate array, claimed measurement or None)

        Raises:
            CertificateSchemaError: On malformed files
        """
        try:
            document = CertificateFile.model_validate(json.loads(Path(path).read_text()))
            dims = (document.d_A,) * document.k + (document.d_B,)
            entries = {}
            for entry in document.entries:
                op = HermitianOp.from_array(decode_matrix(entry.op), dims)
                if document.variant == "1r":
                    key = (tuple(entry.a), entry.lam, entry.b)
                else:
                    key = (tuple(entry.a), tuple(entry.b))
                if key in entries:
                    raise CertificateSchemaError(f"duplicate index tuple {key}")
                entries[key] = op
        except CertificateSchemaError:
            raise
        except (OSError, json.JSONDecodeError, ValidationError, ValueError) as e:
            raise CertificateSchemaError(f"malformed certificate {path}: {e}") from e

        cls = CertificateArray1R if document.variant == "1r" else CertificateArrayNA
        certificate = cls(document.m, document.k, document.n, document.d_A, document.d_B, entries)
        claimed = [decode_matrix(x) for x in document.claimed] if document.claimed else None
        return certificate, claimed


# Global certify service instance
certify_service = CertifyService()
