"""Hermitian linear algebra on multipartite tensor spaces"""

from functools import reduce
from typing import Iterable, List, Sequence

import numpy as np

from locc_bounds.models.operators import HermitianOp, Operator, Permutation, SystemShape


def tensor(x: HermitianOp, y: HermitianOp) -> HermitianOp:
    """Kronecker product; the shapes are concatenated"""
    return HermitianOp(x.shape.concat(y.shape), np.kron(x.entries, y.entries))


def tensor_all(ops: Sequence[HermitianOp]) -> HermitianOp:
    if not ops:
        raise ValueError("tensor_all needs at least one operator")
    return reduce(tensor, ops)


def ptrace_array(arr: np.ndarray, dims: Sequence[int], traced: Iterable[int]) -> np.ndarray:
    """
    Partial trace of a raw square array

    Args:
        arr: Matrix on the product space of dims
        dims: Local dimensions
        traced: 0-based factors to trace out

    Returns:
        Matrix on the remaining factors (1x1 when everything is traced)
    """
    dims = list(dims)
    n = len(dims)
    t = np.asarray(arr).reshape(dims + dims)
    remaining = n
    for axis in sorted(set(traced), reverse=True):
        t = np.trace(t, axis1=axis, axis2=axis + remaining)
        remaining -= 1
    size = int(np.prod([d for i, d in enumerate(dims) if i not in set(traced)]))
    return t.reshape(size, size)


def ptranspose_array(arr: np.ndarray, dims: Sequence[int], transposed: Iterable[int]) -> np.ndarray:
    dims = list(dims)
    n = len(dims)
    axes = list(range(2 * n))
    for s in set(transposed):
        axes[s], axes[s + n] = axes[s + n], axes[s]
    total = int(np.prod(dims))
    return np.asarray(arr).reshape(dims + dims).transpose(axes).reshape(total, total)


def partial_trace(x: HermitianOp, subsystems: Iterable[int]) -> HermitianOp:
    """
    Trace out the named tensor factors

    Args:
        x: Operator to reduce
        subsystems: 1-based factor indices

    Returns:
        Operator on the remaining factors

    Raises:
        ValueError: If an index is out of range
    """
    traced = x.shape.check_subsystems(subsystems)
    out = ptrace_array(x.entries, x.shape.dims, traced)
    return HermitianOp(x.shape.without(traced), out)


def partial_transpose(x: HermitianOp, subsystems: Iterable[int]) -> HermitianOp:
    """
    Transpose the named tensor factors

    Args:
        x: Operator to transform
        subsystems: 1-based factor indices

    Returns:
        Partially transposed operator, same shape

    Raises:
        ValueError: If an index is out of range
    """
    picked = x.shape.check_subsystems(subsystems)
    return HermitianOp(x.shape, ptranspose_array(x.entries, x.shape.dims, picked))


def permutation_matrix(k: int, d: int, sigma: Permutation) -> np.ndarray:
    """Real d^k permutation matrix with U|x_1..x_k> = |x_{σ^-1(1)}..x_{σ^-1(k)}>"""
    if k < 1 or d < 1:
        raise ValueError(f"permutation_unitary needs k >= 1 and d >= 1, got k={k}, d={d}")
    if sigma.k != k:
        raise ValueError(f"Permutation acts on {sigma.k} points, expected {k}")
    size = d**k
    idx = np.arange(size).reshape([d] * k)
    # output axis j reads input axis σ^-1(j)
    moved = idx.transpose(sigma.inverse().zero_based)
    u = np.zeros((size, size))
    u[np.arange(size), moved.reshape(-1)] = 1.0
    return u


def permutation_unitary(k: int, d: int, sigma: Permutation) -> Operator:
    """
    Unitary representation of S_k on (C^d)^{⊗k}

    Returns:
        Permutation matrix carried by an Operator of shape [d]*k
    """
    return Operator(SystemShape((d,) * k), permutation_matrix(k, d, sigma))


def real_embedding(x: HermitianOp) -> np.ndarray:
    """[[Re x, -Im x], [Im x, Re x]]"""
    re, im = x.entries.real, x.entries.imag
    return np.block([[re, -im], [im, re]])


def hermitize(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=complex)
    return (arr + arr.conj().T) / 2


def operator_norm(arr: np.ndarray) -> float:
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, 2))


def min_eigenvalue(arr: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(arr))[0])


def is_psd(x: HermitianOp, tol: float = 1e-9) -> bool:
    """True iff λ_min(x) >= -tol * max(1, ||x||_inf), the max absolute row sum"""
    eigs = x.eigvalsh()
    scale = max(1.0, float(np.abs(x.entries).sum(axis=1).max()))
    return bool(eigs[0] >= -tol * scale)


def is_povm(ops: Sequence[HermitianOp], tol: float = 1e-9) -> bool:
    """
    Check that a list of effects forms a POVM

    Raises:
        ValueError: If the effects do not share one shape
    """
    if not ops:
        return False
    shape = ops[0].shape
    if any(op.shape != shape for op in ops):
        raise ValueError("POVM effects must share one shape")
    if not all(is_psd(op, tol) for op in ops):
        return False
    total = sum(op.entries for op in ops)
    return operator_norm(total - np.eye(shape.total)) <= tol


def inverse_sqrt(g: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    """G^{-1/2} of a positive definite matrix"""
    vals, vecs = np.linalg.eigh(hermitize(g))
    if vals[0] <= floor * max(1.0, vals[-1]):
        raise np.linalg.LinAlgError("Matrix is singular to working precision")
    return (vecs / np.sqrt(vals)) @ vecs.conj().T


def project_povm(effects: Sequence[np.ndarray]) -> List[np.ndarray]:
    """
    Turn approximately valid effects into an exact POVM

    Negative eigenvalues are clipped and the sum is renormalised to the
    identity through G^{-1/2} X G^{-1/2}.
    """
    clipped = []
    for x in effects:
        vals, vecs = np.linalg.eigh(hermitize(x))
        vals = np.clip(vals, 0.0, None)
        clipped.append((vecs * vals) @ vecs.conj().T)
    g = sum(clipped)
    w = inverse_sqrt(g)
    return [hermitize(w @ x @ w) for x in clipped]


def swap_array(arr: np.ndarray, d_a: int, d_b: int) -> np.ndarray:
    """Conjugate an operator on C^d_a ⊗ C^d_b by SWAP"""
    t = np.asarray(arr).reshape(d_a, d_b, d_a, d_b).transpose(1, 0, 3, 2)
    return t.reshape(d_a * d_b, d_a * d_b)


def basis_projectors(d: int) -> List[np.ndarray]:
    return [np.outer(e, e).astype(complex) for e in np.eye(d)]


def sign_projectors(observable: np.ndarray, tol: float = 1e-12) -> List[np.ndarray]:
    """
    Spectral sign decomposition of a Hermitian observable

    Returns:
        [P_plus, P_minus]; zero eigenvalues go to P_plus
    """
    vals, vecs = np.linalg.eigh(hermitize(observable))
    plus = vecs[:, vals >= -tol]
    minus = vecs[:, vals < -tol]
    return [plus @ plus.conj().T, minus @ minus.conj().T]
