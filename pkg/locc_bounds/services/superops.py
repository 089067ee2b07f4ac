"""Sparse vectorised linear maps for constraint assembly

Operators are vectorised row-major: vec(X)[i * n + j] = X[i, j]. A Hermitian
n x n block is addressed through n^2 real coordinates: the real parts of the
upper triangle (diagonal included, in np.triu_indices order) followed by the
imaginary parts of the strict upper triangle.
"""

from functools import lru_cache
from math import prod
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse as sp


def _grid_offsets(dims: Sequence[int], axes: Sequence[int]) -> np.ndarray:
    """Flat-index contribution of every multi-index over the given axes"""
    dims = list(dims)
    strides = [prod(dims[i + 1:]) for i in range(len(dims))]
    sub = [dims[a] for a in axes]
    if not sub:
        return np.zeros(1, dtype=np.int64)
    multi = np.indices(sub).reshape(len(sub), -1)
    return sum(multi[pos] * strides[a] for pos, a in enumerate(axes)).astype(np.int64)


@lru_cache(maxsize=256)
def partial_trace_map(dims: Tuple[int, ...], traced: Tuple[int, ...]) -> sp.csr_matrix:
    """vec(X) -> vec(Tr_traced X); traced holds 0-based factors"""
    keep = [i for i in range(len(dims)) if i not in traced]
    n = prod(dims)
    keep_part = _grid_offsets(dims, keep)
    traced_part = _grid_offsets(dims, traced)
    size = len(keep_part)
    full = keep_part[:, None] + traced_part[None, :]  # (K, T)
    cols = (full[:, None, :] * n + full[None, :, :]).reshape(-1)
    rows = np.broadcast_to(
        (np.arange(size)[:, None] * size + np.arange(size)[None, :])[:, :, None],
        (size, size, len(traced_part)),
    ).reshape(-1)
    data = np.ones(len(rows), dtype=complex)
    return sp.csr_matrix((data, (rows, cols)), shape=(size * size, n * n))


@lru_cache(maxsize=256)
def partial_transpose_map(dims: Tuple[int, ...], transposed: Tuple[int, ...]) -> sp.csr_matrix:
    """vec(X) -> vec(X^{T_S}); transposed holds 0-based factors"""
    k = len(dims)
    n = prod(dims)
    axes = list(range(2 * k))
    for s in transposed:
        axes[s], axes[s + k] = axes[s + k], axes[s]
    source = np.arange(n * n).reshape(list(dims) * 2).transpose(axes).reshape(-1)
    data = np.ones(n * n, dtype=complex)
    return sp.csr_matrix((data, (np.arange(n * n), source)), shape=(n * n, n * n))


def conjugation_map(u: np.ndarray) -> sp.csr_matrix:
    """vec(X) -> vec(U X U^dagger)"""
    su = sp.csr_matrix(u)
    return sp.kron(su, su.conj(), format="csr")


def kron_left_map(a: np.ndarray, n_right: int) -> sp.csr_matrix:
    """vec(Y) -> vec(A ⊗ Y) for a fixed left factor A"""
    a = np.asarray(a, dtype=complex)
    n_left = a.shape[0]
    big = n_left * n_right
    ii, jj = np.nonzero(a)
    p, q = np.divmod(np.arange(n_right * n_right), n_right)
    rows = ((ii[:, None] * n_right + p[None, :]) * big + (jj[:, None] * n_right + q[None, :])).reshape(-1)
    cols = np.broadcast_to(p * n_right + q, (len(ii), len(p))).reshape(-1)
    data = np.broadcast_to(a[ii, jj][:, None], (len(ii), len(p))).reshape(-1)
    return sp.csr_matrix((data, (rows, cols)), shape=(big * big, n_right * n_right))


def kron_right_map(b: np.ndarray, n_left: int) -> sp.csr_matrix:
    """vec(Y) -> vec(Y ⊗ B) for a fixed right factor B"""
    b = np.asarray(b, dtype=complex)
    n_right = b.shape[0]
    big = n_left * n_right
    ii, jj = np.nonzero(b)
    p, q = np.divmod(np.arange(n_left * n_left), n_left)
    rows = ((p[None, :] * n_right + ii[:, None]) * big + (q[None, :] * n_right + jj[:, None])).reshape(-1)
    cols = np.broadcast_to(p * n_left + q, (len(ii), len(p))).reshape(-1)
    data = np.broadcast_to(b[ii, jj][:, None], (len(ii), len(p))).reshape(-1)
    return sp.csr_matrix((data, (rows, cols)), shape=(big * big, n_left * n_left))


@lru_cache(maxsize=64)
def coordinate_positions(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row-major vec positions of the real and imaginary coordinates"""
    ri, rj = np.triu_indices(n)
    ii, ij = np.triu_indices(n, 1)
    return ri * n + rj, ii * n + ij


@lru_cache(maxsize=64)
def hermitian_basis(n: int) -> sp.csr_matrix:
    """Complex n^2 x n^2 map from coordinates to vec(X)"""
    ri, rj = np.triu_indices(n)
    ii, ij = np.triu_indices(n, 1)
    n_re = len(ri)
    re_cols = np.arange(n_re)
    im_cols = n_re + np.arange(len(ii))
    off = ri != rj
    rows = np.concatenate([ri * n + rj, (rj * n + ri)[off], ii * n + ij, ij * n + ii])
    cols = np.concatenate([re_cols, re_cols[off], im_cols, im_cols])
    data = np.concatenate([
        np.ones(n_re, dtype=complex),
        np.ones(int(off.sum()), dtype=complex),
        np.full(len(ii), 1j),
        np.full(len(ii), -1j),
    ])
    return sp.csr_matrix((data, (rows, cols)), shape=(n * n, n * n))


def coordinate_rows(k: sp.spmatrix, n_out: int) -> sp.csr_matrix:
    """Real coordinate rows of a complex map whose output is Hermitian n_out x n_out"""
    re_pos, im_pos = coordinate_positions(n_out)
    k = sp.csr_matrix(k)
    return sp.vstack([k[re_pos].real, k[im_pos].imag], format="csr")


def coordinate_map(k: sp.spmatrix, n_in: int, n_out: int) -> sp.csr_matrix:
    """
    Real matrix acting on Hermitian coordinates

    Args:
        k: Complex map on row-major vectorisations, Hermiticity preserving
        n_in: Input block dimension
        n_out: Output block dimension
    """
    mapped = sp.csr_matrix(k) @ hermitian_basis(n_in)
    out = coordinate_rows(mapped, n_out)
    out.eliminate_zeros()
    return out


def identity_map(n: int) -> sp.csr_matrix:
    return sp.identity(n * n, format="csr")


def to_coordinates(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    n = x.shape[0]
    re_pos, im_pos = coordinate_positions(n)
    flat = x.reshape(-1)
    return np.concatenate([flat[re_pos].real, flat[im_pos].imag])


def from_coordinates(h: np.ndarray, n: int) -> np.ndarray:
    return (hermitian_basis(n) @ np.asarray(h, dtype=complex)).reshape(n, n)


def trace_functional(w: np.ndarray) -> np.ndarray:
    """Row vector f with f . coords(X) = Re Tr(W X)"""
    w = np.asarray(w, dtype=complex)
    n = w.shape[0]
    row = hermitian_basis(n).T @ w.T.reshape(-1)
    return np.asarray(row).real.reshape(-1)
