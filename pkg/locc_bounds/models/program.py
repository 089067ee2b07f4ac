"""Conic program model: PSD blocks, equalities, linear objective"""

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from locc_bounds.models.operators import HermitianOp, SystemShape
from locc_bounds.services import superops

Coefficients = Union[sp.spmatrix, np.ndarray]


class SolveStatus(str, enum.Enum):
    """Outcome of a conic solve"""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NUMERICAL_TROUBLE = "numerical_trouble"


@dataclass(frozen=True)
class BlockSpec:
    label: str
    shape: SystemShape
    offset: int  # first coordinate in the stacked coordinate vector

    @property
    def dim(self) -> int:
        return self.shape.total

    @property
    def size(self) -> int:
        return self.dim * self.dim


@dataclass(frozen=True)
class PartialTransposeImage:
    """Partial transpose on 1-based subsystems; empty means the identity"""
    subsystems: Tuple[int, ...] = ()


@dataclass
class EqualityGroup:
    """Rows Σ_label terms[label] @ coords(label) = rhs"""
    family: str
    terms: Dict[str, sp.csr_matrix]
    rhs: np.ndarray


class ConicProgram:
    """
    Maximise a linear functional over Hermitian PSD blocks subject to
    affine equalities

    Blocks are addressed by label; coefficients act on the n^2 Hermitian
    coordinates of a block (see services.superops), so only upper-triangle
    entries are addressable and Hermiticity is structural.
    """

    def __init__(self, name: str = "program"):
        self.name = name
        self.blocks: Dict[str, BlockSpec] = {}
        self.groups: List[EqualityGroup] = []
        self.objective: Dict[str, np.ndarray] = {}
        self.sense = "maximize"
        self._next_offset = 0

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def num_coordinates(self) -> int:
        return self._next_offset

    @property
    def num_equalities(self) -> int:
        return sum(len(g.rhs) for g in self.groups)

    def real_psd_size(self) -> int:
        """Σ (2 * block_dim)^2 over all blocks"""
        return sum((2 * b.dim) ** 2 for b in self.blocks.values())

    def add_psd_block(self, label: str, complex_dim: int, dims: Optional[Sequence[int]] = None) -> str:
        """
        Register a Hermitian PSD block

        Args:
            label: Unique block label
            complex_dim: Complex dimension of the block
            dims: Optional tensor-factor shape (defaults to a single factor)

        Returns:
            The label, used as the block handle

        Raises:
            ValueError: If the label is already used
        """
        if label in self.blocks:
            raise ValueError(f"Duplicate block label {label!r}")
        shape = SystemShape(tuple(dims) if dims is not None else (complex_dim,))
        if shape.total != complex_dim:
            raise ValueError(f"Block {label!r}: dims {shape.dims} do not multiply to {complex_dim}")
        self.blocks[label] = BlockSpec(label, shape, self._next_offset)
        self._next_offset += complex_dim * complex_dim
        return label

    def _check_terms(self, terms: Mapping[str, Coefficients], rows: Optional[int]) -> Tuple[Dict[str, sp.csr_matrix], int]:
        checked: Dict[str, sp.csr_matrix] = {}
        for label, coeffs in terms.items():
            if label not in self.blocks:
                raise ValueError(f"Unknown block {label!r}")
            mat = sp.csr_matrix(np.atleast_2d(coeffs) if isinstance(coeffs, np.ndarray) else coeffs)
            if np.iscomplexobj(mat.data):
                raise ValueError(f"Coefficients for {label!r} must be real")
            if mat.shape[1] != self.blocks[label].size:
                raise ValueError(
                    f"Coefficients for {label!r} address {mat.shape[1]} entries, block has {self.blocks[label].size}"
                )
            if rows is None:
                rows = mat.shape[0]
            elif mat.shape[0] != rows:
                raise ValueError(f"Coefficient row count mismatch for {label!r}")
            mat = mat.astype(float)
            mat.sum_duplicates()
            checked[label] = checked[label] + mat if label in checked else mat
        if rows is None:
            raise ValueError("Equality has no terms")
        return checked, rows

    def add_equality(self, terms: Mapping[str, Coefficients], rhs, family: str = "") -> None:
        """
        Append equalities Σ_label terms[label] @ coords(label) = rhs

        A 1-D coefficient array is a single functional; a matrix is a batch
        of functionals sharing the rhs vector.

        Raises:
            ValueError: If a term references an unknown block or invalid entries
        """
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        checked, rows = self._check_terms(terms, None)
        if rhs.shape == (1,) and rows > 1:
            rhs = np.full(rows, rhs[0])
        if rhs.shape != (rows,):
            raise ValueError(f"rhs has shape {rhs.shape}, expected ({rows},)")
        self.groups.append(EqualityGroup(family, checked, rhs))

    def add_psd_image(self, block_label: str, descriptor: PartialTransposeImage) -> Optional[str]:
        """
        Constrain a linear image of a block to be PSD

        The image is carried by an auxiliary slack block S with S - T(X) = 0.

        Returns:
            The slack label, or None when the descriptor is the identity

        Raises:
            ValueError: If the block is unknown or the descriptor unsupported
        """
        if not isinstance(descriptor, PartialTransposeImage):
            raise ValueError(f"Unsupported image descriptor {descriptor!r}")
        if block_label not in self.blocks:
            raise ValueError(f"Unknown block {block_label!r}")
        spec = self.blocks[block_label]
        picked = spec.shape.check_subsystems(descriptor.subsystems)
        if not picked:
            return None
        slack = f"{block_label}^T{''.join(str(s + 1) for s in picked)}"
        self.add_psd_block(slack, spec.dim, spec.shape.dims)
        image = superops.coordinate_map(
            superops.partial_transpose_map(spec.shape.dims, picked), spec.dim, spec.dim
        )
        self.add_equality(
            {slack: superops.identity_map(spec.dim), block_label: -image},
            np.zeros(spec.size),
            family="psd_image",
        )
        return slack

    def add_objective(self, terms: Mapping[str, np.ndarray]) -> None:
        """Add Σ_label f[label] . coords(label) to the objective"""
        for label, row in terms.items():
            if label not in self.blocks:
                raise ValueError(f"Unknown block {label!r}")
            row = np.asarray(row, dtype=float).reshape(-1)
            if row.shape[0] != self.blocks[label].size:
                raise ValueError(f"Objective row for {label!r} has wrong length")
            self.objective[label] = self.objective.get(label, 0.0) + row

    def assemble(self, dedupe: bool = True) -> Tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
        """
        Stack all equalities into (A, b) and the objective into c over the
        concatenated block coordinates

        Zero rows with zero rhs are dropped; with dedupe, rows that coincide
        up to scale (including rhs) are kept once.
        """
        total = self.num_coordinates
        stacked = []
        rhs = []
        for group in self.groups:
            parts = []
            for label, mat in group.terms.items():
                spec = self.blocks[label]
                parts.append(_shift_columns(mat, spec.offset, total))
            stacked.append(sum(parts[1:], parts[0]).tocsr())
            rhs.append(group.rhs)
        if stacked:
            a = sp.vstack(stacked, format="csr")
            b = np.concatenate(rhs)
        else:
            a = sp.csr_matrix((0, total))
            b = np.zeros(0)
        a.eliminate_zeros()
        a, b = _canonical_rows(a, b, dedupe)

        c = np.zeros(total)
        for label, row in self.objective.items():
            spec = self.blocks[label]
            c[spec.offset:spec.offset + spec.size] += row
        return a, b, c

    def block_coordinates(self, label: str, stacked: np.ndarray) -> np.ndarray:
        spec = self.blocks[label]
        return stacked[spec.offset:spec.offset + spec.size]

    def to_dict(self) -> dict:
        """Self-describing JSON-ready dump; not a stable interchange format"""
        a, b, c = self.assemble()
        a = a.tocoo()
        labels = list(self.blocks)
        starts = np.array([self.blocks[lbl].offset for lbl in labels])

        def locate(col: int) -> Tuple[str, int]:
            i = int(np.searchsorted(starts, col, side="right") - 1)
            return labels[i], int(col - starts[i])

        rows: List[List] = [[] for _ in range(a.shape[0])]
        for r, col, v in zip(a.row, a.col, a.data):
            label, entry = locate(int(col))
            rows[int(r)].append([label, entry, float(v)])
        objective = []
        for col in np.flatnonzero(c):
            label, entry = locate(int(col))
            objective.append([label, entry, float(c[col])])
        return {
            "name": self.name,
            "sense": self.sense,
            "coordinates": "re(triu) then im(strict triu), row-major",
            "blocks": [
                {"label": s.label, "complex_dim": s.dim, "dims": list(s.shape.dims)} for s in self.blocks.values()
            ],
            "equalities": [{"terms": row, "rhs": float(v)} for row, v in zip(rows, b)],
            "objective": objective,
        }


def _shift_columns(mat: sp.csr_matrix, offset: int, total: int) -> sp.csr_matrix:
    coo = mat.tocoo()
    return sp.csr_matrix((coo.data, (coo.row, coo.col + offset)), shape=(mat.shape[0], total))


def _canonical_rows(a: sp.csr_matrix, b: np.ndarray, dedupe: bool, decimals: int = 12):
    keep = []
    seen = set()
    for r in range(a.shape[0]):
        start, end = a.indptr[r], a.indptr[r + 1]
        if start == end:
            if abs(b[r]) > 1e-12:
                # 0 = nonzero: keep so the solver reports infeasibility
                keep.append(r)
            continue
        if not dedupe:
            keep.append(r)
            continue
        cols = a.indices[start:end]
        vals = a.data[start:end]
        order = np.argsort(cols)
        cols, vals = cols[order], vals[order]
        scale = vals[0]
        key = (
            cols.tobytes(),
            np.round(vals / scale, decimals).tobytes(),
            round(float(b[r] / scale), decimals),
        )
        if key in seen:
            continue
        seen.add(key)
        keep.append(r)
    return a[keep], b[keep]


@dataclass(frozen=True)
class SolveReport:
    """Result of a conic solve"""

    status: SolveStatus
    primal_value: float
    dual_value: float
    gap: float
    block_values: Dict[str, HermitianOp] = field(default_factory=dict)
    solver: str = ""
    wall_time_s: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL
