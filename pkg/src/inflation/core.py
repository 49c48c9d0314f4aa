"""Sparse symmetric matrices and the vector primitives every solver uses.

Every routine that multiplies by the matrix takes an optional
:class:`MatvecCounter`; solvers thread one counter through a whole run so
that the reported cost is an audited count of kernel calls.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
import scipy.sparse as sp


class MatvecCounter:
    """Mutable tally of matrix-vector products."""

    def __init__(self) -> None:
        self.count = 0

    def add(self, k: int = 1) -> None:
        self.count += k

    def __repr__(self) -> str:
        return f"MatvecCounter({self.count})"


class SparseSymMatrix:
    """Real symmetric matrix in CSR form with the full pattern stored.

    Both triangles are kept so the product is a plain row-wise kernel.
    Construction validates the CSR invariants and exact symmetry; the
    object is treated as immutable afterwards.
    """

    def __init__(self, n, row_offsets, col_indices, values):
        self.n = int(n)
        self.row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        self.col_indices = np.ascontiguousarray(col_indices, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self._validate()
        self._csr = sp.csr_matrix(
            (self.values, self.col_indices, self.row_offsets), shape=(self.n, self.n)
        )
        for arr in (self.row_offsets, self.col_indices, self.values):
            arr.flags.writeable = False

    def _validate(self) -> None:
        n, ro, ci, va = self.n, self.row_offsets, self.col_indices, self.values
        if n < 1:
            raise ValueError("matrix dimension must be positive")
        if ro.shape != (n + 1,) or ro[0] != 0:
            raise ValueError("row_offsets must have length n+1 and start at 0")
        if np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        nnz = int(ro[-1])
        if ci.shape != (nnz,) or va.shape != (nnz,):
            raise ValueError("col_indices/values length must equal row_offsets[n]")
        if nnz and (ci.min() < 0 or ci.max() >= n):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(va)):
            raise ValueError("matrix values must be finite")
        rows = np.repeat(np.arange(n), np.diff(ro))
        # strictly increasing columns within each row
        same_row = rows[1:] == rows[:-1]
        if np.any(ci[1:][same_row] <= ci[:-1][same_row]):
            raise ValueError("column indices must be strictly increasing within a row")
        # structural + numerical symmetry: the sorted (row, col) and (col, row)
        # listings must coincide entry for entry
        order = np.lexsort((rows, ci))
        if not (
            np.array_equal(ci[order], rows)
            and np.array_equal(rows[order], ci)
            and np.array_equal(va[order], va)
        ):
            raise ValueError("matrix is not symmetric")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_triplets(cls, n, rows, cols, vals) -> "SparseSymMatrix":
        """Build from (row, col, value) triplets; duplicates are summed."""
        coo = sp.coo_matrix(
            (np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))),
            shape=(n, n),
        )
        csr = coo.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(n, csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, M) -> "SparseSymMatrix":
        M = np.asarray(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("dense matrix must be square")
        r, c = np.nonzero(M)
        return cls.from_triplets(M.shape[0], r, c, M[r, c])

    @classmethod
    def from_diagonal(cls, d) -> "SparseSymMatrix":
        d = np.asarray(d, dtype=float)
        n = d.size
        return cls(n, np.arange(n + 1), np.arange(n), d)

    @classmethod
    def identity(cls, n: int) -> "SparseSymMatrix":
        return cls.from_diagonal(np.ones(n))

    # -- accessors ----------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def triplets(self):
        rows = np.repeat(np.arange(self.n), np.diff(self.row_offsets))
        return rows, self.col_indices.copy(), self.values.copy()

    def scaled(self, c: float) -> "SparseSymMatrix":
        return SparseSymMatrix(self.n, self.row_offsets, self.col_indices, c * self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseSymMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"SparseSymMatrix(n={self.n}, nnz={self.nnz})"


@dataclass
class StateVector:
    """Coordinates ``x`` and momenta ``p`` of the dynamical iteration."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.x.shape != self.p.shape or self.x.ndim != 1:
            raise ValueError("x and p must be vectors of equal length")

    @classmethod
    def at_rest(cls, x) -> "StateVector":
        x = np.asarray(x, dtype=float)
        return cls(x.copy(), np.zeros_like(x))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.p)))


@dataclass(frozen=True)
class SpectralBounds:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"invalid spectral bounds ({self.lo}, {self.hi})")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class ConvergenceRecord:
    step: int
    m: int
    lambda_: float
    mu: float
    dt: float
    lambda_tilde: float


@dataclass
class Trace:
    """Per-step convergence history of one run."""

    records: list = field(default_factory=list)

    def append(self, rec: ConvergenceRecord) -> None:
        if self.records and rec.m < self.records[-1].m:
            raise ValueError("matvec count must be nondecreasing along a trace")
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ConvergenceRecord]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def mu(self) -> np.ndarray:
        return self.column("mu")

    @property
    def lambdas(self) -> np.ndarray:
        return self.column("lambda_")

    def first_m_below(self, threshold: float) -> Optional[int]:
        """Matvec count at the first record with ``mu <= threshold``."""
        for r in self.records:
            if r.mu <= threshold:
                return r.m
        return None


# -- kernels ----------------------------------------------------------------


def matvec(A: SparseSymMatrix, v, counter: Optional[MatvecCounter] = None) -> np.ndarray:
    """Return ``A @ v``. A 2-D ``v`` is a block of column vectors and costs
    one product per column."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != A.n or v.ndim > 2:
        raise ValueError(f"dimension mismatch: matrix is {A.n}, vector is {v.shape}")
    if counter is not None:
        counter.add(1 if v.ndim == 1 else v.shape[1])
    return A._csr @ v


def _check_nonzero(x: np.ndarray) -> float:
    xx = float(x @ x)
    if not xx > 0.0 or not np.isfinite(xx):
        raise ValueError("vector must be nonzero and finite")
    return xx


def rayleigh_quotient(A, x, y_opt=None, counter=None) -> float:
    """x.(Ax) / x.x; pass ``y_opt = A @ x`` to avoid a product."""
    x = np.asarray(x, dtype=float)
    xx = _check_nonzero(x)
    y = matvec(A, x, counter) if y_opt is None else y_opt
    return float(x @ y) / xx


def residual_measure(A, x, lam: float, y_opt=None, counter=None) -> float:
    """Squared relative residual ``|(A - lam) x|^2 / |x|^2``."""
    x = np.asarray(x, dtype=float)
    xx = _check_nonzero(x)
    y = matvec(A, x, counter) if y_opt is None else y_opt
    r = y - lam * x
    return float(r @ r) / xx


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot normalize a non-finite vector")
    nrm = np.linalg.norm(v)
    if nrm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / nrm


def gershgorin_bounds(A: SparseSymMatrix) -> SpectralBounds:
    d = A.diagonal()
    r = np.asarray(abs(A._csr).sum(axis=1)).ravel() - np.abs(d)
    return SpectralBounds(float(np.min(d - r)), float(np.max(d + r)))


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` (or each column) so its largest-magnitude entry is positive."""
    v = np.array(v, dtype=float)
    if v.ndim == 1:
        return -v if v[np.argmax(np.abs(v))] < 0 else v
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


@dataclass
class EigenpairSet:
    """Eigenpairs sorted by value; ``vectors`` holds them as columns.

    ``residuals`` are squared residual norms (the same measure as ``mu``).
    ``matvecs`` and ``steps`` report the cost of the run that produced them.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    matvecs: int = 0
    steps: int = 0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim == 1:
            self.vectors = self.vectors[:, None]
        self.residuals = np.atleast_1d(np.asarray(self.residuals, dtype=float))
        self.converged = np.atleast_1d(np.asarray(self.converged, dtype=bool))
        k = self.values.size
        if self.vectors.shape[1] != k or self.residuals.size != k or self.converged.size != k:
            raise ValueError("inconsistent eigenpair set sizes")
        if np.any(np.diff(self.values) < 0):
            order = np.argsort(self.values, kind="stable")
            self.values = self.values[order]
            self.vectors = self.vectors[:, order]
            self.residuals = self.residuals[order]
            self.converged = self.converged[order]

    def __len__(self) -> int:
        return self.values.size

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def vector(self, i: int) -> np.ndarray:
        return self.vectors[:, i]
