"""Matrix Market exchange, seeded test-matrix generators, and trace CSV.

Generators draw from NumPy's PCG64 bit generator seeded with the given
integer, so a (kind, parameters, seed) triple always yields the same matrix.
"""
from __future__ import annotations

import io as _io
from dataclasses import dataclass, field
from typing import BinaryIO, Union

import numpy as np

from .core import ConvergenceRecord, SparseSymMatrix, Trace

TRACE_HEADER = "step,m,lambda,mu,dt,lambda_tilde"


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market input."""


class TraceFormatError(ValueError):
    pass


def _text_lines(source):
    if isinstance(source, (bytes, bytearray)):
        return source.decode("ascii").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("ascii")
    return data.splitlines()


# -- Matrix Market ----------------------------------------------------------


def read_matrix_market(source, sym_tol: float = 0.0) -> SparseSymMatrix:
    """Parse a coordinate real/integer Matrix Market file.

    ``symmetric`` files have their stored triangle mirrored; ``general``
    files must hold a symmetric matrix (entries compared up to ``sym_tol``
    relative, and averaged). Duplicate entries are summed.
    """
    lines = _text_lines(source)
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise MatrixMarketError("line 1: missing %%MatrixMarket banner")
    banner = lines[0].split()
    if len(banner) != 5:
        raise MatrixMarketError("line 1: banner needs object, format, field, symmetry")
    obj, fmt, fld, sym = (b.lower() for b in banner[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"line 1: unsupported format {obj} {fmt}")
    if fld not in ("real", "integer", "double"):
        raise MatrixMarketError(f"line 1: unsupported field {fld!r}")
    if sym not in ("symmetric", "general"):
        raise MatrixMarketError(f"line 1: unsupported symmetry {sym!r}")

    body = iter(enumerate(lines[1:], start=2))
    size = None
    for lineno, line in body:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        size = (lineno, s.split())
        break
    if size is None:
        raise MatrixMarketError("missing size line")
    lineno, parts = size
    try:
        nr, nc, nnz = (int(p) for p in parts)
    except ValueError:
        raise MatrixMarketError(f"line {lineno}: bad size line {' '.join(parts)!r}") from None
    if nr != nc or nr < 1:
        raise MatrixMarketError(f"line {lineno}: matrix must be square, got {nr}x{nc}")
    n = nr

    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    k = 0
    for lineno, line in body:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"line {lineno}: expected 'row col value'")
        if k >= nnz:
            raise MatrixMarketError(f"line {lineno}: more entries than declared ({nnz})")
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"line {lineno}: cannot parse {s!r}") from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise MatrixMarketError(f"line {lineno}: index ({i}, {j}) outside 1..{n}")
        if not np.isfinite(v):
            raise MatrixMarketError(f"line {lineno}: non-finite value")
        if sym == "symmetric" and j > i:
            raise MatrixMarketError(f"line {lineno}: symmetric file stores upper entry ({i}, {j})")
        rows[k], cols[k], vals[k] = i - 1, j - 1, v
        k += 1
    if k != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {k}")

    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
        return SparseSymMatrix.from_triplets(n, rows, cols, vals)

    import scipy.sparse as sp

    M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    D = (M - M.T).tocsr()
    D.eliminate_zeros()
    scale = abs(M).max() if M.nnz else 0.0
    if D.nnz and abs(D).max() > sym_tol * scale:
        raise MatrixMarketError("general matrix is not symmetric")
    S = ((M + M.T) * 0.5).tocoo() if D.nnz else M.tocoo()
    # keep the union pattern so both triangles are present
    return SparseSymMatrix.from_triplets(n, S.row, S.col, S.data)


def write_matrix_market(A: SparseSymMatrix, comment: str = "") -> bytes:
    """Serialize the lower triangle with a ``symmetric`` header."""
    rows, cols, vals = A.triplets()
    low = rows >= cols
    r, c, v = rows[low], cols[low], vals[low]
    order = np.lexsort((r, c))
    out = _io.StringIO()
    out.write("%%MatrixMarket matrix coordinate real symmetric\n")
    for line in comment.splitlines():
        out.write(f"% {line}\n")
    out.write(f"{A.n} {A.n} {r.size}\n")
    for i, j, x in zip(r[order], c[order], v[order]):
        out.write(f"{i + 1} {j + 1} {_fmt(x)}\n")
    return out.getvalue().encode("ascii")


# -- generators -------------------------------------------------------------

GENERATOR_KINDS = ("laplacian1d", "random_sparse", "diag_dominant", "near_degenerate")


@dataclass(frozen=True)
class GeneratorSpec:
    """A test-matrix family and its parameters, e.g.
    ``GeneratorSpec("random_sparse", {"n": 50, "density": 0.1, "seed": 7})``."""

    kind: str
    params: dict = field(default_factory=dict)

    _ARGS = {
        "laplacian1d": ("n",),
        "random_sparse": ("n", "density", "seed"),
        "diag_dominant": ("n", "spread", "coupling", "seed"),
        "near_degenerate": ("n", "gap", "seed"),
    }

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator {self.kind!r}; choose from {GENERATOR_KINDS}")
        need = self._ARGS[self.kind]
        missing = [a for a in need if a not in self.params]
        extra = [a for a in self.params if a not in need]
        if missing or extra:
            raise ValueError(f"{self.kind} takes parameters {need}")
        p = self.params
        if int(p["n"]) != p["n"] or p["n"] < 2:
            raise ValueError("n must be an integer >= 2")
        if "density" in p and not 0 < p["density"] <= 1:
            raise ValueError("density must lie in (0, 1]")
        if "gap" in p and not p["gap"] > 0:
            raise ValueError("gap must be positive")
        if "spread" in p and p["spread"] < 0:
            raise ValueError("spread must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "GeneratorSpec":
        """Parse ``kind:arg:arg...``, e.g. ``near_degenerate:10:1e-6:3``."""
        kind, *args = text.strip().split(":")
        if kind not in cls._ARGS:
            raise ValueError(f"unknown generator {kind!r}; choose from {GENERATOR_KINDS}")
        names = cls._ARGS[kind]
        if len(args) != len(names):
            raise ValueError(f"{kind} expects {len(names)} arguments: {':'.join(names)}")
        params = {}
        for name, a in zip(names, args):
            try:
                params[name] = int(a) if name in ("n", "seed") else float(a)
            except ValueError:
                raise ValueError(f"bad value {a!r} for {name}") from None
        return cls(kind, params)


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def _symmetric_from_upper(n, r, c, v, diag):
    idx = np.arange(n)
    rows = np.concatenate([idx, r, c])
    cols = np.concatenate([idx, c, r])
    vals = np.concatenate([diag, v, v])
    return SparseSymMatrix.from_triplets(n, rows, cols, vals)


def _random_upper_pattern(rng, n, density):
    """Strict upper-triangle pattern, each entry kept with probability
    ``density``; drawn row by row so memory stays O(nnz)."""
    rs, cs = [], []
    for i in range(n - 1):
        keep = np.flatnonzero(rng.random(n - i - 1) < density) + i + 1
        rs.append(np.full(keep.size, i))
        cs.append(keep)
    if not rs:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(rs), np.concatenate(cs)


def generate(spec: Union[GeneratorSpec, str]) -> SparseSymMatrix:
    if isinstance(spec, str):
        spec = GeneratorSpec.parse(spec)
    p = spec.params
    n = int(p["n"])
    if spec.kind == "laplacian1d":
        i = np.arange(n - 1)
        return _symmetric_from_upper(n, i, i + 1, -np.ones(n - 1), 2.0 * np.ones(n))
    rng = _rng(p["seed"])
    if spec.kind == "random_sparse":
        diag = rng.uniform(-1.0, 1.0, n)
        r, c = _random_upper_pattern(rng, n, p["density"])
        return _symmetric_from_upper(n, r, c, rng.uniform(-1.0, 1.0, r.size), diag)
    if spec.kind == "diag_dominant":
        diag = rng.uniform(0.0, p["spread"], n)
        # about four couplings per row
        r, c = _random_upper_pattern(rng, n, min(1.0, 4.0 / n))
        v = p["coupling"] * rng.uniform(-1.0, 1.0, r.size)
        return _symmetric_from_upper(n, r, c, v, diag)
    # near_degenerate: nearest-neighbour coupling of size gap/10
    diag = np.concatenate([[0.0, p["gap"]], np.arange(1.0, n - 1.0)])
    i = np.arange(n - 1)
    v = (p["gap"] / 10.0) * rng.uniform(-1.0, 1.0, n - 1)
    return _symmetric_from_upper(n, i, i + 1, v, diag)


def laplacian1d_spectrum(n: int) -> np.ndarray:
    k = np.arange(1, n + 1)
    return 2.0 - 2.0 * np.cos(k * np.pi / (n + 1))


# -- traces -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace(trace: Trace) -> bytes:
    out = _io.StringIO()
    out.write(TRACE_HEADER + "\n")
    for r in trace:
        out.write(
            f"{int(r.step)},{int(r.m)},{_fmt(r.lambda_)},{_fmt(r.mu)},{_fmt(r.dt)},{_fmt(r.lambda_tilde)}\n"
        )
    return out.getvalue().encode("ascii")


def read_trace(source) -> Trace:
    lines = _text_lines(source)
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise TraceFormatError(f"line 1: expected header {TRACE_HEADER!r}")
    trace = Trace()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 6:
            raise TraceFormatError(f"line {lineno}: expected 6 fields")
        try:
            rec = ConvergenceRecord(
                int(parts[0]), int(parts[1]), *(float(x) for x in parts[2:])
            )
        except ValueError:
            raise TraceFormatError(f"line {lineno}: cannot parse {line!r}") from None
        trace.append(rec)
    return trace
