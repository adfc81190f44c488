"""Sparse symmetric operator storage and block SpMV kernels.

The matrix is held in CSR form with the full symmetric pattern (both
triangles), so that ``A @ X`` is a plain row-traversal kernel.  Block
products walk the rows once and update every right-hand side from the same
index/value reads, in column chunks of ``COL_CHUNK``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp

__all__ = [
    "MatrixMarketError",
    "SparseSymMatrix",
    "SpmvCounter",
    "SymOperator",
    "gershgorin_bounds",
    "get_threads",
    "load_matrix_market",
    "set_threads",
    "shifted_spmv_block",
    "spmv_block",
    "write_matrix_market",
]

COL_CHUNK = 8
ASYMMETRY_RTOL = 1e-12

_threads = 0

# the bundled TBB is too old for numba; prefer OpenMP, then the built-in pool
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


class MatrixMarketError(ValueError):
    """Raised for malformed or unsupported Matrix Market input."""

    def __init__(self, msg, lineno=None):
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)
        self.lineno = lineno


def set_threads(n: int) -> None:
    """Cap kernel parallelism. ``0`` selects the sequential kernel."""
    global _threads
    n = int(n)
    if n < 0:
        raise ValueError("thread count must be >= 0")
    _threads = n
    if n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def get_threads() -> int:
    return _threads


def _threads_from_env() -> None:
    val = os.environ.get("ARRABIT_THREADS")
    if val:
        try:
            set_threads(int(val))
        except ValueError:
            pass


@numba.njit(cache=True)
def _csr_matmat_rows(indptr, indices, data, X, Y, start, stop):
    b = X.shape[1]
    acc = np.empty(COL_CHUNK)
    for i in range(start, stop):
        lo = indptr[i]
        hi = indptr[i + 1]
        for c0 in range(0, b, COL_CHUNK):
            w = min(COL_CHUNK, b - c0)
            acc[:] = 0.0
            for jj in range(lo, hi):
                j = indices[jj]
                v = data[jj]
                for c in range(w):
                    acc[c] += v * X[j, c0 + c]
            for c in range(w):
                Y[i, c0 + c] = acc[c]


@numba.njit(cache=True)
def _csr_matmat(indptr, indices, data, X, Y):
    _csr_matmat_rows(indptr, indices, data, X, Y, 0, Y.shape[0])


@numba.njit(parallel=True)
def _csr_matmat_par(indptr, indices, data, X, Y):
    n = Y.shape[0]
    nblk = numba.get_num_threads() * 4
    step = (n + nblk - 1) // nblk
    for blk in numba.prange(nblk):
        start = blk * step
        stop = min(start + step, n)
        if start < stop:
            _csr_matmat_rows(indptr, indices, data, X, Y, start, stop)


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Immutable real symmetric matrix in CSR format (full pattern stored)."""

    n: int
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("matrix dimension must be >= 1")
        for name in ("indptr", "indices", "data"):
            getattr(self, name).setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def shape(self):
        return (self.n, self.n)

    @classmethod
    def from_scipy(cls, M, check=True) -> "SparseSymMatrix":
        M = sp.csr_matrix(M, dtype=np.float64)
        if M.shape[0] != M.shape[1]:
            raise ValueError(f"matrix is not square: {M.shape}")
        M.sum_duplicates()
        M.sort_indices()
        if check:
            _check_symmetric(M)
        return cls(
            M.shape[0],
            np.ascontiguousarray(M.indptr, dtype=np.int64),
            np.ascontiguousarray(M.indices, dtype=np.int64),
            np.ascontiguousarray(M.data, dtype=np.float64),
        )

    @classmethod
    def from_dense(cls, M) -> "SparseSymMatrix":
        M = np.asarray(M, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("expected a square 2-D array")
        return cls.from_scipy(sp.csr_matrix(M))

    @classmethod
    def diag(cls, d) -> "SparseSymMatrix":
        d = np.asarray(d, dtype=np.float64)
        return cls.from_scipy(sp.diags(d, format="csr"))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def diagonal(self) -> np.ndarray:
        return self.to_scipy().diagonal()

    def matmat(self, X: np.ndarray) -> np.ndarray:
        """Uncounted block product ``A @ X``."""
        X = _as_block(X)
        if X.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: A is {self.n}x{self.n}, X has {X.shape[0]} rows")
        Y = np.zeros((self.n, X.shape[1]))
        if X.shape[1] == 0:
            return Y
        if _threads > 0:
            _csr_matmat_par(self.indptr, self.indices, self.data, X, Y)
        else:
            _csr_matmat(self.indptr, self.indices, self.data, X, Y)
        return Y


def _as_block(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("expected an n x b block")
    return np.ascontiguousarray(X)


def _check_symmetric(M: sp.csr_matrix) -> None:
    T = M.T.tocsr()
    T.sort_indices()
    diff = abs(M - T)
    if diff.nnz == 0:
        return
    scale = abs(M).maximum(abs(T))
    diff = diff.tocoo()
    ref = np.asarray(scale[diff.row, diff.col]).ravel()
    bad = diff.data > ASYMMETRY_RTOL * ref
    if np.any(bad):
        i = int(diff.row[bad][0])
        j = int(diff.col[bad][0])
        raise ValueError(
            f"matrix is not symmetric: entry ({i + 1},{j + 1}) differs from ({j + 1},{i + 1})"
        )


class SpmvCounter:
    """Running count of matrix-vector products (one per block column)."""

    def __init__(self):
        self.count = 0

    def add(self, b: int) -> None:
        self.count += int(b)


def spmv_block(A: SparseSymMatrix, X, counter: SpmvCounter | None = None) -> np.ndarray:
    """Return ``A @ X``; ``counter`` is advanced by the number of columns."""
    Y = A.matmat(X)
    if counter is not None:
        counter.add(Y.shape[1])
    return Y


def shifted_spmv_block(A, shift: float, X, counter: SpmvCounter | None = None) -> np.ndarray:
    """Return ``(A - shift*I) @ X`` without forming the shifted matrix."""
    X = _as_block(X)
    Y = A.matmat(X)
    if counter is not None:
        counter.add(Y.shape[1])
    if shift != 0.0:
        Y -= shift * X
    return Y


def gershgorin_bounds(A: SparseSymMatrix) -> tuple[float, float]:
    """Interval containing every eigenvalue of ``A`` (union of Gershgorin discs)."""
    M = A.to_scipy()
    d = M.diagonal()
    radius = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(d)
    radius = np.maximum(radius, 0.0)
    return float(np.min(d - radius)), float(np.max(d + radius))


class SymOperator:
    """The operator ``scale*A + shift*I`` with an SpMV counter.

    Solver components only need ``n`` and ``matmat``; the driver wraps the
    user matrix in one of these per solve so that concurrent solves on the
    same matrix keep separate counts.
    """

    def __init__(self, matrix: SparseSymMatrix, scale: float = 1.0, shift: float = 0.0):
        if scale == 0.0:
            raise ValueError("scale must be nonzero")
        self.matrix = matrix
        self.scale = float(scale)
        self.shift = float(shift)
        self.counter = SpmvCounter()

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def spmv_count(self) -> int:
        return self.counter.count

    def matmat(self, X) -> np.ndarray:
        Y = spmv_block(self.matrix, X, self.counter)
        if self.scale != 1.0:
            Y *= self.scale
        if self.shift != 0.0:
            Y += self.shift * _as_block(X)
        return Y

    def to_original(self, mu):
        """Map eigenvalues of this operator back to eigenvalues of ``matrix``."""
        return (np.asarray(mu, dtype=np.float64) - self.shift) / self.scale

    def gershgorin_bounds(self) -> tuple[float, float]:
        lo, hi = gershgorin_bounds(self.matrix)
        lo, hi = self.scale * lo + self.shift, self.scale * hi + self.shift
        return (min(lo, hi), max(lo, hi))


def load_matrix_market(path) -> SparseSymMatrix:
    """Read a real coordinate Matrix Market file into a symmetric CSR matrix.

    ``symmetric`` files have their off-diagonal entries mirrored; ``general``
    files must already be symmetric to 1e-12 relative and are averaged with
    their transpose so the stored pattern is exactly symmetric.  Duplicate
    entries are summed.
    """
    path = Path(path)
    rows, cols, vals = [], [], []
    symmetry = None
    size = None
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket"):
            raise MatrixMarketError("missing %%MatrixMarket header", 1)
        parts = header.lower().split()
        if len(parts) != 5:
            raise MatrixMarketError("malformed header", 1)
        _, obj, fmt, field_, symmetry = parts
        if obj != "matrix" or fmt != "coordinate":
            raise MatrixMarketError("only 'matrix coordinate' files are supported", 1)
        if field_ not in ("real", "integer", "double"):
            raise MatrixMarketError(f"unsupported field '{field_}'", 1)
        if symmetry not in ("symmetric", "general"):
            raise MatrixMarketError(f"unsupported symmetry '{symmetry}'", 1)
        nentries = 0
        for lineno, line in enumerate(fh, start=2):
            s = line.strip()
            if not s or s.startswith("%"):
                continue
            tok = s.split()
            if size is None:
                try:
                    nr, nc, nz = (int(t) for t in tok[:3])
                except ValueError:
                    raise MatrixMarketError("bad size line", lineno) from None
                if len(tok) != 3:
                    raise MatrixMarketError("bad size line", lineno)
                if nr != nc:
                    raise MatrixMarketError(f"matrix is not square ({nr}x{nc})", lineno)
                if nr < 1:
                    raise MatrixMarketError("matrix dimension must be >= 1", lineno)
                size = (nr, nz)
                continue
            if len(tok) != 3:
                raise MatrixMarketError("expected 'row col value'", lineno)
            try:
                i, j, v = int(tok[0]), int(tok[1]), float(tok[2])
            except ValueError:
                raise MatrixMarketError("could not parse entry", lineno) from None
            if not (1 <= i <= size[0] and 1 <= j <= size[0]):
                raise MatrixMarketError(f"index ({i},{j}) out of range", lineno)
            if not np.isfinite(v):
                raise MatrixMarketError("non-finite value", lineno)
            rows.append(i - 1)
            cols.append(j - 1)
            vals.append(v)
            nentries += 1
    if size is None:
        raise MatrixMarketError("missing size line")
    if nentries != size[1]:
        raise MatrixMarketError(f"expected {size[1]} entries, found {nentries}")
    n = size[0]
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if symmetry == "symmetric":
        off = rows != cols
        r = np.concatenate([rows, cols[off]])
        c = np.concatenate([cols, rows[off]])
        v = np.concatenate([vals, vals[off]])
        M = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
        return SparseSymMatrix.from_scipy(M, check=False)
    M = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    try:
        _check_symmetric(M)
    except ValueError as exc:
        raise MatrixMarketError(str(exc)) from None
    M = ((M + M.T) * 0.5).tocsr()
    return SparseSymMatrix.from_scipy(M, check=False)


def write_matrix_market(path, A: SparseSymMatrix, comment: str | None = None) -> None:
    """Write ``A`` as a real symmetric coordinate file (lower triangle)."""
    M = A.to_scipy().tocoo()
    low = M.row >= M.col
    r, c, v = M.row[low], M.col[low], M.data[low]
    order = np.lexsort((r, c))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{A.n} {A.n} {len(v)}\n")
        for k in order:
            fh.write(f"{r[k] + 1} {c[k] + 1} {float(v[k])!r}\n")


_threads_from_env()
