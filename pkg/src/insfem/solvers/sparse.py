"""Compressed sparse row storage with field-split block bookkeeping."""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import InvalidArgument, SingularMatrix


class SparseMatrixCSR:
    """A square or rectangular CSR matrix with optional named index blocks.

    Parameters
    ----------
    matrix : scipy sparse matrix or array_like
        Converted to canonical CSR (sorted columns, no duplicates).
    blocks : dict, optional
        Maps a field name (``"u"``, ``"p"``, ...) to an integer index array.
    constrained : array_like, optional
        Rows replaced by identity rows during constraint application.
    """

    def __init__(self, matrix, blocks=None, constrained=None):
        A = sp.csr_matrix(matrix, dtype=float)
        A.sum_duplicates()
        A.sort_indices()
        self._A = A
        self.blocks = {k: np.asarray(v, dtype=np.int64) for k, v in (blocks or {}).items()}
        self.constrained = np.zeros(0, dtype=np.int64) if constrained is None else np.asarray(constrained, dtype=np.int64)
        if self.blocks:
            allidx = np.sort(np.concatenate(list(self.blocks.values())))
            if len(allidx) != A.shape[0] or np.any(allidx != np.arange(A.shape[0])):
                raise InvalidArgument("block index sets must partition the rows")

    @classmethod
    def from_dense(cls, dense, **kw):
        return cls(sp.csr_matrix(np.asarray(dense, dtype=float)), **kw)

    @property
    def indptr(self):
        return self._A.indptr

    @property
    def indices(self):
        return self._A.indices

    @property
    def data(self):
        return self._A.data

    @property
    def shape(self):
        return self._A.shape

    @property
    def nnz(self):
        return self._A.nnz

    def to_scipy(self):
        return self._A

    def toarray(self):
        return self._A.toarray()

    def block(self, row_field, col_field):
        r, c = self.blocks[row_field], self.blocks[col_field]
        return self._A[r][:, c]

    def __matmul__(self, x):
        return spmv(self, x)

    def with_blocks(self, blocks, constrained=None):
        return SparseMatrixCSR(self._A, blocks, self.constrained if constrained is None else constrained)


def _as_csr(A):
    if isinstance(A, SparseMatrixCSR):
        return A.to_scipy()
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.asarray(A, dtype=float))


def spmv(A, x):
    """Return ``A @ x``."""
    M = _as_csr(A)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != M.shape[1]:
        raise InvalidArgument(f"shape mismatch: matrix {M.shape} with vector of length {x.shape[0]}")
    return M @ x


class LUFactor:
    """Sparse LU factorization (SuperLU) with a singularity check."""

    def __init__(self, A, pivot_tol=1e-14):
        M = _as_csr(A)
        if M.shape[0] != M.shape[1]:
            raise InvalidArgument("LU needs a square matrix")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", spla.MatrixRankWarning)
                self._lu = spla.splu(M.tocsc())
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise SingularMatrix(f"LU factorization failed: {exc}") from None
        d = np.abs(self._lu.U.diagonal())
        scale = max(abs(M).max(), 1e-300) if M.nnz else 1.0
        if d.size and (not np.all(np.isfinite(d)) or d.min() <= pivot_tol * scale):
            raise SingularMatrix(f"pivot {d.min():.3e} below tolerance")
        self.shape = M.shape

    def solve(self, b):
        x = self._lu.solve(np.asarray(b, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SingularMatrix("non-finite solution from LU")
        return x

    __call__ = solve


def lu_direct(A, b):
    """Solve ``A x = b`` with a sparse direct factorization."""
    return LUFactor(A).solve(b)


def write_matrix_market(A, path):
    """Dump ``A`` in MatrixMarket coordinate format (1-based indices)."""
    M = _as_csr(A).tocoo()
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{M.shape[0]} {M.shape[1]} {M.nnz}\n")
        order = np.lexsort((M.col, M.row))
        for i, j, v in zip(M.row[order], M.col[order], M.data[order]):
            fh.write(f"{i + 1} {j + 1} {v:.17g}\n")


def read_matrix_market(path):
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket matrix coordinate real general"):
            raise InvalidArgument("unsupported MatrixMarket header")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        m, n, nnz = map(int, line.split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    return SparseMatrixCSR(sp.coo_matrix((data[:, 2], (data[:, 0].astype(int) - 1, data[:, 1].astype(int) - 1)), shape=(m, n)))
