"""Incomplete LU with zero fill and point Jacobi preconditioners."""

from __future__ import annotations

import numba
import numpy as np

from ..errors import ZeroPivot
from .sparse import _as_csr


@numba.njit(cache=True)
def _ilu0_factor(indptr, indices, data, diag_pos, shift):
    n = indptr.shape[0] - 1
    lu = data.copy()
    marker = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            marker[indices[p]] = p
        for p in range(indptr[i], diag_pos[i]):
            k = indices[p]
            piv = lu[diag_pos[k]]
            lu[p] /= piv
            lik = lu[p]
            for q in range(diag_pos[k] + 1, indptr[k + 1]):
                j = indices[q]
                pos = marker[j]
                if pos >= 0:
                    lu[pos] -= lik * lu[q]
        d = lu[diag_pos[i]]
        if abs(d) <= 1e-300:
            if shift > 0.0:
                lu[diag_pos[i]] = shift
            else:
                return lu, i
        for p in range(indptr[i], indptr[i + 1]):
            marker[indices[p]] = -1
    return lu, -1


@numba.njit(cache=True)
def _ilu0_solve(indptr, indices, lu, diag_pos, b):
    n = b.shape[0]
    x = b.copy()
    for i in range(n):
        s = x[i]
        for p in range(indptr[i], diag_pos[i]):
            s -= lu[p] * x[indices[p]]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for p in range(diag_pos[i] + 1, indptr[i + 1]):
            s -= lu[p] * x[indices[p]]
        x[i] = s / lu[diag_pos[i]]
    return x


class ILU0:
    """ILU(0): L and U restricted to the sparsity pattern of ``A``.

    A zero pivot raises :class:`ZeroPivot` unless ``shift`` is positive, in
    which case the pivot is replaced by ``shift`` and recorded in
    ``shifted_rows``.
    """

    def __init__(self, A, shift=0.0):
        M = _as_csr(A).copy()
        M.sum_duplicates()
        M.sort_indices()
        n = M.shape[0]
        indptr = M.indptr.astype(np.int64)
        indices = M.indices.astype(np.int64)
        diag_pos = np.full(n, -1, dtype=np.int64)
        for i in range(n):
            row = indices[indptr[i]:indptr[i + 1]]
            hit = np.searchsorted(row, i)
            if hit < len(row) and row[hit] == i:
                diag_pos[i] = indptr[i] + hit
        missing = np.nonzero(diag_pos < 0)[0]
        if len(missing):
            raise ZeroPivot(f"structurally zero diagonal in row {missing[0]}")
        self.shifted_rows = []
        lu, bad = _ilu0_factor(indptr, indices, M.data.astype(float), diag_pos, float(shift))
        if bad >= 0:
            raise ZeroPivot(f"zero pivot in row {bad}")
        if shift > 0:
            self.shifted_rows = list(np.nonzero(np.abs(M.data[diag_pos]) <= 1e-300)[0])
        self._args = (indptr, indices, lu, diag_pos)
        self.shape = M.shape

    def __call__(self, b):
        return _ilu0_solve(*self._args, np.asarray(b, dtype=float))

    solve = __call__


def ilu0(A, shift=0.0):
    """Return the ILU(0) preconditioner action for ``A``."""
    return ILU0(A, shift)


class Jacobi:
    def __init__(self, A):
        d = _as_csr(A).diagonal()
        if np.any(d == 0):
            raise ZeroPivot("zero diagonal entry")
        self.inv = 1.0 / d

    def __call__(self, b):
        return self.inv * b
