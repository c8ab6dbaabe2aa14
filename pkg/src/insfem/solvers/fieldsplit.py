"""Block LDU (Schur complement) preconditioning for velocity-pressure systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigurationError, InvalidArgument
from .sparse import LUFactor, SparseMatrixCSR, _as_csr

SCHUR_OPTIONS = ("a11", "selfp", "full")
FACT_TYPES = ("diag", "lower", "upper", "full")


@dataclass
class FieldSplitOptions:
    schur_precondition: str = "selfp"
    fact_type: str = "full"
    velocity_solver: str = "lu"
    schur_solver: str = "lu"

    def __post_init__(self):
        self.schur_precondition = self.schur_precondition.lower()
        self.fact_type = self.fact_type.lower()
        if self.schur_precondition not in SCHUR_OPTIONS:
            raise ConfigurationError(f"schur_precondition must be one of {SCHUR_OPTIONS}")
        if self.fact_type not in FACT_TYPES:
            raise ConfigurationError(f"fact_type must be one of {FACT_TYPES}")


def split_blocks(A, u_idx, p_idx):
    """Return ``(B_uu, B_up, B_pu, B_pp)`` as CSR matrices."""
    M = _as_csr(A)
    Mu, Mp = M[u_idx], M[p_idx]
    return Mu[:, u_idx].tocsr(), Mu[:, p_idx].tocsr(), Mp[:, u_idx].tocsr(), Mp[:, p_idx].tocsr()


def schur_approximation(B_uu, B_up, B_pu, B_pp, kind, constrained_p=()):
    """The matrix used for the Schur complement solve.

    ``a11`` uses ``B_pp``; ``selfp`` uses ``B_pp - B_pu diag(B_uu)^-1 B_up``;
    ``full`` forms the exact complement densely.
    """
    if kind == "a11":
        mask = np.ones(B_pp.shape[0], dtype=bool)
        mask[np.asarray(constrained_p, dtype=np.int64)] = False
        free = B_pp[np.nonzero(mask)[0]]
        if free.nnz == 0 or np.all(free.data == 0):
            raise ConfigurationError("a11 Schur approximation needs a nonzero pressure block (enable PSPG)")
        return B_pp.tocsr()
    if kind == "selfp":
        d = B_uu.diagonal()
        if np.any(d == 0):
            raise ConfigurationError("selfp needs a nonzero velocity diagonal")
        return (B_pp - B_pu @ sp.diags(1.0 / d) @ B_up).tocsr()
    if kind == "full":
        lu = LUFactor(B_uu)
        X = lu.solve(B_up.toarray()) if B_up.shape[1] else np.zeros(B_up.shape)
        return sp.csr_matrix(B_pp.toarray() - B_pu @ X)
    raise ConfigurationError(f"unknown Schur option {kind!r}")


class FieldSplitSchur:
    """Right preconditioner built from the block factorization

    ``[[B_uu, B_up], [B_pu, B_pp]] = [[I, 0], [B_pu A^-1, I]] [[A, 0], [0, S]] [[I, A^-1 B_up], [0, I]]``

    with ``A = B_uu`` and ``S`` replaced by the chosen approximation.
    """

    def __init__(self, A, u_idx=None, p_idx=None, opts=None):
        opts = opts or FieldSplitOptions()
        if u_idx is None or p_idx is None:
            if not isinstance(A, SparseMatrixCSR) or "p" not in A.blocks and len(A.blocks) < 2:
                raise InvalidArgument("block index sets required")
            names = list(A.blocks)
            p_name = "p" if "p" in A.blocks else names[-1]
            p_idx = A.blocks[p_name]
            u_idx = np.sort(np.concatenate([A.blocks[n] for n in names if n != p_name]))
        self.u_idx = np.asarray(u_idx, dtype=np.int64)
        self.p_idx = np.asarray(p_idx, dtype=np.int64)
        self.n = len(self.u_idx) + len(self.p_idx)
        self.opts = opts
        B_uu, B_up, B_pu, B_pp = split_blocks(A, self.u_idx, self.p_idx)
        constrained_p = []
        if isinstance(A, SparseMatrixCSR) and len(A.constrained):
            pos = {int(g): i for i, g in enumerate(self.p_idx)}
            constrained_p = [pos[int(c)] for c in A.constrained if int(c) in pos]
        self.B_up, self.B_pu = B_up, B_pu
        self.S_hat = schur_approximation(B_uu, B_up, B_pu, B_pp, opts.schur_precondition, constrained_p)
        self.A_inv = LUFactor(B_uu)
        self.S_inv = LUFactor(self.S_hat)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        ru, rp = r[self.u_idx], r[self.p_idx]
        ft = self.opts.fact_type
        if ft == "diag":
            xu, xp = self.A_inv(ru), self.S_inv(rp)
        elif ft == "lower":
            xu = self.A_inv(ru)
            xp = self.S_inv(rp - self.B_pu @ xu)
        elif ft == "upper":
            xp = self.S_inv(rp)
            xu = self.A_inv(ru - self.B_up @ xp)
        else:
            yu = self.A_inv(ru)
            xp = self.S_inv(rp - self.B_pu @ yu)
            xu = self.A_inv(ru - self.B_up @ xp)
        out = np.empty(self.n)
        out[self.u_idx] = xu
        out[self.p_idx] = xp
        return out


def fieldsplit_schur_apply(A, rhs, opts=None, u_idx=None, p_idx=None):
    """Apply the field-split preconditioner for ``A`` to ``rhs``."""
    return FieldSplitSchur(A, u_idx, p_idx, opts)(rhs)
