"""Restarted right-preconditioned GMRES."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lstsq

from ..errors import InvalidArgument


@dataclass
class KrylovOptions:
    l_tol: float = 1e-6
    l_max_its: int = 200
    restart: int = 30
    preconditioner: str = "lu"
    l_abs_tol: float = 0.0

    def __post_init__(self):
        if self.restart < 1 or self.l_max_its < 1:
            raise InvalidArgument("restart and l_max_its must be at least 1")
        if not self.l_tol > 0:
            raise InvalidArgument("l_tol must be positive")


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: list = field(default_factory=list)


def _as_action(A):
    if A is None:
        return lambda v: v
    if callable(A) and not (isinstance(A, np.ndarray) or sp.issparse(A)):
        return A
    return lambda v: A @ v


def gmres(A, b, M=None, opts=None, x0=None):
    """Solve ``A x = b`` with GMRES(m), preconditioned on the right.

    Parameters
    ----------
    A : matrix or callable
        Operator or its action ``v -> A v``.
    b : ndarray
    M : matrix or callable, optional
        Action of the preconditioner inverse, ``v -> M^-1 v``.
    opts : KrylovOptions, optional

    Returns
    -------
    GMRESResult
        ``residuals`` records the true residual norm at each restart and the
        Arnoldi estimate after each inner iteration.
    """
    opts = opts or KrylovOptions()
    Aop, Mop = _as_action(A), _as_action(M)
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise InvalidArgument("right-hand side is not finite")
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    target = max(opts.l_tol * bnorm, opts.l_abs_tol)
    history = []
    if bnorm == 0.0:
        return GMRESResult(np.zeros(n), 0, True, [0.0])
    its = 0
    best_x, best_r = x.copy(), np.inf
    m = opts.restart
    while True:
        r = b - Aop(x)
        beta = np.linalg.norm(r)
        history.append(beta)
        if beta < best_r:
            best_x, best_r = x.copy(), beta
        if beta <= target:
            return GMRESResult(x, its, True, history)
        if its >= opts.l_max_its:
            return GMRESResult(best_x, its, False, history)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        V[0] = r / beta
        # Givens rotations
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        k_used = 0
        happy = False
        for k in range(m):
            Z[k] = Mop(V[k])
            w = Aop(Z[k])
            for i in range(k + 1):
                H[i, k] = w @ V[i]
                w = w - H[i, k] * V[i]
            # one reorthogonalization pass
            for i in range(k + 1):
                c = w @ V[i]
                H[i, k] += c
                w = w - c * V[i]
            H[k + 1, k] = np.linalg.norm(w)
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            hk1 = H[k + 1, k]
            if denom == 0.0:
                cs[k], sn[k] = 1.0, 0.0
            else:
                cs[k], sn[k] = H[k, k] / denom, hk1 / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            its += 1
            k_used = k + 1
            history.append(abs(g[k + 1]))
            if hk1 <= 1e-14 * beta:
                happy = True
            if abs(g[k + 1]) <= target or happy or its >= opts.l_max_its:
                break
            V[k + 1] = w / hk1
        y, *_ = lstsq(np.triu(H[:k_used, :k_used]), g[:k_used])
        x = x + Z[:k_used].T @ y
        if happy:
            r = b - Aop(x)
            rn = np.linalg.norm(r)
            history.append(rn)
            if rn <= max(target, 1e-12 * bnorm):
                return GMRESResult(x, its, True, history)
