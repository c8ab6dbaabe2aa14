"""Newton's method with optional backtracking and Jacobian-free Krylov solves."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, InvalidArgument, SingularMatrix
from .fieldsplit import FieldSplitOptions, FieldSplitSchur
from .ilu import ILU0, Jacobi
from .krylov import KrylovOptions, gmres
from .sparse import LUFactor, SparseMatrixCSR

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
LINE_SEARCHES = ("none", "basic")
SOLVE_TYPES = ("NEWTON", "PJFNK")


@dataclass
class NewtonOptions:
    nl_rel_tol: float = 1e-8
    nl_abs_tol: float = 1e-50
    nl_max_its: int = 50
    line_search: str = "none"
    solve_type: str = "NEWTON"

    def __post_init__(self):
        self.line_search = self.line_search.lower()
        self.solve_type = self.solve_type.upper()
        if not (self.nl_rel_tol > 0 and self.nl_abs_tol > 0):
            raise InvalidArgument("nonlinear tolerances must be positive")
        if self.nl_max_its < 1:
            raise InvalidArgument("nl_max_its must be at least 1")
        if self.line_search not in LINE_SEARCHES:
            raise ConfigurationError(f"line_search must be one of {LINE_SEARCHES}")
        if self.solve_type not in SOLVE_TYPES:
            raise ConfigurationError(f"solve_type must be one of {SOLVE_TYPES}")


@dataclass
class NewtonResult:
    y: np.ndarray
    converged: bool
    iterations: int
    history: list
    linear_iterations: list = field(default_factory=list)
    line_search_failures: int = 0
    reason: str = ""

    @property
    def status(self):
        return "converged" if self.converged else "diverged"


def jfnk_matvec(residual, y, v, F_y=None):
    """Finite-difference Jacobian action ``(F(y + eps v) - F(y)) / eps``."""
    v = np.asarray(v, dtype=float)
    vn = np.linalg.norm(v)
    if vn == 0.0:
        return np.zeros_like(v)
    y = np.asarray(y, dtype=float)
    eps = np.sqrt(_EPS) * (1.0 + np.linalg.norm(y)) / vn
    if F_y is None:
        F_y = residual(y)
    return (residual(y + eps * v) - F_y) / eps


def line_search_basic(residual, y, dy, F_norm=None, min_alpha=1e-4):
    """Backtrack by halving until the residual norm decreases.

    Returns ``(alpha, F_new, ok)``.  When no tried step reduces the norm the
    step with the smallest norm is returned and ``ok`` is False; ``alpha`` is
    always positive.
    """
    if F_norm is None:
        F_norm = np.linalg.norm(residual(y))
    alpha = 1.0
    best = None
    while alpha >= min_alpha:
        F = residual(y + alpha * dy)
        nrm = np.linalg.norm(F)
        if np.isfinite(nrm) and nrm < F_norm:
            return alpha, F, True
        if np.isfinite(nrm) and (best is None or nrm < best[2]):
            best = (alpha, F, nrm)
        alpha *= 0.5
    if best is None:
        alpha = alpha * 2
        return alpha, residual(y + alpha * dy), False
    return best[0], best[1], False


def make_preconditioner(J, kind="lu", fieldsplit=None):
    """Preconditioner action ``v -> M^-1 v`` built from an assembled matrix."""
    if callable(kind):
        return kind(J)
    kind = (kind or "none").lower()
    if kind in ("lu", "direct"):
        return LUFactor(J)
    if kind == "ilu":
        return ILU0(J)
    if kind == "jacobi":
        return Jacobi(J)
    if kind == "fieldsplit":
        return FieldSplitSchur(J, opts=fieldsplit or FieldSplitOptions())
    if kind == "none":
        return None
    raise ConfigurationError(f"unknown preconditioner {kind!r}")


def newton_solve(residual, jacobian, y0, nopts=None, kopts=None, fieldsplit=None, callback=None):
    """Solve ``F(y) = 0``.

    Parameters
    ----------
    residual : callable
        ``y -> F(y)``.
    jacobian : callable
        ``y -> J(y)``; in PJFNK mode only used to build the preconditioner.
    y0 : ndarray
    nopts, kopts : NewtonOptions, KrylovOptions
    fieldsplit : FieldSplitOptions, optional
        Used when ``kopts.preconditioner == "fieldsplit"``.

    Stops when ``|F| <= nl_abs_tol`` or ``|F| <= nl_rel_tol * |F(y0)|``.
    """
    nopts = nopts or NewtonOptions()
    kopts = kopts or KrylovOptions()
    y = np.array(y0, dtype=float)
    F = residual(y)
    f0 = np.linalg.norm(F)
    if not np.isfinite(f0):
        raise InvalidArgument("residual is not finite at the initial guess")
    history = [f0]
    lin_its = []
    ls_fail = 0
    direct = nopts.solve_type == "NEWTON" and str(kopts.preconditioner).lower() in ("lu", "direct")
    for it in range(nopts.nl_max_its + 1):
        fn = history[-1]
        if fn <= nopts.nl_abs_tol or fn <= nopts.nl_rel_tol * f0:
            return NewtonResult(y, True, it, history, lin_its, ls_fail, "tolerance")
        if it == nopts.nl_max_its:
            break
        J = jacobian(y)
        try:
            if direct:
                dy = -LUFactor(J).solve(F)
                lin_its.append(1)
            else:
                M = make_preconditioner(J, kopts.preconditioner, fieldsplit)
                if nopts.solve_type == "PJFNK":
                    Fy = F
                    op = lambda v: jfnk_matvec(residual, y, v, Fy)
                else:
                    op = J.to_scipy() if isinstance(J, SparseMatrixCSR) else J
                res = gmres(op, -F, M, kopts)
                dy = res.x
                lin_its.append(res.iterations)
        except SingularMatrix as exc:
            return NewtonResult(y, False, it, history, lin_its, ls_fail, f"singular Jacobian: {exc}")
        if nopts.line_search == "basic":
            alpha, F_new, ok = line_search_basic(residual, y, dy, fn)
            if not ok:
                ls_fail += 1
                log.warning("line search failed to reduce the residual; accepting alpha=%g", alpha)
        else:
            alpha, F_new = 1.0, residual(y + dy)
        y = y + alpha * dy
        F = F_new
        nrm = np.linalg.norm(F)
        history.append(nrm)
        if callback is not None:
            callback(it + 1, y, nrm)
        log.debug("newton it %d |F| = %.6e", it + 1, nrm)
        if not np.isfinite(nrm):
            return NewtonResult(y, False, it + 1, history, lin_its, ls_fail, "non-finite residual")
    return NewtonResult(y, False, nopts.nl_max_its, history, lin_its, ls_fail, "max iterations")
