"""Discrete error norms and convergence-rate fitting."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument
from ..fem import RZ
from ..mesh import MAX_QUADRATURE_DEGREE, compute_geometry, map_basis, quadrature_for


_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def _stencil(fn, x, d, h, coef):
    e = np.zeros(x.shape[1])
    e[d] = h
    return sum(c * fn(x + (i - 4) * e) for i, c in enumerate(coef) if c != 0.0)


def fd_gradient(fn, x, h=1e-2):
    """Eighth-order central-difference gradient of ``fn(points) -> (n,)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for d in range(x.shape[1]):
        g[:, d] = _stencil(fn, x, d, h, _D1) / h
    return g


def fd_laplacian(fn, x, h=1e-2):
    """Eighth-order central-difference Laplacian of ``fn(points) -> (n,)``."""
    x = np.asarray(x, dtype=float)
    return sum(_stencil(fn, x, d, h, _D2) for d in range(x.shape[1])) / h**2


def _norm_data(system, variable, degree):
    mesh = system.mesh
    order = system.dofmap.refs[variable].order
    deg = min(2 * order + 3 if degree is None else degree, MAX_QUADRATURE_DEGREE)
    rule = quadrature_for(mesh.ref.family, deg)
    geom = compute_geometry(mesh, rule.points, rule.weights)
    basis = map_basis(geom, system.dofmap.refs[variable])
    w = geom.JxW
    if system.coord == RZ:
        w = w * geom.xq[..., 0]
    return geom, basis, w


def _as_list(variables, exact):
    if isinstance(variables, str):
        return [variables], [exact]
    return list(variables), list(exact)


def l2_error(system, y, variables, exact, degree=None):
    """L2 norm of ``u_h - u``; vector fields sum component contributions.

    ``exact`` is a callable ``f(points) -> (n,)`` or a list of them matching
    ``variables``.
    """
    names, fns = _as_list(variables, exact)
    total = 0.0
    for name, fn in zip(names, fns):
        geom, b, w = _norm_data(system, name, degree)
        c = np.asarray(y)[system.dofmap.elem_dofs[name]]
        uh = c @ b.phi.T
        E, Q, d = geom.xq.shape
        u = np.asarray(fn(geom.xq.reshape(-1, d)), dtype=float).reshape(E, Q)
        total += np.sum(w * (uh - u) ** 2)
    return float(np.sqrt(total))


def h1_seminorm_error(system, y, variables, exact, exact_grad=None, degree=None):
    """H1 seminorm of ``u_h - u``.

    Exact gradients come from ``exact_grad`` (callables returning ``(n, d)``)
    or, when omitted, a fourth-order finite difference of ``exact``.
    """
    names, fns = _as_list(variables, exact)
    if exact_grad is None:
        grads = [None] * len(names)
    else:
        grads = [exact_grad] if isinstance(variables, str) else list(exact_grad)
    total = 0.0
    for name, fn, gfn in zip(names, fns, grads):
        geom, b, w = _norm_data(system, name, degree)
        c = np.asarray(y)[system.dofmap.elem_dofs[name]]
        gh = np.einsum("eqad,ea->eqd", b.grad, c)
        E, Q, d = geom.xq.shape
        pts = geom.xq.reshape(-1, d)
        g = np.asarray(gfn(pts) if gfn is not None else fd_gradient(fn, pts)).reshape(E, Q, d)
        total += np.sum(w * np.sum((gh - g) ** 2, axis=-1))
    return float(np.sqrt(total))


def fit_rate(h, errors):
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(h) != len(e) or len(h) < 2:
        raise InvalidArgument("need at least two (h, error) pairs")
    if np.any(h <= 0) or np.any(e <= 0):
        raise InvalidArgument("h and errors must be positive")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


@dataclass
class ConvergenceStudy:
    """Errors per refinement level; ``errors`` maps a norm name to a list."""

    h: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)
    label: str = ""

    def add(self, h, **errs):
        if self.h and not h < self.h[-1]:
            raise InvalidArgument("h must be strictly decreasing")
        self.h.append(float(h))
        for k, v in errs.items():
            self.errors.setdefault(k, []).append(float(v))

    @property
    def slopes(self):
        return {k: fit_rate(self.h, v) for k, v in self.errors.items()}

    def table(self):
        names = list(self.errors)
        lines = ["h," + ",".join(names)]
        for i, h in enumerate(self.h):
            lines.append(repr(h) + "," + ",".join(repr(self.errors[n][i]) for n in names))
        if len(self.h) >= 2:
            s = self.slopes
            lines.append("slope," + ",".join(repr(round(s[n], 6)) for n in names))
        return "\n".join(lines)

    def write_csv(self, path):
        names = list(self.errors)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h"] + names)
            for i, h in enumerate(self.h):
                w.writerow([repr(h)] + [repr(self.errors[n][i]) for n in names])
            if len(self.h) >= 2:
                s = self.slopes
                w.writerow(["slope"] + [repr(s[n]) for n in names])
