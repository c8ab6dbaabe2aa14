"""Weak-form integrands for incompressible flow and scalar advection.

Every kernel returns element residual rows ``(E, A)`` for its test variable
and analytic Jacobian blocks ``{trial: (E, A, B)}``.  Field values in the
quadrature data are taken at the theta-weighted state, so derivatives of
spatial terms carry a factor ``theta`` and time-derivative terms carry
``sigma1 = 1/dt``.  Stabilization parameters are treated as constants in
the Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidArgument
from .fem import RZ, XY, BoundaryKernel, Kernel

LAPLACE, TRACTION = "laplace", "traction"


def tau(dt, speed, h, nu, alpha=1.0):
    """Stabilization time scale.

    ``alpha * [(2/dt)^2 + (2|u|/h)^2 + 9 (4 nu / h^2)^2]^(-1/2)``; an infinite
    ``dt`` drops the transient term.  Arguments broadcast.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise InvalidArgument("element size must be positive")
    speed = np.asarray(speed, dtype=float)
    nu = np.asarray(nu, dtype=float)
    s = (2.0 * speed / h) ** 2 + 9.0 * (4.0 * nu / h**2) ** 2
    if math.isfinite(dt):
        s = s + (2.0 / dt) ** 2
    with np.errstate(divide="ignore"):
        return alpha / np.sqrt(s)


def _const_fn(c):
    c = float(c)
    return lambda x, t: np.full(x.shape[0], c)


def _component_fns(f, dim):
    if f is None:
        return [None] * dim
    if callable(f):
        return [lambda x, t, k=k: np.asarray(f(x, t))[..., k] for k in range(dim)]
    fns = [None if c is None else (c if callable(c) else _const_fn(c)) for c in f]
    if len(fns) != dim:
        raise InvalidArgument(f"body force needs {dim} components")
    return fns


def _eval_at_qp(fn, q):
    E, Q, d = q.xq.shape
    return np.asarray(fn(q.xq.reshape(-1, d), q.t), dtype=float).reshape(E, Q) if fn is not None else None


@dataclass
class WeakFormConfig:
    """Options shared by the incompressible flow kernels.

    ``body_force`` is either ``None``, a callable ``f(x, t) -> (n, dim)``, or a
    sequence of per-component callables ``f_k(x, t) -> (n,)`` or constants.
    """

    velocity: tuple = ("vel_x", "vel_y")
    pressure: str = "p"
    form: str = LAPLACE
    integrate_p_by_parts: bool = True
    convective: bool = True
    transient: bool = False
    supg: bool = False
    pspg: bool = False
    lsic: bool = False
    alpha: float = 1.0
    rho: float = 1.0
    mu: float = 1.0
    body_force: object = None
    coord: str = XY
    tau_lsic: float | None = None
    mass_source: object = None

    def __post_init__(self):
        self.form = self.form.lower()
        self.coord = self.coord.upper()
        self.velocity = tuple(self.velocity)
        if self.form not in (LAPLACE, TRACTION):
            raise InvalidArgument(f"unknown viscous form {self.form!r}")
        if not self.rho > 0 or not self.mu > 0:
            raise InvalidArgument("rho and mu must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgument("alpha must lie in [0, 1]")
        if self.coord not in (XY, RZ):
            raise InvalidArgument(f"unknown coordinate system {self.coord!r}")
        self._f = _component_fns(self.body_force, self.dim)

    @property
    def dim(self):
        return len(self.velocity)

    @property
    def nu(self):
        return self.mu / self.rho

    @property
    def lsic_coefficient(self):
        return 2.0 * self.nu / 3.0 if self.tau_lsic is None else float(self.tau_lsic)

    def force(self, k):
        return self._f[k]


# shared quadrature-point quantities


def _velocity(q, cfg):
    def build():
        U = np.stack([q.val[v] for v in cfg.velocity], axis=-1)
        G = np.stack([q.grad[v] for v in cfg.velocity], axis=-2)
        H = np.stack([q.hess[v] for v in cfg.velocity], axis=-3)
        Ud = np.stack([q.dot[v] for v in cfg.velocity], axis=-1)
        return U, G, H, Ud
    return q.cached(("vel", cfg.velocity), build)


def _tau(q, cfg):
    def build():
        U = np.stack([q.tau_val[v] for v in cfg.velocity], axis=-1)
        speed = np.linalg.norm(U, axis=-1)
        return tau(q.dt, speed, q.h[:, None], cfg.nu, cfg.alpha)
    return q.cached(("tau", id(cfg)), build)


def _divergence(q, cfg):
    U, G, _, _ = _velocity(q, cfg)
    div = np.trace(G, axis1=-2, axis2=-1)
    if q.coord == RZ:
        div = div + U[..., 0] / q.r
    return div


def _div_test(q, cfg, k):
    """div(phi_i e_k) for the velocity basis: (E, Q, A)."""
    b = q.basis[cfg.velocity[k]]
    d = b.grad[..., k]
    if q.coord == RZ and k == 0:
        d = d + b.phi[None] / q.r[..., None]
    return d


def strong_residual(q, cfg):
    """Strong momentum residual and its derivatives.

    Returns ``R (E, Q, d)``, ``dR_du (E, Q, d, d, A)`` indexed ``[k, m, j]``
    for trial velocity component ``m`` and ``dR_dp (E, Q, d, B)``.
    """
    return q.cached(("strong", id(cfg)), lambda: _strong(q, cfg))


def _strong(q, cfg):
    U, G, H, Ud = _velocity(q, cfg)
    b = q.basis[cfg.velocity[0]]
    bp = q.basis[cfg.pressure]
    E, Q, d = U.shape
    A = b.phi.shape[1]
    rho, mu, th = cfg.rho, cfg.mu, q.theta
    phi = np.broadcast_to(b.phi, (E, Q, A))
    R = np.zeros((E, Q, d))
    dR = np.zeros((E, Q, d, d, A))
    diag = np.zeros((E, Q, A))
    eye = np.eye(d)

    if cfg.transient:
        R += rho * Ud
        diag += rho * q.sigma1 * phi
    if cfg.convective:
        R += rho * np.einsum("eql,eqkl->eqk", U, G)
        diag += th * rho * np.einsum("eql,eqal->eqa", U, b.grad)
        dR += th * rho * np.einsum("eqa,eqkm->eqkma", phi, G)

    lap_phi = np.trace(b.hess, axis1=-2, axis2=-1)
    R -= mu * np.einsum("eqkii->eqk", H)
    diag -= th * mu * lap_phi
    rz = q.coord == RZ
    if rz:
        r = q.r
        R -= mu * G[..., :, 0] / r[..., None]
        R[..., 0] += mu * U[..., 0] / r**2
        diag -= th * mu * b.grad[..., 0] / r[..., None]
        dR[:, :, 0, 0] += th * mu * phi / r[..., None] ** 2
    if cfg.form == TRACTION:
        R -= mu * np.einsum("eqddk->eqk", H)
        dR -= th * mu * np.einsum("eqamk->eqkma", b.hess)
        if rz:
            R -= mu * G[..., 0, :] / r[..., None]
            R[..., 0] += mu * U[..., 0] / r**2
            dR[:, :, :, 0, :] -= th * mu * np.moveaxis(b.grad, -1, -2) / r[..., None, None]
            dR[:, :, 0, 0] += th * mu * phi / r[..., None] ** 2

    dR += np.einsum("km,eqa->eqkma", eye, diag)
    R += np.stack([q.grad[cfg.pressure][..., k] for k in range(d)], axis=-1)
    dRp = th * np.moveaxis(np.broadcast_to(bp.grad, (E, Q) + bp.grad.shape[2:]), -1, -2)
    for k in range(d):
        f = _eval_at_qp(cfg.force(k), q)
        if f is not None:
            R[..., k] -= f
    return R, dR, dRp


def _integrate(q, w, test):
    """sum_q JxW * w * test : (E, Q) x (E|1, Q, A) -> (E, A)."""
    return np.einsum("eq,eqa->ea", q.JxW * w, np.broadcast_to(test, (q.JxW.shape[0],) + test.shape[-2:]))


def _integrate2(q, w, test, trial):
    """sum_q JxW * w * test_i * trial_j -> (E, A, B)."""
    E = q.JxW.shape[0]
    test = np.broadcast_to(test, (E,) + test.shape[-2:])
    trial = np.broadcast_to(trial, (E,) + trial.shape[-2:])
    return np.einsum("eq,eqa,eqb->eab", q.JxW * w, test, trial)


class _MomentumKernel(Kernel):
    def __init__(self, cfg, component):
        if not 0 <= component < cfg.dim:
            raise InvalidArgument(f"component {component} out of range")
        self.cfg = cfg
        self.component = component
        self.variable = cfg.velocity[component]

    def _b(self, q):
        return q.basis[self.variable]


class MomentumTime(_MomentumKernel):
    """rho * du_k/dt * phi_i."""

    transient = True

    def residual(self, q):
        return _integrate(q, self.cfg.rho * q.dot[self.variable], self._b(q).phi[None])

    def jacobian(self, q):
        phi = self._b(q).phi[None]
        return {self.variable: _integrate2(q, self.cfg.rho * q.sigma1 * np.ones_like(q.JxW), phi, phi)}


class MomentumConvection(_MomentumKernel):
    """rho * (u . grad u_k) * phi_i."""

    def residual(self, q):
        U, G, _, _ = _velocity(q, self.cfg)
        k = self.component
        return _integrate(q, self.cfg.rho * np.einsum("eql,eql->eq", U, G[..., k, :]), self._b(q).phi[None])

    def jacobian(self, q):
        cfg, k = self.cfg, self.component
        U, G, _, _ = _velocity(q, cfg)
        b = self._b(q)
        w = cfg.rho * q.theta
        out = {}
        adv = np.einsum("eql,eqbl->eqb", U, b.grad)
        for m, vm in enumerate(cfg.velocity):
            blk = _integrate2(q, w * G[..., k, m], b.phi[None], b.phi[None])
            if m == k:
                blk = blk + _integrate2(q, w * np.ones_like(q.JxW), b.phi[None], adv)
            out[vm] = blk
        return out


class ViscousLaplace(_MomentumKernel):
    """mu * grad u_k . grad phi_i, plus mu u_r phi_i / r^2 for the radial RZ component."""

    def residual(self, q):
        cfg, k = self.cfg, self.component
        b = self._b(q)
        G = q.grad[self.variable]
        res = np.einsum("eq,eqd,eqad->ea", q.JxW * cfg.mu, G, b.grad)
        if q.coord == RZ and k == 0:
            res += _integrate(q, cfg.mu * q.val[self.variable] / q.r**2, b.phi[None])
        return res

    def jacobian(self, q):
        cfg, k = self.cfg, self.component
        b = self._b(q)
        w = q.JxW * cfg.mu * q.theta
        blk = np.einsum("eq,eqad,eqbd->eab", w, b.grad, b.grad)
        if q.coord == RZ and k == 0:
            blk += _integrate2(q, cfg.mu * q.theta / q.r**2, b.phi[None], b.phi[None])
        return {self.variable: blk}


class ViscousTraction(_MomentumKernel):
    """mu (grad u + grad u^T) : grad(phi_i e_k), plus 2 mu u_r phi_i / r^2 in RZ."""

    def residual(self, q):
        cfg, k = self.cfg, self.component
        U, G, _, _ = _velocity(q, cfg)
        b = self._b(q)
        S = G[..., k, :] + G[..., :, k]
        res = np.einsum("eq,eqd,eqad->ea", q.JxW * cfg.mu, S, b.grad)
        if q.coord == RZ and k == 0:
            res += _integrate(q, 2 * cfg.mu * U[..., 0] / q.r**2, b.phi[None])
        return res

    def jacobian(self, q):
        cfg, k = self.cfg, self.component
        w = q.JxW * cfg.mu * q.theta
        out = {}
        for m, vm in enumerate(cfg.velocity):
            bm = q.basis[vm]
            bk = self._b(q)
            blk = np.einsum("eq,eqa,eqb->eab", w, bk.grad[..., m], bm.grad[..., k])
            if m == k:
                blk = blk + np.einsum("eq,eqad,eqbd->eab", w, bk.grad, bm.grad)
                if q.coord == RZ and k == 0:
                    blk = blk + _integrate2(q, 2 * cfg.mu * q.theta / q.r**2, bk.phi[None], bm.phi[None])
            out[vm] = blk
        return out


class PressureGradient(_MomentumKernel):
    """Pressure term: -p div(phi_i e_k) by parts, otherwise dp/dx_k phi_i."""

    def residual(self, q):
        cfg, k = self.cfg, self.component
        if cfg.integrate_p_by_parts:
            return _integrate(q, -q.val[cfg.pressure], _div_test(q, cfg, k))
        return _integrate(q, q.grad[cfg.pressure][..., k], self._b(q).phi[None])

    def jacobian(self, q):
        cfg, k = self.cfg, self.component
        bp = q.basis[cfg.pressure]
        ones = np.ones_like(q.JxW)
        if cfg.integrate_p_by_parts:
            blk = _integrate2(q, -q.theta * ones, _div_test(q, cfg, k), bp.phi[None])
        else:
            blk = _integrate2(q, q.theta * ones, self._b(q).phi[None], bp.grad[..., k])
        return {cfg.pressure: blk}


class MomentumBodyForce(_MomentumKernel):
    """-f_k phi_i."""

    def residual(self, q):
        f = _eval_at_qp(self.cfg.force(self.component), q)
        if f is None:
            return np.zeros((q.n_elem, self._b(q).phi.shape[1]))
        return _integrate(q, -f, self._b(q).phi[None])


class MomentumSUPG(_MomentumKernel):
    """tau (u . grad phi_i) R_k with the strong residual R."""

    def residual(self, q):
        cfg, k = self.cfg, self.component
        U, _, _, _ = _velocity(q, cfg)
        R, _, _ = strong_residual(q, cfg)
        t = _tau(q, cfg)
        adv = np.einsum("eql,eqal->eqa", U, self._b(q).grad)
        return _integrate(q, t * R[..., k], adv)

    def jacobian(self, q):
        cfg, k = self.cfg, self.component
        U, _, _, _ = _velocity(q, cfg)
        R, dR, dRp = strong_residual(q, cfg)
        t = _tau(q, cfg)
        b = self._b(q)
        adv = np.einsum("eql,eqal->eqa", U, b.grad)
        w = q.JxW * t
        out = {}
        for m, vm in enumerate(cfg.velocity):
            blk = np.einsum("eq,eqa,eqb->eab", w, adv, dR[:, :, k, m])
            blk += np.einsum("eq,eqa,qb->eab", w * q.theta * R[..., k], b.grad[..., m], q.basis[vm].phi)
            out[vm] = blk
        out[cfg.pressure] = np.einsum("eq,eqa,eqb->eab", w, adv, dRp[:, :, k])
        return out


class MomentumLSIC(_MomentumKernel):
    """rho tau_lsic div(phi_i e_k) div u."""

    def residual(self, q):
        cfg, k = self.cfg, self.component
        c = cfg.rho * cfg.lsic_coefficient
        return _integrate(q, c * _divergence(q, cfg), _div_test(q, cfg, k))

    def jacobian(self, q):
        cfg, k = self.cfg, self.component
        c = cfg.rho * cfg.lsic_coefficient * q.theta * np.ones_like(q.JxW)
        test = _div_test(q, cfg, k)
        return {vm: _integrate2(q, c, test, _div_test(q, cfg, m)) for m, vm in enumerate(cfg.velocity)}


class Mass(Kernel):
    """-psi_i (div u - g) (with the u_r / r term in RZ)."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.variable = cfg.pressure

    def residual(self, q):
        div = _divergence(q, self.cfg)
        if self.cfg.mass_source is not None:
            src = self.cfg.mass_source
            div = div - (_eval_at_qp(src, q) if callable(src) else float(src))
        return _integrate(q, -div, q.basis[self.variable].phi[None])

    def jacobian(self, q):
        cfg = self.cfg
        psi = q.basis[self.variable].phi[None]
        w = -q.theta * np.ones_like(q.JxW)
        return {vm: _integrate2(q, w, psi, _div_test(q, cfg, m)) for m, vm in enumerate(cfg.velocity)}


class PSPG(Kernel):
    """-(tau / rho) grad psi_i . R on the pressure equation."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.variable = cfg.pressure

    def residual(self, q):
        cfg = self.cfg
        R, _, _ = strong_residual(q, cfg)
        t = _tau(q, cfg)
        gpsi = q.basis[self.variable].grad
        return -np.einsum("eq,eqk,eqak->ea", q.JxW * t / cfg.rho, R, gpsi)

    def jacobian(self, q):
        cfg = self.cfg
        _, dR, dRp = strong_residual(q, cfg)
        w = -q.JxW * _tau(q, cfg) / cfg.rho
        gpsi = q.basis[self.variable].grad
        out = {vm: np.einsum("eq,eqak,eqkb->eab", w, gpsi, dR[:, :, :, m]) for m, vm in enumerate(cfg.velocity)}
        out[cfg.pressure] = np.einsum("eq,eqak,eqkb->eab", w, gpsi, dRp)
        return out


class MomentumNoBC(BoundaryKernel):
    """Outflow term that cancels the boundary integral from integration by parts.

    Laplace form: ``-(mu grad u_k . n - p n_k) phi_i``; traction form:
    ``-(n . sigma)_k phi_i``.  The pressure part is present only when the
    pressure term is integrated by parts.
    """

    def __init__(self, cfg, component, boundaries):
        self.cfg = cfg
        self.component = component
        self.variable = cfg.velocity[component]
        self.boundaries = (boundaries,) if isinstance(boundaries, str) else tuple(boundaries)

    def _flux(self, q):
        cfg, k = self.cfg, self.component
        U, G, _, _ = _velocity(q, cfg)
        n = q.normal
        flux = cfg.mu * np.einsum("eqd,eqd->eq", G[..., k, :], n)
        if cfg.form == TRACTION:
            flux = flux + cfg.mu * np.einsum("eqd,eqd->eq", G[..., :, k], n)
        if cfg.integrate_p_by_parts:
            flux = flux - q.val[cfg.pressure] * n[..., k]
        return flux

    def residual(self, q):
        return _integrate(q, -self._flux(q), q.basis[self.variable].phi[None])

    def jacobian(self, q):
        cfg, k = self.cfg, self.component
        n = q.normal
        phi = q.basis[self.variable].phi[None]
        w = -q.theta * cfg.mu * np.ones_like(q.JxW)
        out = {}
        for m, vm in enumerate(cfg.velocity):
            gm = q.basis[vm].grad
            trial = np.zeros_like(gm[..., 0])
            if m == k:
                trial = trial + np.einsum("eqbd,eqd->eqb", gm, n)
            if cfg.form == TRACTION:
                trial = trial + gm[..., k] * n[..., m][..., None]
            if m == k or cfg.form == TRACTION:
                out[vm] = _integrate2(q, w, phi, trial)
        if cfg.integrate_p_by_parts:
            out[cfg.pressure] = _integrate2(q, q.theta * n[..., k], phi, q.basis[cfg.pressure].phi[None])
        return out


def ins_kernels(cfg, outflow=()):
    """Volume kernels (and optional outflow kernels) for a configuration.

    Returns ``(kernels, boundary_kernels)``.
    """
    ks = [Mass(cfg)]
    if cfg.pspg:
        ks.append(PSPG(cfg))
    for k in range(cfg.dim):
        if cfg.transient:
            ks.append(MomentumTime(cfg, k))
        if cfg.convective:
            ks.append(MomentumConvection(cfg, k))
        ks.append(ViscousLaplace(cfg, k) if cfg.form == LAPLACE else ViscousTraction(cfg, k))
        ks.append(PressureGradient(cfg, k))
        if any(f is not None for f in cfg._f):
            ks.append(MomentumBodyForce(cfg, k))
        if cfg.supg:
            ks.append(MomentumSUPG(cfg, k))
        if cfg.lsic:
            ks.append(MomentumLSIC(cfg, k))
    bks = [MomentumNoBC(cfg, k, outflow) for k in range(cfg.dim)] if outflow else []
    return ks, bks


# scalar advection


@dataclass
class AdvectionConfig:
    """Steady advection ``a . grad u = f`` of a scalar ``variable``."""

    velocity: object
    forcing: object = None
    variable: str = "u"
    alpha: float = 1.0
    diffusivity: float = 0.0

    def a(self, q):
        if callable(self.velocity):
            E, Q, d = q.xq.shape
            return np.asarray(self.velocity(q.xq.reshape(-1, d), q.t)).reshape(E, Q, d)
        a = np.asarray(self.velocity, dtype=float)[: q.dim]
        return np.broadcast_to(a, q.xq.shape)

    def f(self, q):
        if self.forcing is None:
            return np.zeros(q.JxW.shape)
        if callable(self.forcing):
            return _eval_at_qp(self.forcing, q)
        return np.full(q.JxW.shape, float(self.forcing))

    def tau(self, q):
        a = self.a(q)
        return tau(q.dt, np.linalg.norm(a, axis=-1), q.h[:, None], self.diffusivity, self.alpha)


class _ScalarKernel(Kernel):
    def __init__(self, cfg):
        self.cfg = cfg
        self.variable = cfg.variable


class Advection(_ScalarKernel):
    """(a . grad u) phi_i."""

    def residual(self, q):
        a = self.cfg.a(q)
        return _integrate(q, np.einsum("eqd,eqd->eq", a, q.grad[self.variable]), q.basis[self.variable].phi[None])

    def jacobian(self, q):
        b = q.basis[self.variable]
        adv = np.einsum("eqd,eqbd->eqb", self.cfg.a(q), b.grad)
        return {self.variable: _integrate2(q, q.theta * np.ones_like(q.JxW), b.phi[None], adv)}


class BodyForce(_ScalarKernel):
    """-f phi_i."""

    def residual(self, q):
        return _integrate(q, -self.cfg.f(q), q.basis[self.variable].phi[None])


class AdvectionSUPG(_ScalarKernel):
    """tau (a . grad phi_i)(a . grad u)."""

    def residual(self, q):
        a = self.cfg.a(q)
        b = q.basis[self.variable]
        test = np.einsum("eqd,eqad->eqa", a, b.grad)
        return _integrate(q, self.cfg.tau(q) * np.einsum("eqd,eqd->eq", a, q.grad[self.variable]), test)

    def jacobian(self, q):
        a = self.cfg.a(q)
        b = q.basis[self.variable]
        test = np.einsum("eqd,eqad->eqa", a, b.grad)
        return {self.variable: _integrate2(q, q.theta * self.cfg.tau(q), test, test)}


class BodyForceSUPG(_ScalarKernel):
    """-tau (a . grad phi_i) f."""

    def residual(self, q):
        a = self.cfg.a(q)
        test = np.einsum("eqd,eqad->eqa", a, q.basis[self.variable].grad)
        return _integrate(q, -self.cfg.tau(q) * self.cfg.f(q), test)


class Diffusion(Kernel):
    """k grad u . grad phi_i."""

    def __init__(self, variable, coef=1.0):
        self.variable = variable
        self.coef = float(coef)

    def residual(self, q):
        return np.einsum("eq,eqd,eqad->ea", q.JxW * self.coef, q.grad[self.variable], q.basis[self.variable].grad)

    def jacobian(self, q):
        g = q.basis[self.variable].grad
        return {self.variable: np.einsum("eq,eqad,eqbd->eab", q.JxW * self.coef * q.theta, g, g)}


class TimeDerivative(Kernel):
    """c du/dt phi_i."""

    transient = True

    def __init__(self, variable, coef=1.0):
        self.variable = variable
        self.coef = float(coef)

    def residual(self, q):
        return _integrate(q, self.coef * q.dot[self.variable], q.basis[self.variable].phi[None])

    def jacobian(self, q):
        phi = q.basis[self.variable].phi[None]
        return {self.variable: _integrate2(q, self.coef * q.sigma1 * np.ones_like(q.JxW), phi, phi)}


class Reaction(Kernel):
    """c u phi_i."""

    def __init__(self, variable, coef=1.0):
        self.variable = variable
        self.coef = float(coef)

    def residual(self, q):
        return _integrate(q, self.coef * q.val[self.variable], q.basis[self.variable].phi[None])

    def jacobian(self, q):
        phi = q.basis[self.variable].phi[None]
        return {self.variable: _integrate2(q, self.coef * q.theta * np.ones_like(q.JxW), phi, phi)}


def advection_kernels(cfg, supg=True):
    ks = [Advection(cfg), BodyForce(cfg)]
    if supg:
        ks += [AdvectionSUPG(cfg), BodyForceSUPG(cfg)]
    return ks
