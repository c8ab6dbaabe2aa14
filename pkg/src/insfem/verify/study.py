"""Refinement studies built on the verification problems."""

from __future__ import annotations

import logging
import math

import numpy as np

from ..errors import InvalidArgument, TimestepTooSmall
from ..solvers import NewtonOptions
from ..timeloop import TRANSIENT, AdaptiveDT, Executioner, ExecutionerOptions, adapt_dt, steady_solve, theta_step
from .cases import (
    MMS_VISCOSITY,
    advection_errors,
    advection_problem,
    ins_errors,
    ins_mms_problem,
    jeffery_hamel_problem,
    transient_mms_problem,
)
from .checks import Check, SuiteResult, at_least, at_most, timed, within
from .jeffery_hamel import jeffery_hamel_solve
from .properties import suite_jacobian, suite_parser, suite_solvers
from .norms import ConvergenceStudy, l2_error

log = logging.getLogger(__name__)

TIGHT = NewtonOptions(nl_rel_tol=1e-12, nl_abs_tol=1e-11, nl_max_its=30)


def _check_levels(levels):
    levels = [int(n) for n in levels]
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise InvalidArgument("levels must be at least two increasing element counts")
    return levels


def _solve(system, y0=None, nopts=TIGHT):
    res = steady_solve(system, y0, nopts=nopts)
    if not res.converged:
        raise RuntimeError(f"steady solve failed: {res.reason}")
    return res


def advection_study(dim, order, levels, family="QUAD", supg=True):
    """Steady SUPG scalar advection on ``n = levels[i]`` elements per direction."""
    st = ConvergenceStudy(label=f"advection {dim}D order {order} {family}")
    for n in _check_levels(levels):
        system, case, h = advection_problem(dim, n, order, supg=supg, family=family)
        res = _solve(system)
        st.add(h, **advection_errors(system, case, res.y))
    return st


def viscosity_ladder(mu, start=15.0, factor=10.0):
    """Viscosities from ``start`` down to ``mu`` used for continuation."""
    out = [start]
    while out[-1] / factor > mu * (1 + 1e-12):
        out.append(out[-1] / factor)
    if not math.isclose(out[-1], mu):
        out.append(mu)
    return out


def solve_ins_mms(n, element="q1q1", regime="diffusion", mu=None, nopts=TIGHT, qdegree=None):
    """Solve the steady MMS problem, continuing in viscosity when it is small.

    A zero initial guess lies outside Newton's basin for the advection-dominated
    case, so the solve walks down a ladder of viscosities, each forced
    consistently, and uses the previous solution as the next initial guess.
    """
    mu = MMS_VISCOSITY[regime] if mu is None else float(mu)
    ladder = viscosity_ladder(mu) if mu < 1.0 else [mu]
    y = None
    for m in ladder:
        system, case, h = ins_mms_problem(n, element, regime, mu=m, qdegree=qdegree)
        y = _solve(system, y, nopts).y
    return system, case, h, y


def ins_mms_study(element, regime, levels, qdegree=None):
    st = ConvergenceStudy(label=f"INS MMS {element} {regime}")
    for n in _check_levels(levels):
        system, case, h, y = solve_ins_mms(n, element, regime, qdegree=qdegree)
        st.add(h, **ins_errors(system, case.exact, y))
    return st


def jeffery_hamel_study(element, levels, alpha_deg=15.0, Re=30.0, sol=None):
    sol = sol or jeffery_hamel_solve(math.radians(alpha_deg), Re)
    st = ConvergenceStudy(label=f"Jeffery-Hamel {element}")
    for n in _check_levels(levels):
        system, exact, h, _ = jeffery_hamel_problem(n, element, alpha_deg, Re, sol=sol)
        res = _solve(system)
        st.add(h, **ins_errors(system, exact, res.y))
    return st


def temporal_study(theta, dts, end_time=1.0, n=4):
    """Velocity L2 error at ``end_time`` against the time step.

    The exact fields are polynomial in space and representable by Q2Q1, so the
    error is purely temporal.
    """
    system, exact = transient_mms_problem(n)
    st = ConvergenceStudy(label=f"theta={theta}")
    nopts = NewtonOptions(nl_rel_tol=1e-13, nl_abs_tol=1e-12)
    for dt in sorted(dts, reverse=True):
        steps = int(round(end_time / dt))
        if not math.isclose(steps * dt, end_time):
            raise InvalidArgument("end_time must be a multiple of every dt")
        y = system.dofmap.interpolant({k: (lambda f: lambda x: f(x, 0.0))(f) for k, f in exact.items()})
        t = 0.0
        for _ in range(steps):
            y = theta_step(system, y, t, dt, theta, nopts).y
            t += dt
        err = l2_error(system, y, ["vel_x", "vel_y"],
                       [lambda x: exact["vel_x"](x, end_time), lambda x: exact["vel_y"](x, end_time)])
        st.add(dt, l2_u=err)
    return st


@timed
def suite_advection():
    r = SuiteResult("scalar advection SUPG")
    fine1d, fine2d = [8, 16, 32, 64, 128], [8, 16, 32, 64]
    cases = [
        ("P1", advection_study(1, 1, fine1d), ("l2_u", ">=", 2.3), ("h1_u", 1.0, 0.15)),
        ("P2", advection_study(1, 2, fine1d), ("l2_u", 3.0, 0.2), ("h1_u", 2.0, 0.2)),
        ("Q1", advection_study(2, 1, fine2d), ("l2_u", ">=", 1.9), ("h1_u", 1.0, 0.15)),
        ("Q2", advection_study(2, 2, fine2d), ("l2_u", 3.0, 0.2), ("h1_u", 2.0, 0.2)),
    ]
    for label, st, *targets in cases:
        r.tables.append(f"-- {label}\n{st.table()}")
        s = st.slopes
        for key, a, b in targets:
            name = f"{label} {key} slope"
            r.checks.append(at_least(name, s[key], b) if a == ">=" else within(name, s[key], a, b))
    return r


MMS_TARGETS = {
    ("q1q1", "diffusion"): ((2.0, 0.15), (1.0, 0.15), (1.0, 0.25)),
    ("q2q1", "diffusion"): ((3.0, 0.2), (2.0, 0.2), (2.0, 0.25)),
    ("q1q1", "advection"): ((2.0, 0.2), (1.0, 0.2), (2.0, 0.3)),
    ("q2q1", "advection"): ((2.0, 0.3), (1.0, 0.3), (2.0, 0.3)),
}


@timed
def suite_mms(levels=(8, 16, 32, 64)):
    r = SuiteResult("INS manufactured solutions")
    for (element, regime), targets in MMS_TARGETS.items():
        st = ins_mms_study(element, regime, levels)
        r.tables.append(f"-- {element} {regime}\n{st.table()}")
        s = st.slopes
        for key, (c, tol) in zip(("l2_u", "h1_u", "l2_p"), targets):
            r.checks.append(within(f"{element} {regime} {key} slope", s[key], c, tol))
    return r


@timed
def suite_jeffery_hamel(levels=(16, 32, 64)):
    from .jeffery_hamel import K_REFERENCE, stokes_profile

    r = SuiteResult("Jeffery-Hamel")
    alpha = math.radians(15.0)
    sol = jeffery_hamel_solve(alpha, 30.0)
    r.checks.append(at_most("K error", abs(sol.K - K_REFERENCE), 1e-6))
    stokes = jeffery_hamel_solve(alpha, 0.0)
    eta = np.linspace(0.0, 1.0, 201)
    r.checks.append(at_most("Stokes profile error", float(np.max(np.abs(stokes.profile(eta) - stokes_profile(alpha, eta)))), 1e-8))
    st2 = jeffery_hamel_study("q2q1", levels, sol=sol)
    st1 = jeffery_hamel_study("q1q1", levels, sol=sol)
    r.tables += [f"K = {sol.K:.12f}", f"-- q2q1\n{st2.table()}", f"-- q1q1 + PSPG\n{st1.table()}"]
    r.checks += [
        within("q2q1 l2_u slope", st2.slopes["l2_u"], 3.0, 0.2),
        within("q2q1 l2_p slope", st2.slopes["l2_p"], 2.0, 0.25),
        within("q1q1 l2_p slope", st1.slopes["l2_p"], 1.0, 0.25),
    ]
    return r


@timed
def suite_temporal():
    r = SuiteResult("temporal order")
    dts = [0.1, 0.05, 0.025, 0.0125]
    for theta, order in ((1.0, 1.0), (0.5, 2.0)):
        st = temporal_study(theta, dts)
        r.tables.append(f"-- theta = {theta}\n{st.table()}")
        r.checks.append(within(f"theta={theta} slope", st.slopes["l2_u"], order, 0.1))
    listing = AdaptiveDT(optimal_iterations=5, growth_factor=1.2, cutback_factor=0.4)
    r.checks += [
        within("adapted dt after 3 iterations", adapt_dt(0.5, 3, listing), 0.6, 1e-15),
        within("adapted dt after 7 iterations", adapt_dt(0.5, 7, listing), 0.2, 1e-15),
    ]
    aborted = _dtmin_aborts()
    r.checks.append(Check("dtmin abort raises", float(aborted), "timestep-too-small", aborted))
    return r


def _dtmin_aborts():
    """A step that cannot converge in one iteration, retried below ``dtmin``."""
    from ..kernels import MomentumTime
    from .cases import lid_cavity_system

    s = lid_cavity_system(3, order=1, convective=True, supg=True, mu=1e-3)
    cfg = s.kernels[0].cfg
    cfg.transient = True
    s.kernels += [MomentumTime(cfg, 0), MomentumTime(cfg, 1)]
    opts = ExecutionerOptions(mode=TRANSIENT, dt0=8e-4, dtmin=5e-4, num_steps=3,
                              newton=NewtonOptions(nl_rel_tol=1e-14, nl_abs_tol=1e-14, nl_max_its=1))
    try:
        Executioner(s, opts).run()
    except TimestepTooSmall:
        return True
    return False


def _mirror_index(nodes, decimals=9):
    key = {(round(a, decimals), round(b, decimals)): i for i, (a, b) in enumerate(nodes)}
    return np.array([key[(round(1.0 - a, decimals), round(b, decimals))] for a, b in nodes])


@timed
def suite_cavity(Re=1000.0, n=64, stokes_n=16):
    from ..output import nodal_field
    from ..presets import run_case_lid_cavity

    r = SuiteResult("lid-driven cavity")
    _, res = run_case_lid_cavity(Re, n)
    system = res.system
    speed = np.hypot(nodal_field(system, res.y, "vel_x"), nodal_field(system, res.y, "vel_y"))
    top = np.isclose(system.mesh.nodes[:, 1], 1.0)
    r.tables.append(f"Re={Re:g} n={n}: {len(res.run.steps)} steps, t = {res.run.time:.6g}")
    r.checks += [
        Check(f"Re={Re:g} steady state reached", float(res.run.steady_state), "true", bool(res.run.steady_state)),
        at_most("max |u| on lid", float(speed[top].max()), 1.0 + 1e-6),
        Check("interior max |u|", float(speed[~top].max()), "< 1", bool(speed[~top].max() < 1.0)),
    ]
    pin = res.y[system.dofmap.node_dofs["p"][system.mesh.find_node((0.0, 0.0))]]
    r.checks.append(Check("pinned pressure", float(pin), "== 0", bool(pin == 0.0)))
    _, st = run_case_lid_cavity(1.0, stokes_n, stokes=True)
    u = nodal_field(st.system, st.y, "vel_x")
    asym = float(np.max(np.abs(u - u[_mirror_index(st.system.mesh.nodes)])))
    r.checks.append(at_most("Stokes u1(x,y) - u1(1-x,y)", asym, 1e-6))
    return r


@timed
def suite_cone():
    from ..presets import run_case_axisymmetric_cone

    r = SuiteResult("axisymmetric cone")
    _, res = run_case_axisymmetric_cone(0.5)
    q_in, q_out = res.last("flow_in"), res.last("flow_out")
    r.tables.append(f"creeping: Q_in = {q_in:.15g}, Q_out = {q_out:.15g}")
    r.checks += [
        at_most("|Q_in| - pi/8", abs(abs(q_in) - math.pi / 8.0), 1e-10),
        at_most("|Q_in + Q_out| / |Q_in|", abs(q_in + q_out) / abs(q_in), 1e-8),
        at_least("creeping min u_z", res.last("min_uz"), -1e-8),
    ]
    _, adv = run_case_axisymmetric_cone(1000.0, num_steps=60)
    v = adv.last("min_uz")
    r.checks.append(Check("Re=1000 min u_z (reverse flow)", v, "< 0", bool(v < 0.0)))
    return r


SUITES = {
    "advection": suite_advection,
    "mms": suite_mms,
    "jeffery_hamel": suite_jeffery_hamel,
    "cone": suite_cone,
    "jacobian": suite_jacobian,
    "solvers": suite_solvers,
    "temporal": suite_temporal,
    "parser": suite_parser,
    "cavity": suite_cavity,
}


def run_convergence_study(case, element="q1q1", levels=(8, 16, 32), regime="diffusion"):
    """Dispatch a named study: ``mms``, ``jeffery_hamel`` or ``advection1d/2d``."""
    case = case.lower()
    if case == "mms":
        return ins_mms_study(element, regime, levels)
    if case == "jeffery_hamel":
        return jeffery_hamel_study(element, levels)
    if case in ("advection1d", "advection2d"):
        order = 2 if element.lower() in ("q2q1", "p2p1") else 1
        family = "TRI" if element.lower().startswith("p") else "QUAD"
        return advection_study(int(case[-2]), order, levels, family=family)
    raise InvalidArgument(f"unknown study {case!r}; choose mms, jeffery_hamel, advection1d or advection2d")
