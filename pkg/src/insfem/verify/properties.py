"""Property suites for the Jacobians, the linear solvers and the input parser."""

from __future__ import annotations

import itertools
import string
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigurationError
from ..fem import RZ, XY, System
from ..inputdsl.builder import load_simulation
from ..inputdsl.expression import parse_expression
from ..inputdsl.hit import Section, parse_hit, render, substitute_dbe
from ..kernels import WeakFormConfig, ins_kernels
from ..mesh import build_structured_quad_mesh, build_structured_tri_mesh, map_mesh
from ..solvers import FieldSplitOptions, FieldSplitSchur, KrylovOptions, NewtonOptions, gmres, schur_approximation
from ..timeloop import steady_solve
from .cases import ins_mms_problem, ins_variables, lid_cavity_system
from .checks import Check, SuiteResult, at_most, timed

DATA = Path(__file__).resolve().parents[1] / "data"
LISTING_FILES = ("listing_global_params.i", "listing_kernels.i", "listing_functions_materials.i",
                 "listing_executioner.i")
ELEMENT_TYPES = ("QUAD4", "QUAD9", "TRI3", "TRI6")


def listing_texts():
    return [(DATA / name).read_text() for name in LISTING_FILES]


# Jacobians


def fd_jacobian_error(system, y, eps=1e-7, seed=11, **kw):
    """Relative gap between ``J v`` and a forward difference of the residual, tau frozen at ``y``."""
    v = np.random.default_rng(seed).normal(size=system.n_dofs)
    Jv = system.jacobian(y, tau_state=y, **kw).to_scipy() @ v
    F0 = system.residual(y, tau_state=y, **kw)
    fd = (system.residual(y + eps * v, tau_state=y, **kw) - F0) / eps
    return float(np.linalg.norm(Jv - fd) / max(np.linalg.norm(Jv), 1e-300))


def _distorted_mesh(elem):
    order = 2 if elem[-1] in "69" else 1
    build = build_structured_quad_mesh if elem.startswith("QUAD") else build_structured_tri_mesh
    m = build(3, 3, (0.2, 1.3, 0.0, 1.0), order)
    return map_mesh(m, lambda x: x + 0.04 * np.sin(3 * x[:, ::-1]))


def _force(x, t):
    return np.stack([np.sin(x[:, 0]) + t, x[:, 1] ** 2], axis=-1)


def kernel_jacobian_errors(coord, form, seed=7):
    """Worst FD error per kernel class over all element types.

    Each kernel is assembled on its own with SUPG, PSPG, LSIC, a body force
    and outflow boundaries on, once steady with the pressure integrated by
    parts and once transient (theta = 1/2) without.
    """
    rng = np.random.default_rng(seed)
    worst = {}
    for elem in ELEMENT_TYPES:
        mesh = _distorted_mesh(elem)
        for transient, by_parts in ((False, True), (True, False)):
            cfg = WeakFormConfig(form=form, coord=coord, integrate_p_by_parts=by_parts, supg=True, pspg=True,
                                 lsic=True, transient=transient, rho=1.3, mu=0.7, body_force=_force)
            ks, bks = ins_kernels(cfg, outflow=["right", "top"])
            for k in ks + bks:
                vol, bnd = ([k], []) if k in ks else ([], [k])
                s = System(mesh, ins_variables(mesh.order, 1), kernels=vol, boundary_kernels=bnd, coord=coord)
                y = rng.normal(size=s.n_dofs)
                kw = dict(y_old=rng.normal(size=s.n_dofs), t=0.3, dt=0.1, theta=0.5) if transient else {}
                name = type(k).__name__
                worst[name] = max(worst.get(name, 0.0), fd_jacobian_error(s, y, **kw))
    return worst


@timed
def suite_jacobian(tol=1e-5):
    r = SuiteResult("Jacobian vs finite differences")
    for coord, form in itertools.product((XY, RZ), ("laplace", "traction")):
        worst = kernel_jacobian_errors(coord, form)
        r.tables.append(f"{coord} {form}: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
        r.checks.append(at_most(f"{coord} {form} worst relative error", max(worst.values()), tol))
    return r


# linear and nonlinear solvers


def _stokes_rhs(system):
    y0 = system.impose_constraints(np.zeros(system.n_dofs))
    return system.jacobian(y0), -system.residual(y0)


@timed
def suite_solvers():
    r = SuiteResult("solvers")
    A, b = _stokes_rhs(lid_cavity_system(8, order=2))
    M = FieldSplitSchur(A, opts=FieldSplitOptions("full", "full"))
    res = gmres(A.to_scipy(), b, M, KrylovOptions(l_tol=1e-10))
    rel = float(np.linalg.norm(b - A.to_scipy() @ res.x) / np.linalg.norm(b))
    r.checks += [
        Check("full/full outer GMRES iterations", res.iterations, "== 1", res.converged and res.iterations == 1),
        at_most("full/full relative residual", rel, 1e-10),
    ]

    S = schur_approximation(sp.csr_matrix(np.diag([2.0, 4.0])), sp.csr_matrix([[1.0], [1.0]]),
                            sp.csr_matrix([[1.0, 1.0]]), sp.csr_matrix([[0.1]]), "selfp")
    v = float(S.toarray()[0, 0])
    r.checks.append(Check("selfp 1x1 example", v, "== -0.65", v == -0.65))

    A2, _ = _stokes_rhs(lid_cavity_system(3, order=2, pspg=False))
    try:
        FieldSplitSchur(A2, opts=FieldSplitOptions("a11", "full"))
        raised = False
    except ConfigurationError:
        raised = True
    r.checks.append(Check("a11 without PSPG raises", float(raised), "configuration error", raised))

    s, _, _ = ins_mms_problem(8, "q1q1", "diffusion")
    tight = dict(nl_rel_tol=1e-12, nl_abs_tol=1e-11)
    direct = steady_solve(s, nopts=NewtonOptions(**tight))
    jf = steady_solve(s, nopts=NewtonOptions(solve_type="PJFNK", **tight),
                      kopts=KrylovOptions(l_tol=1e-10, preconditioner="ilu", l_max_its=500))
    gap = float(np.abs(direct.y - jf.y).max()) if direct.converged and jf.converged else float("inf")
    r.checks.append(at_most("PJFNK vs NEWTON max difference", gap, 1e-8))
    return r


# parser

_NAME_START = string.ascii_letters + "_"
_NAME_REST = _NAME_START + string.digits
_VALUE_CHARS = string.ascii_letters + string.digits + " _-+.*/^()#[]=,:;$'\"{}éμ"


def _random_name(rng):
    n = int(rng.integers(0, 8))
    return rng.choice(list(_NAME_START)) + "".join(rng.choice(list(_NAME_REST), n))


def _random_value(rng):
    v = "".join(rng.choice(list(_VALUE_CHARS), int(rng.integers(0, 12))))
    return v.replace('"', "") if "'" in v and '"' in v else v


def _random_params(rng, n_max=4):
    return {_random_name(rng): _random_value(rng) for _ in range(int(rng.integers(0, n_max + 1)))}


def random_tree(rng, depth=3):
    """A random :class:`Section` tree that the renderer can represent."""

    def section(d):
        sec = Section(_random_name(rng), _random_params(rng))
        if d > 0:
            for _ in range(int(rng.integers(0, 3))):
                child = section(d - 1)
                sec.children.setdefault(child.name, child)
        return sec

    root = Section("", _random_params(rng, 3))
    for _ in range(int(rng.integers(0, 4))):
        s = section(int(rng.integers(0, depth)))
        root.children.setdefault(s.name, s)
    return root


def round_trip_failures(n=200, seed=2024):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        tree = random_tree(rng)
        if parse_hit(render(tree)) != tree:
            bad += 1
    return bad


@timed
def suite_parser():
    r = SuiteResult("input parser")
    texts = listing_texts()
    parsed = 0
    for text in texts:
        parse_hit(text)
        parsed += 1
    whole = "\n".join(texts)
    spec = load_simulation(whole, "listings.i")
    r.checks.append(Check("listings parsed verbatim", parsed, f"== {len(texts)}", parsed == len(texts)))
    mu_text = "'1  4e-3'" in substitute_dbe(whole)
    r.checks.append(Check("substituted mu", spec.materials.get("mu", float("nan")), "== 0.004",
                          mu_text and spec.materials.get("mu") == 4e-3))
    a = spec.executioner.adaptive
    ok = (a.growth_factor, a.cutback_factor, a.optimal_iterations) == (1.2, 0.4, 5)
    r.checks.append(Check("executioner listing adaptive constants", float(ok), "1.2 / 0.4 / 5", ok))
    f = spec.functions["inlet_func"]
    r.checks.append(at_most("inlet_func at origin minus 1", abs(f(0.0, 0.0) - 1.0), 1e-15))
    r.checks.append(at_most("inlet_func on channel wall", abs(f(2.0, 0.3)), 0.0))
    r.checks.append(at_most("4x(1-x) at x=1/2 minus 1", abs(parse_expression("4*x*(1-x)")(0.5) - 1.0), 0.0))
    bad = round_trip_failures(200)
    r.checks.append(Check("round-trip failures in 200 random trees", bad, "== 0", bad == 0))
    return r
