"""Manufactured and semi-analytic verification problems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgument
from ..fem import DirichletBC, PinBC, System, Variable
from ..inputdsl.expression import Expression
from ..kernels import AdvectionConfig, WeakFormConfig, advection_kernels, ins_kernels
from ..mesh import build_interval_mesh, build_structured_quad_mesh, build_structured_tri_mesh, map_mesh
from .jeffery_hamel import jeffery_hamel_solve, jh_exact_fields
from .norms import fd_gradient, fd_laplacian, h1_seminorm_error, l2_error

# (mesh family, mesh order, velocity order, pressure order)
ELEMENTS = {
    "q1q1": ("QUAD", 1, 1, 1),
    "q2q1": ("QUAD", 2, 2, 1),
    "p1p1": ("TRI", 1, 1, 1),
    "p2p1": ("TRI", 2, 2, 1),
}


def element_spec(name):
    try:
        return ELEMENTS[name.lower()]
    except KeyError:
        raise InvalidArgument(f"unknown element pair {name!r}; choose from {sorted(ELEMENTS)}") from None


def build_mesh(family, nx, ny, domain, order):
    builder = build_structured_quad_mesh if family == "QUAD" else build_structured_tri_mesh
    return builder(nx, ny, domain, order)


def ins_variables(vel_order, p_order):
    return [Variable("vel_x", vel_order, "velocity"), Variable("vel_y", vel_order, "velocity"),
            Variable("p", p_order, "pressure")]


def lid_cavity_system(n=4, order=2, pspg=None, convective=False, mu=1.0, supg=False):
    """Unit-square cavity with lid ``u = 4x(1-x)`` and pressure pinned at the origin.

    Stokes by default; PSPG defaults to on for equal-order elements.
    """
    if pspg is None:
        pspg = order == 1
    cfg = WeakFormConfig(mu=mu, convective=convective, pspg=pspg, supg=supg)
    kernels, _ = ins_kernels(cfg)
    bcs = [
        DirichletBC("vel_x", "top", lambda x, t: 4 * x[:, 0] * (1 - x[:, 0])),
        DirichletBC("vel_x", ("left", "right", "bottom"), 0.0),
        DirichletBC("vel_y", ("left", "right", "bottom", "top"), 0.0),
        PinBC("p", point=(0.0, 0.0)),
    ]
    return System(build_structured_quad_mesh(n, n, order=order), ins_variables(order, 1), kernels, bcs)


# exact fields of the incompressible MMS problem

MMS_U = "(4*sin(pi*x/2) + 4*sin(pi*y) + 7*sin(pi*x*y/5) + 5)/10"
MMS_V = "(6*sin(4*pi*x/5) + 3*sin(3*pi*y/10) + 2*sin(3*pi*x*y/10) + 3)/10"
MMS_P = "(sin(pi*x/2) + 2*sin(3*pi*y/10) + sin(pi*x*y/5) + 1)/2"

# steady Laplace-form forcing, generated offline by symbolic differentiation of
# rho (u . grad) u - mu lap u + grad p
MMS_FX = (
    "7*pi^2*mu*x^2*sin(pi*x*y/5)/250 + 7*pi^2*mu*y^2*sin(pi*x*y/5)/250 + pi^2*mu*sin(pi*x/2)/10"
    " + 2*pi^2*mu*sin(pi*y)/5 + 21*pi*rho*x*sin(4*pi*x/5)*cos(pi*x*y/5)/250"
    " + 21*pi*rho*x*sin(3*pi*y/10)*cos(pi*x*y/5)/500 + 7*pi*rho*x*sin(3*pi*x*y/10)*cos(pi*x*y/5)/250"
    " + 21*pi*rho*x*cos(pi*x*y/5)/500 + 7*pi*rho*y*sin(pi*x/2)*cos(pi*x*y/5)/125"
    " + 7*pi*rho*y*sin(pi*y)*cos(pi*x*y/5)/125 + 49*pi*rho*y*sin(pi*x*y/5)*cos(pi*x*y/5)/500"
    " + 7*pi*rho*y*cos(pi*x*y/5)/100 + 2*pi*rho*sin(pi*x/2)*cos(pi*x/2)/25"
    " + 6*pi*rho*sin(4*pi*x/5)*cos(pi*y)/25 + 3*pi*rho*sin(3*pi*y/10)*cos(pi*y)/25"
    " + 2*pi*rho*sin(pi*y)*cos(pi*x/2)/25 + 7*pi*rho*sin(pi*x*y/5)*cos(pi*x/2)/50"
    " + 2*pi*rho*sin(3*pi*x*y/10)*cos(pi*y)/25 + pi*rho*cos(pi*x/2)/10 + 3*pi*rho*cos(pi*y)/25"
    " + pi*y*cos(pi*x*y/5)/10 + pi*cos(pi*x/2)/4"
)
MMS_FY = (
    "9*pi^2*mu*x^2*sin(3*pi*x*y/10)/500 + 9*pi^2*mu*y^2*sin(3*pi*x*y/10)/500 + 48*pi^2*mu*sin(4*pi*x/5)/125"
    " + 27*pi^2*mu*sin(3*pi*y/10)/1000 + 9*pi*rho*x*sin(4*pi*x/5)*cos(3*pi*x*y/10)/250"
    " + 9*pi*rho*x*sin(3*pi*y/10)*cos(3*pi*x*y/10)/500 + 3*pi*rho*x*sin(3*pi*x*y/10)*cos(3*pi*x*y/10)/250"
    " + 9*pi*rho*x*cos(3*pi*x*y/10)/500 + 3*pi*rho*y*sin(pi*x/2)*cos(3*pi*x*y/10)/125"
    " + 3*pi*rho*y*sin(pi*y)*cos(3*pi*x*y/10)/125 + 21*pi*rho*y*sin(pi*x*y/5)*cos(3*pi*x*y/10)/500"
    " + 3*pi*rho*y*cos(3*pi*x*y/10)/100 + 24*pi*rho*sin(pi*x/2)*cos(4*pi*x/5)/125"
    " + 27*pi*rho*sin(4*pi*x/5)*cos(3*pi*y/10)/500 + 27*pi*rho*sin(3*pi*y/10)*cos(3*pi*y/10)/1000"
    " + 24*pi*rho*sin(pi*y)*cos(4*pi*x/5)/125 + 42*pi*rho*sin(pi*x*y/5)*cos(4*pi*x/5)/125"
    " + 9*pi*rho*sin(3*pi*x*y/10)*cos(3*pi*y/10)/500 + 6*pi*rho*cos(4*pi*x/5)/25"
    " + 27*pi*rho*cos(3*pi*y/10)/1000 + pi*x*cos(pi*x*y/5)/10 + 3*pi*cos(3*pi*y/10)/10"
)

# div u of the exact velocity, the source of the continuity equation
MMS_DIV = "3*pi*x*cos(3*pi*x*y/10)/50 + 7*pi*y*cos(pi*x*y/5)/50 + pi*cos(pi*x/2)/5 + 9*pi*cos(3*pi*y/10)/100"

MMS_VISCOSITY = {"diffusion": 15.0, "advection": 1.5e-4}


def _field(expr):
    return lambda pts: expr.at_points(pts)


def _forcing(expr):
    return lambda pts, t=0.0: expr.at_points(pts, t)


@dataclass
class ManufacturedCase:
    """Exact fields (callables of points), forcing and material constants."""

    name: str
    exact: dict
    forcing: list
    params: dict = field(default_factory=dict)
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    exact_grad: dict = field(default_factory=dict)
    mass_source: object = None

    def gate(self, n=100, seed=0, h=1e-2):
        """Largest strong-form residual at random interior points, using finite
        differences of the exact fields.  Used to catch forcing typos."""
        rng = np.random.default_rng(seed)
        x0, x1, y0, y1 = self.domain
        pts = np.column_stack([rng.uniform(x0 + 0.05, x1 - 0.05, n), rng.uniform(y0 + 0.05, y1 - 0.05, n)])
        return float(np.max(np.abs(self.strong_residual(pts, h))))

    def strong_residual(self, pts, h=1e-2):
        raise NotImplementedError


@dataclass
class INSManufacturedCase(ManufacturedCase):
    def strong_residual(self, pts, h=1e-2):
        mu, rho = self.params["mu"], self.params["rho"]
        u, v, p = self.exact["vel_x"], self.exact["vel_y"], self.exact["p"]
        U = np.column_stack([u(pts), v(pts)])
        out = []
        for k, fk in enumerate((u, v)):
            g = fd_gradient(fk, pts, h)
            lap = fd_laplacian(fk, pts, h)
            gp = fd_gradient(p, pts, h)[:, k]
            out.append(rho * np.sum(U * g, axis=1) - mu * lap + gp - self.forcing[k](pts))
        div = fd_gradient(u, pts, h)[:, 0] + fd_gradient(v, pts, h)[:, 1]
        out.append(div - self.mass_source(pts))
        return np.array(out)


def ins_mms_case(regime="diffusion", mu=None, rho=1.0):
    """Steady Laplace-form manufactured solution on the unit square."""
    if mu is None:
        try:
            mu = MMS_VISCOSITY[regime]
        except KeyError:
            raise InvalidArgument(f"regime must be one of {sorted(MMS_VISCOSITY)}") from None
    c = {"mu": float(mu), "rho": float(rho)}
    exact = {"vel_x": _field(Expression(MMS_U)), "vel_y": _field(Expression(MMS_V)), "p": _field(Expression(MMS_P))}
    forcing = [_forcing(Expression(MMS_FX, c)), _forcing(Expression(MMS_FY, c))]
    return INSManufacturedCase(f"ins_mms_{regime}", exact, forcing, c, mass_source=_forcing(Expression(MMS_DIV)))


# scalar advection


def _advection_2d_forcing(pts, t=0.0):
    x, y = pts[:, 0], pts[:, 1]
    return (4 * np.sin(np.pi * x / 2) + 4 * np.sin(np.pi * y) + 7 * np.sin(np.pi * x * y / 5) + 5) / 10


def _advection_2d_forcing_y(x, y):
    return (4 * np.pi * np.cos(np.pi * y) + 7 * np.pi * x / 5 * np.cos(np.pi * x * y / 5)) / 10


_GL_S, _GL_W = np.polynomial.legendre.leggauss(24)


def advection_2d_exact(pts):
    """Integral of the forcing along the characteristic through (x, y) that
    starts on the line x = 0: ``u = int_0^x f(s, s + y - x) ds``."""
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    s = 0.5 * x[:, None] * (_GL_S[None] + 1.0)
    ys = s + (y - x)[:, None]
    f = _advection_2d_forcing(np.column_stack([s.ravel(), ys.ravel()])).reshape(s.shape)
    return 0.5 * x * (f @ _GL_W)


def advection_2d_exact_grad(pts):
    pts = np.atleast_2d(pts)
    x, y = pts[:, 0], pts[:, 1]
    s = 0.5 * x[:, None] * (_GL_S[None] + 1.0)
    ys = s + (y - x)[:, None]
    uy = 0.5 * x * (_advection_2d_forcing_y(s, ys) @ _GL_W)
    ux = _advection_2d_forcing(pts) - uy
    return np.column_stack([ux, uy])


@dataclass
class AdvectionCase(ManufacturedCase):
    velocity: tuple = (1.0,)
    inflow: tuple = ("left",)

    def strong_residual(self, pts, h=1e-2):
        u = self.exact["u"]
        pts = pts[:, : len(self.velocity)]
        g = fd_gradient(u, pts, h)
        return g @ np.asarray(self.velocity) - self.forcing[0](pts)


def scalar_advection_case(dim):
    if dim == 1:
        exact = {"u": lambda p: np.atleast_2d(p)[:, 0] - np.atleast_2d(p)[:, 0] ** 3 / 3}
        grad = {"u": lambda p: (1 - np.atleast_2d(p)[:, 0] ** 2)[:, None]}
        forcing = [lambda p, t=0.0: 1 - np.atleast_2d(p)[:, 0] ** 2]
        return AdvectionCase("advection_1d", exact, forcing, {}, (0.0, 1.0, 0.0, 0.0), grad,
                             velocity=(1.0,), inflow=("left",))
    if dim == 2:
        return AdvectionCase("advection_2d", {"u": advection_2d_exact}, [_advection_2d_forcing], {},
                             (0.0, 1.0, 0.0, 1.0), {"u": advection_2d_exact_grad},
                             velocity=(1.0, 1.0), inflow=("left", "bottom"))
    raise InvalidArgument("dim must be 1 or 2")


def _forcing_gate_advection_1d(case, n=100, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.05, 0.95, (n, 1))
    return float(np.max(np.abs(case.strong_residual(pts))))


# problem builders


@dataclass
class Problem:
    """A discrete problem with its exact solution, ready to solve."""

    system: System
    case: object
    h: float
    kind: str = ""

    def errors(self, y):
        raise NotImplementedError


def advection_problem(dim, n, order, supg=True, family="QUAD", qdegree=None):
    case = scalar_advection_case(dim)
    if dim == 1:
        mesh = build_interval_mesh(n, 0.0, 1.0, order)
    else:
        mesh = build_mesh(family, n, n, (0, 1, 0, 1), order)
    cfg = AdvectionConfig(velocity=case.velocity, forcing=case.forcing[0])
    exact = case.exact["u"]
    bcs = [DirichletBC("u", b, lambda x, t: exact(x)) for b in case.inflow]
    system = System(mesh, [Variable("u", order)], advection_kernels(cfg, supg), bcs, qdegree=qdegree)
    return system, case, 1.0 / n


def advection_errors(system, case, y):
    u = case.exact["u"]
    return {"l2_u": l2_error(system, y, "u", u), "h1_u": h1_seminorm_error(system, y, "u", u, case.exact_grad["u"])}


def ins_mms_problem(n, element="q1q1", regime="diffusion", mu=None, supg=None, pspg=None, qdegree=None):
    """Steady MMS problem with exact Dirichlet data for all variables on all sides."""
    case = ins_mms_case(regime, mu)
    fam, mo, vo, po = element_spec(element)
    if pspg is None:
        pspg = vo == po
    if supg is None:
        supg = True
    mesh = build_mesh(fam, n, n, (0, 1, 0, 1), mo)
    cfg = WeakFormConfig(mu=case.params["mu"], rho=case.params["rho"], supg=supg, pspg=pspg,
                         body_force=case.forcing, mass_source=case.mass_source)
    kernels, _ = ins_kernels(cfg)
    sides = ("left", "right", "bottom", "top")
    bcs = [DirichletBC(v, sides, (lambda f: lambda x, t: f(x))(case.exact[v])) for v in ("vel_x", "vel_y", "p")]
    system = System(mesh, ins_variables(vo, po), kernels, bcs, qdegree=qdegree)
    return system, case, 1.0 / n


def ins_errors(system, exact, y):
    vel = ["vel_x", "vel_y"]
    ev = [exact["vel_x"], exact["vel_y"]]
    return {
        "l2_u": l2_error(system, y, vel, ev),
        "h1_u": h1_seminorm_error(system, y, vel, ev),
        "l2_p": l2_error(system, y, "p", exact["p"]),
    }


def wedge_mesh(nr, nth, alpha, element="q2q1", r1=1.0, r2=2.0):
    """Structured (r, theta) grid mapped isoparametrically onto the wedge."""
    if nth % 2:
        raise InvalidArgument("use an even number of angular elements so a node lies on the centerline")
    fam, mo, _, _ = element_spec(element)
    m = build_mesh(fam, nr, nth, (r1, r2, -alpha, alpha), mo)
    return map_mesh(m, lambda p: np.column_stack([p[:, 0] * np.cos(p[:, 1]), p[:, 0] * np.sin(p[:, 1])]))


def jeffery_hamel_problem(n, element="q2q1", alpha_deg=15.0, Re=30.0, mu=1.0, rho=1.0, sol=None, qdegree=None,
                          supg=False):
    alpha = math.radians(alpha_deg)
    sol = sol or jeffery_hamel_solve(alpha, Re)
    fields = jh_exact_fields(sol, mu=mu, rho=rho)
    fam, mo, vo, po = element_spec(element)
    mesh = wedge_mesh(n, n, alpha, element)
    stabilized = vo == po
    cfg = WeakFormConfig(mu=mu, rho=rho, pspg=stabilized, supg=bool(supg))
    kernels, _ = ins_kernels(cfg)
    sides = ("left", "right", "bottom", "top")
    bcs = [DirichletBC("vel_x", sides, lambda x, t: fields.u1(x)),
           DirichletBC("vel_y", sides, lambda x, t: fields.u2(x)),
           PinBC("p", point=(1.0, 0.0), value=0.0)]
    system = System(mesh, ins_variables(vo, po), kernels, bcs, qdegree=qdegree)
    exact = {"vel_x": fields.u1, "vel_y": fields.u2, "p": fields.p}
    return system, exact, 1.0 / n, fields


# transient MMS whose spatial part lies in the Q2Q1 space, so only the time
# discretization contributes error


def _transient_amplitude(t):
    return 1.0 + np.sin(2.0 * t), 2.0 * np.cos(2.0 * t)


def transient_mms_fields(mu=1.0, rho=1.0):
    """Exact ``u = a(t) (y(1-y), x(1-x))``, ``p = a(t) (x + y)`` and forcing."""

    def u(pts, t=0.0):
        a, _ = _transient_amplitude(t)
        y = pts[:, 1]
        return a * y * (1 - y)

    def v(pts, t=0.0):
        a, _ = _transient_amplitude(t)
        x = pts[:, 0]
        return a * x * (1 - x)

    def p(pts, t=0.0):
        a, _ = _transient_amplitude(t)
        return a * (pts[:, 0] + pts[:, 1])

    def fx(pts, t=0.0):
        a, da = _transient_amplitude(t)
        x, y = pts[:, 0], pts[:, 1]
        return rho * da * y * (1 - y) + rho * a * a * x * (1 - x) * (1 - 2 * y) + 2 * mu * a + a

    def fy(pts, t=0.0):
        a, da = _transient_amplitude(t)
        x, y = pts[:, 0], pts[:, 1]
        return rho * da * x * (1 - x) + rho * a * a * y * (1 - y) * (1 - 2 * x) + 2 * mu * a + a

    return {"vel_x": u, "vel_y": v, "p": p}, [fx, fy]


def transient_mms_problem(n=4, element="q2q1", mu=1.0, rho=1.0):
    exact, forcing = transient_mms_fields(mu, rho)
    fam, mo, vo, po = element_spec(element)
    mesh = build_mesh(fam, n, n, (0, 1, 0, 1), mo)
    cfg = WeakFormConfig(mu=mu, rho=rho, transient=True, body_force=forcing)
    kernels, _ = ins_kernels(cfg)
    sides = ("left", "right", "bottom", "top")
    bcs = [DirichletBC("vel_x", sides, exact["vel_x"]), DirichletBC("vel_y", sides, exact["vel_y"]),
           PinBC("p", point=(0.0, 0.0), value=0.0)]
    system = System(mesh, ins_variables(vo, po), kernels, bcs, qdegree=7)
    return system, exact
