"""Turn a parsed input tree into a runnable simulation.

Object types follow the MOOSE naming used by the navier_stokes module so input
files written for it read naturally; each type maps onto one or more of the
package's kernels.  ``[GlobalParams]`` entries are offered to every object and
used where the type accepts them; keys set locally win.
"""

from __future__ import annotations

import logging
import math
import shlex
import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import kernels as K
from ..errors import ConfigurationError, ParseError
from ..fem import PRESSURE, RZ, SCALAR, VELOCITY, XY, DirichletBC, System, Variable
from ..mesh import (
    QUAD,
    TRI,
    build_conical_diffuser_mesh,
    build_interval_mesh,
    build_structured_quad_mesh,
    build_structured_tri_mesh,
    map_mesh,
)
from ..postprocessors import Postprocessor
from ..solvers import FieldSplitOptions, KrylovOptions, NewtonOptions
from ..timeloop import STEADY, TRANSIENT, AdaptiveDT, ExecutionerOptions
from .expression import Expression
from .hit import Section, parse_hit, substitute_dbe

log = logging.getLogger(__name__)

KNOWN_SECTIONS = ("GlobalParams", "Mesh", "Problem", "Variables", "Functions", "Materials", "Kernels", "BCs",
                  "Executioner", "Preconditioning", "Postprocessors", "Outputs")


@dataclass
class ObjectSpec:
    """One ``[./name]`` block with GlobalParams merged in."""

    name: str
    type: str
    params: dict
    local: dict
    section: Section = field(repr=False, compare=False, default=None)

    def error(self, msg, key=None):
        return self.section.error(msg, key) if self.section is not None else ParseError(msg)

    def has(self, key):
        return key in self.params

    def str(self, key, default=None, required=False):
        if key not in self.params:
            if required:
                raise self.error(f"{self.type} {self.name!r}: missing required parameter {key!r}")
            return default
        return self.params[key]

    def bool(self, key, default=False):
        if key not in self.params:
            return default
        v = self.params[key].strip().lower()
        if v in ("true", "yes", "on", "1"):
            return True
        if v in ("false", "no", "off", "0"):
            return False
        raise self.error(f"{self.type} {self.name!r}: {key!r} expects true or false, got {self.params[key]!r}", key)

    def float(self, key, default=None, required=False):
        v = self.str(key, None, required)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise self.error(f"{self.type} {self.name!r}: {key!r} expects a number, got {v!r}", key) from None

    def int(self, key, default=None, required=False):
        v = self.float(key, None, required)
        if v is None:
            return default
        if v != int(v):
            raise self.error(f"{self.type} {self.name!r}: {key!r} expects an integer", key)
        return int(v)

    def list(self, key, default=None, required=False):
        v = self.str(key, None, required)
        return default if v is None else v.split()

    def floats(self, key, default=None, required=False):
        items = self.list(key, None, required)
        if items is None:
            return default
        try:
            return [float(x) for x in items]
        except ValueError:
            raise self.error(f"{self.type} {self.name!r}: {key!r} expects numbers", key) from None


# object type registry: type -> (required keys, optional keys)

_INS_COMMON = {"u", "v", "w", "p", "mu_name", "rho_name", "gravity", "supg", "pspg", "lsic", "tau_lsic", "alpha",
               "laplace", "convective_term", "integrate_p_by_parts", "transient_term",
               "x_vel_forcing_func", "y_vel_forcing_func", "z_vel_forcing_func", "mass_source_func"}

KERNEL_TYPES = {
    "INSMass": ({"variable", "u", "p"}, _INS_COMMON),
    "INSMassRZ": ({"variable", "u", "p"}, _INS_COMMON),
    "INSMomentumTimeDerivative": ({"variable", "u"}, _INS_COMMON),
    "INSMomentumLaplaceForm": ({"variable", "component", "u", "p"}, _INS_COMMON),
    "INSMomentumTractionForm": ({"variable", "component", "u", "p"}, _INS_COMMON),
    "INSMomentumLaplaceFormRZ": ({"variable", "component", "u", "p"}, _INS_COMMON),
    "INSMomentumTractionFormRZ": ({"variable", "component", "u", "p"}, _INS_COMMON),
    "Diffusion": ({"variable"}, {"coef"}),
    "TimeDerivative": ({"variable"}, {"coef"}),
    "Reaction": ({"variable"}, {"coef"}),
    "BodyForce": ({"variable"}, {"function", "value"}),
    "Advection": ({"variable", "velocity"}, {"forcing_func", "supg", "alpha"}),
}

BC_TYPES = {
    "DirichletBC": ({"variable", "boundary"}, {"value"}),
    "FunctionDirichletBC": ({"variable", "boundary", "function"}, set()),
    "INSMomentumNoBCBCLaplaceForm": ({"variable", "boundary", "component", "u", "p"}, _INS_COMMON),
    "INSMomentumNoBCBCTractionForm": ({"variable", "boundary", "component", "u", "p"}, _INS_COMMON),
}

POSTPROCESSOR_TYPES = {
    "VolumetricFlowRate": ({"boundary"}, {"vel_x", "vel_y", "u", "v"}),
    "ElementL2Error": ({"variable", "function"}, set()),
    "PointValue": ({"variable", "point"}, set()),
    "NodalExtremeValue": ({"variable"}, {"value_type"}),
    "SideIntegralVariablePostprocessor": ({"variable", "boundary"}, set()),
    "Residual": (set(), set()),
}

FUNCTION_TYPES = {"ParsedFunction": ({"value"}, {"vars", "vals"})}
MATERIAL_TYPES = {"GenericConstantMaterial": ({"prop_names", "prop_values"}, set())}


def _objects(tree, section, registry, globals_):
    if section not in tree:
        return []
    out = []
    sec = tree[section]
    if sec.params:
        key = next(iter(sec.params))
        raise sec.error(f"[{section}] holds only sub-blocks; unexpected parameter {key!r}", key)
    for name, child in sec.children.items():
        if "type" not in child.params:
            raise child.error(f"[{section}/{name}]: missing required parameter 'type'")
        typ = child.params["type"]
        if typ not in registry:
            raise child.error(f"[{section}/{name}]: unknown type {typ!r}; valid types: {', '.join(sorted(registry))}",
                              "type")
        required, optional = registry[typ]
        allowed = required | optional | {"type"}
        for k in child.params:
            if k not in allowed:
                raise child.error(f"{typ} {name!r}: unknown parameter {k!r}", k)
        merged = {k: v for k, v in globals_.items() if k in allowed}
        merged.update(child.params)
        obj = ObjectSpec(name, typ, merged, dict(child.params), child)
        for k in sorted(required):
            if k not in merged:
                raise obj.error(f"{typ} {name!r}: missing required parameter {k!r}")
        out.append(obj)
    return out


@dataclass
class MeshRequest:
    type: str
    params: dict


@dataclass
class OutputOptions:
    basename: str = "out"
    formats: tuple = ("vtk", "csv")
    interval: int = 1

    def __post_init__(self):
        if self.interval < 1:
            raise ConfigurationError("output interval must be at least 1")


@dataclass
class SimulationSpec:
    """Everything needed to assemble and run a problem."""

    mesh: object = None
    mesh_request: MeshRequest | None = None
    coord: str = XY
    variables: list = field(default_factory=list)
    global_params: dict = field(default_factory=dict)
    functions: dict = field(default_factory=dict)
    materials: dict = field(default_factory=dict)
    kernel_specs: list = field(default_factory=list)
    bc_specs: list = field(default_factory=list)
    kernels: list = field(default_factory=list)
    boundary_kernels: list = field(default_factory=list)
    bcs: list = field(default_factory=list)
    config: K.WeakFormConfig | None = None
    executioner: ExecutionerOptions = field(default_factory=ExecutionerOptions)
    postprocessors: list = field(default_factory=list)
    outputs: OutputOptions = field(default_factory=OutputOptions)
    petsc_options: dict = field(default_factory=dict)
    filename: str | None = None

    pp_specs: list = field(default_factory=list)
    _ctx: object = field(default=None, repr=False, compare=False)
    _built: bool = field(default=False, repr=False, compare=False)

    def instantiate(self):
        """Create kernels, constraints and postprocessors from the object specs."""
        if self._built:
            return self
        ctx = self._ctx
        for obj in self.kernel_specs:
            self.kernels += _make_kernels(ctx, obj)
        for obj in self.bc_specs:
            kind, bc = _make_bc(ctx, obj)
            (self.bcs if kind == "strong" else self.boundary_kernels).append(bc)
        if ctx._cfgs:
            self.config = next(iter(ctx._cfgs.values()))
        self.postprocessors = [_make_postprocessor(ctx, o) for o in self.pp_specs]
        self._built = True
        return self

    def build_system(self):
        if self.mesh is None:
            raise ConfigurationError("input has no [Mesh] section")
        if not self.variables:
            raise ConfigurationError("input has no [Variables] section")
        self.instantiate()
        system = System(self.mesh, self.variables, self.kernels, self.bcs, self.boundary_kernels, self.coord)
        for pp in self.postprocessors:
            pp.validate(system)
        return system


class _Context:
    def __init__(self, spec, dim):
        self.spec = spec
        self.dim = dim
        self._cfgs = {}

    def function(self, obj, key):
        name = obj.str(key, required=True)
        if name not in self.spec.functions:
            # a bare expression is accepted in place of a function name
            try:
                return Expression(name).as_field()
            except ParseError:
                raise obj.error(f"{obj.type} {obj.name!r}: unknown function {name!r}", key) from None
        return self.spec.functions[name].as_field()

    def material(self, obj, key, default):
        prop = obj.str(key, default)
        if prop not in self.spec.materials:
            raise obj.error(f"{obj.type} {obj.name!r}: material property {prop!r} is not defined in [Materials]")
        return self.spec.materials[prop]

    def velocity_names(self, obj):
        names = [obj.str(k) for k in ("u", "v", "w")[: self.dim]]
        if any(n is None for n in names):
            missing = [k for k, n in zip(("u", "v", "w"), names) if n is None]
            raise obj.error(f"{obj.type} {obj.name!r}: missing required parameter {missing[0]!r}")
        return tuple(names)

    def ins_config(self, obj, form=None, coord=None):
        vel = self.velocity_names(obj)
        rho = self.material(obj, "rho_name", "rho")
        mu = self.material(obj, "mu_name", "mu")
        if form is None:
            form = K.LAPLACE if obj.bool("laplace", True) else K.TRACTION
        coord = coord or self.spec.coord
        g = obj.floats("gravity", [0.0] * 3)
        forcing = []
        for k, key in enumerate(("x_vel_forcing_func", "y_vel_forcing_func", "z_vel_forcing_func")[: self.dim]):
            f = self.function(obj, key) if obj.has(key) else None
            gk = g[k] if k < len(g) else 0.0
            forcing.append(_combine_force(rho * gk, f))
        body = None if all(f is None for f in forcing) else forcing
        mass_source = self.function(obj, "mass_source_func") if obj.has("mass_source_func") else None
        key = (vel, obj.str("p"), form, obj.bool("integrate_p_by_parts", True), obj.bool("convective_term", True),
               obj.bool("transient_term", False), obj.bool("supg"), obj.bool("pspg"), obj.bool("lsic"),
               obj.float("alpha", 1.0), rho, mu, coord, obj.float("tau_lsic"),
               tuple(obj.str(k) for k in ("gravity", "x_vel_forcing_func", "y_vel_forcing_func",
                                          "z_vel_forcing_func", "mass_source_func")))
        if key not in self._cfgs:
            try:
                self._cfgs[key] = K.WeakFormConfig(
                    velocity=vel, pressure=obj.str("p", "p"), form=form, integrate_p_by_parts=key[3], convective=key[4],
                    transient=key[5], supg=key[6], pspg=key[7], lsic=key[8], alpha=key[9], rho=rho, mu=mu,
                    body_force=body, coord=coord, tau_lsic=key[13], mass_source=mass_source)
            except Exception as exc:
                raise obj.error(f"{obj.type} {obj.name!r}: {exc}") from None
        return self._cfgs[key]


def _combine_force(c, f):
    if f is None:
        return None if c == 0.0 else c
    if c == 0.0:
        return f
    return lambda x, t: c + f(x, t)


def _component(obj, cfg):
    k = obj.int("component", required=True)
    if not 0 <= k < cfg.dim:
        raise obj.error(f"{obj.type} {obj.name!r}: component {k} out of range for a {cfg.dim}D problem", "component")
    if obj.str("variable") != cfg.velocity[k]:
        raise obj.error(f"{obj.type} {obj.name!r}: variable {obj.str('variable')!r} does not match component {k} "
                        f"velocity {cfg.velocity[k]!r}", "variable")
    return k


def _momentum(cfg, k):
    out = []
    if cfg.convective:
        out.append(K.MomentumConvection(cfg, k))
    out.append(K.ViscousLaplace(cfg, k) if cfg.form == K.LAPLACE else K.ViscousTraction(cfg, k))
    out.append(K.PressureGradient(cfg, k))
    if cfg.force(k) is not None:
        out.append(K.MomentumBodyForce(cfg, k))
    if cfg.supg:
        out.append(K.MomentumSUPG(cfg, k))
    if cfg.lsic:
        out.append(K.MomentumLSIC(cfg, k))
    return out


def _make_kernels(ctx, obj):
    t = obj.type
    if t.startswith("INS"):
        coord = RZ if t.endswith("RZ") else None
        if t.startswith("INSMass"):
            cfg = ctx.ins_config(obj, coord=coord)
            if obj.str("variable") != cfg.pressure:
                raise obj.error(f"{t} {obj.name!r}: variable must be the pressure {cfg.pressure!r}", "variable")
            return [K.Mass(cfg)] + ([K.PSPG(cfg)] if cfg.pspg else [])
        if t == "INSMomentumTimeDerivative":
            cfg = ctx.ins_config(obj)
            var = obj.str("variable")
            if var not in cfg.velocity:
                raise obj.error(f"{t} {obj.name!r}: variable {var!r} is not a velocity component", "variable")
            return [K.MomentumTime(cfg, cfg.velocity.index(var))]
        form = K.TRACTION if "Traction" in t else K.LAPLACE
        cfg = ctx.ins_config(obj, form=form, coord=coord)
        return _momentum(cfg, _component(obj, cfg))
    var = obj.str("variable")
    if t == "Diffusion":
        return [K.Diffusion(var, obj.float("coef", 1.0))]
    if t == "TimeDerivative":
        return [K.TimeDerivative(var, obj.float("coef", 1.0))]
    if t == "Reaction":
        return [K.Reaction(var, obj.float("coef", 1.0))]
    if t == "BodyForce":
        f = ctx.function(obj, "function") if obj.has("function") else obj.float("value", 1.0)
        return [K.BodyForce(K.AdvectionConfig(velocity=np.zeros(ctx.dim), forcing=f, variable=var))]
    if t == "Advection":
        vel = obj.floats("velocity", required=True)
        f = ctx.function(obj, "forcing_func") if obj.has("forcing_func") else None
        cfg = K.AdvectionConfig(velocity=tuple(vel[: ctx.dim]), forcing=f, variable=var, alpha=obj.float("alpha", 1.0))
        return K.advection_kernels(cfg, obj.bool("supg", True))
    raise AssertionError(t)


def _make_bc(ctx, obj):
    t = obj.type
    bnd = obj.list("boundary", required=True)
    if t == "DirichletBC":
        return "strong", DirichletBC(obj.str("variable"), bnd, obj.float("value", 0.0))
    if t == "FunctionDirichletBC":
        f = ctx.function(obj, "function")
        return "strong", DirichletBC(obj.str("variable"), bnd, f)
    form = K.TRACTION if "Traction" in t else K.LAPLACE
    cfg = ctx.ins_config(obj, form=form)
    return "weak", K.MomentumNoBC(cfg, _component(obj, cfg), tuple(bnd))


def _make_postprocessor(ctx, obj):
    t = obj.type
    if t == "VolumetricFlowRate":
        vel = (obj.str("vel_x") or obj.str("u") or "vel_x", obj.str("vel_y") or obj.str("v") or "vel_y")
        return Postprocessor(obj.name, "flow_rate", boundary=obj.str("boundary"), velocity=vel)
    if t == "ElementL2Error":
        return Postprocessor(obj.name, "l2_error", variable=obj.str("variable"), function=ctx.function(obj, "function"))
    if t == "PointValue":
        return Postprocessor(obj.name, "point_value", variable=obj.str("variable"),
                             point=tuple(obj.floats("point", required=True)[: ctx.dim]))
    if t == "NodalExtremeValue":
        kind = obj.str("value_type", "max").lower()
        if kind not in ("min", "max"):
            raise obj.error(f"{t} {obj.name!r}: value_type must be min or max", "value_type")
        return Postprocessor(obj.name, kind, variable=obj.str("variable"))
    if t == "SideIntegralVariablePostprocessor":
        return Postprocessor(obj.name, "side_integral", variable=obj.str("variable"), boundary=obj.str("boundary"))
    return Postprocessor(obj.name, "residual_norm")


_ELEM_FAMILIES = {"EDGE2": (None, 1), "EDGE3": (None, 2), "TRI3": (TRI, 1), "TRI6": (TRI, 2),
                  "QUAD4": (QUAD, 1), "QUAD9": (QUAD, 2)}


def _build_mesh(sec):
    typ = sec.get("type")
    if typ is None:
        raise sec.error("[Mesh]: missing required parameter 'type'")
    elem = sec.get("elem_type", "QUAD4").upper()
    if elem not in _ELEM_FAMILIES:
        raise sec.error(f"[Mesh]: unknown elem_type {elem!r}; valid: {', '.join(_ELEM_FAMILIES)}", "elem_type")
    family, order = _ELEM_FAMILIES[elem]

    def need(key):
        v = sec.get_int(key)
        if v is None:
            raise sec.error(f"[Mesh] {typ}: missing required parameter {key!r}")
        return v

    if typ == "GeneratedMesh":
        dim = need("dim")
        xmin, xmax = sec.get_float("xmin", 0.0), sec.get_float("xmax", 1.0)
        if dim == 1:
            if family is not None:
                raise sec.error("[Mesh]: a 1D GeneratedMesh needs elem_type EDGE2 or EDGE3", "elem_type")
            mesh = build_interval_mesh(need("nx"), xmin, xmax, order)
        elif dim == 2:
            if family is None:
                raise sec.error("[Mesh]: a 2D GeneratedMesh needs a TRI or QUAD elem_type", "elem_type")
            builder = build_structured_quad_mesh if family == QUAD else build_structured_tri_mesh
            mesh = builder(need("nx"), need("ny"),
                           (xmin, xmax, sec.get_float("ymin", 0.0), sec.get_float("ymax", 1.0)), order)
        else:
            raise sec.error(f"[Mesh]: dim = {dim} is not supported (1 or 2)", "dim")
    elif typ == "ConicalDiffuserMesh":
        if family is None:
            raise sec.error("[Mesh]: ConicalDiffuserMesh needs a TRI or QUAD elem_type", "elem_type")
        mesh = build_conical_diffuser_mesh(
            need("nr"), need("nz_cone"), need("nz_pipe"), family, order,
            sec.get_float("inlet_radius", 0.5), sec.get_float("outlet_radius", 1.0),
            sec.get_float("cone_length", 1.0), sec.get_float("length", 4.0))
    elif typ == "WedgeMesh":
        from ..verify.cases import wedge_mesh

        name = {"QUAD9": "q2q1", "QUAD4": "q1q1", "TRI6": "p2p1", "TRI3": "p1p1"}.get(elem)
        mesh = wedge_mesh(need("nr"), need("nt"), math.radians(sec.get_float("alpha_deg", 15.0)), name,
                          sec.get_float("r1", 1.0), sec.get_float("r2", 2.0))
    else:
        raise sec.error(f"[Mesh]: unknown type {typ!r}; valid types: ConicalDiffuserMesh, GeneratedMesh, WedgeMesh",
                        "type")
    for name, child in sec.children.items():
        if child.get("type") not in ("ExtraNodeset", "AddExtraNodeset"):
            raise child.error(f"[Mesh/{name}]: unknown type {child.get('type')!r}; valid types: ExtraNodeset")
        new = child.get("new_boundary")
        pt = child.get_floats("coord")
        if new is None or pt is None:
            raise child.error(f"[Mesh/{name}]: ExtraNodeset needs 'new_boundary' and 'coord'")
        try:
            node = mesh.find_node(pt[: mesh.dim])
        except Exception:
            raise child.error(f"[Mesh/{name}]: no mesh node at {tuple(pt)}", "coord") from None
        mesh = mesh.with_node_set(new, [node])
    return mesh


_PC_TYPES = {"lu": "lu", "ilu": "ilu", "jacobi": "jacobi", "fieldsplit": "fieldsplit", "none": "none"}
_SILENT_FLAGS = {"-snes_converged_reason", "-ksp_converged_reason", "-snes_monitor", "-ksp_monitor",
                 "-snes_linesearch_monitor"}


def _petsc(ex, spec, krylov, fs):
    flags = shlex.split(ex.get("petsc_options", ""))
    names = shlex.split(ex.get("petsc_options_iname", ""))
    values = shlex.split(ex.get("petsc_options_value", ""))
    if len(names) != len(values):
        raise ex.error("petsc_options_iname and petsc_options_value have different lengths", "petsc_options_value")
    for f in flags:
        spec.petsc_options[f] = True
        if f not in _SILENT_FLAGS:
            warnings.warn(f"PETSc option {f} has no equivalent and is ignored", stacklevel=2)
    for n, v in zip(names, values):
        spec.petsc_options[n] = v
        if n == "-pc_type":
            if v.lower() not in _PC_TYPES:
                raise ex.error(f"unsupported -pc_type {v!r}; valid: {', '.join(_PC_TYPES)}", "petsc_options_value")
            krylov.preconditioner = _PC_TYPES[v.lower()]
        elif n == "-ksp_gmres_restart":
            krylov.restart = int(v)
        elif n == "-pc_fieldsplit_schur_precondition":
            fs.schur_precondition = v.lower()
        elif n == "-pc_fieldsplit_schur_fact_type":
            fs.fact_type = v.lower()
        elif n in ("-pc_factor_shift_type", "-pc_factor_mat_solver_package", "-pc_factor_mat_solver_type"):
            # the sparse LU pivots by itself; the package choice has no equivalent
            log.info("PETSc option %s=%s accepted without effect", n, v)
        else:
            warnings.warn(f"PETSc option {n}={v} has no equivalent and is ignored", stacklevel=2)


def _executioner(tree, spec):
    if "Executioner" not in tree:
        return ExecutionerOptions()
    ex = tree["Executioner"]
    typ = ex.get("type", "Steady")
    if typ not in ("Steady", "Transient"):
        raise ex.error(f"[Executioner]: unknown type {typ!r}; valid types: Steady, Transient", "type")
    solve_type = ex.get("solve_type", "NEWTON").upper()
    if "Preconditioning" in tree:
        for child in tree["Preconditioning"].children.values():
            solve_type = child.get("solve_type", solve_type).upper()
    if solve_type not in ("NEWTON", "PJFNK", "JFNK"):
        raise ex.error(f"unknown solve_type {solve_type!r}; valid: NEWTON, PJFNK", "solve_type")
    ls = ex.get("line_search", "none").lower()
    if ls not in ("none", "basic", "bt", "default"):
        raise ex.error(f"unknown line_search {ls!r}; valid: none, basic", "line_search")
    newton = NewtonOptions(nl_rel_tol=ex.get_float("nl_rel_tol", 1e-8), nl_abs_tol=ex.get_float("nl_abs_tol", 1e-50),
                           nl_max_its=ex.get_int("nl_max_its", 50),
                           line_search="none" if ls == "none" else "basic",
                           solve_type="PJFNK" if solve_type != "NEWTON" else "NEWTON")
    krylov = KrylovOptions(l_tol=ex.get_float("l_tol", 1e-6), l_max_its=ex.get_int("l_max_its", 200),
                           l_abs_tol=ex.get_float("l_abs_tol", 0.0), preconditioner="lu")
    fs = FieldSplitOptions()
    _petsc(ex, spec, krylov, fs)
    scheme = ex.get("scheme")
    theta = ex.get_float("theta", 1.0)
    if scheme is not None:
        schemes = {"implicit-euler": 1.0, "crank-nicolson": 0.5, "explicit-euler": 0.0}
        if scheme.lower() not in schemes:
            raise ex.error(f"unknown scheme {scheme!r}; valid: {', '.join(schemes)}", "scheme")
        theta = schemes[scheme.lower()]
    adaptive = None
    dt = ex.get_float("dt", 1.0)
    if "TimeStepper" in ex:
        ts = ex["TimeStepper"]
        if ts.get("type") != "IterationAdaptiveDT":
            raise ts.error(f"unknown TimeStepper type {ts.get('type')!r}; valid: IterationAdaptiveDT", "type")
        adaptive = AdaptiveDT(optimal_iterations=ts.get_int("optimal_iterations", 5),
                              growth_factor=ts.get_float("growth_factor", 1.2),
                              cutback_factor=ts.get_float("cutback_factor", 0.4))
        dt = ts.get_float("dt", dt)
    try:
        return ExecutionerOptions(
            mode=STEADY if typ == "Steady" else TRANSIENT, theta=theta, dt0=dt, dtmin=ex.get_float("dtmin", 0.0),
            num_steps=ex.get_int("num_steps"), end_time=ex.get_float("end_time"),
            start_time=ex.get_float("start_time", 0.0),
            ss_check=ex.get_bool("trans_ss_check", ex.get_bool("steady_state_detection", False)),
            ss_check_tol=ex.get_float("ss_check_tol", ex.get_float("steady_state_tolerance", 1e-8)),
            adaptive=adaptive, newton=newton, krylov=krylov,
            fieldsplit=fs if krylov.preconditioner == "fieldsplit" else None)
    except Exception as exc:
        raise ex.error(f"[Executioner]: {exc}") from None


def _variables(tree, globals_):
    if "Variables" not in tree:
        return []
    vel = {globals_.get(k) for k in ("u", "v", "w")} - {None}
    pres = globals_.get("p")
    out = []
    for name, child in tree["Variables"].children.items():
        order = child.get("order", "FIRST").upper()
        if order not in ("FIRST", "SECOND"):
            raise child.error(f"variable {name!r}: order must be FIRST or SECOND", "order")
        fam = child.get("family", "LAGRANGE").upper()
        if fam != "LAGRANGE":
            raise child.error(f"variable {name!r}: only LAGRANGE is supported", "family")
        role = VELOCITY if name in vel else PRESSURE if name == pres else SCALAR
        out.append(Variable(name, 1 if order == "FIRST" else 2, role))
    return out


def _outputs(tree, default_base):
    if "Outputs" not in tree:
        return OutputOptions(default_base)
    o = tree["Outputs"]
    known = {"file_base", "vtk", "csv", "interval", "exodus", "print_linear_residuals", "print_perf_log",
             "execute_on", "console"}
    for k in o.params:
        if k not in known:
            warnings.warn(f"[Outputs] parameter {k!r} is ignored", stacklevel=2)
    if o.get_bool("exodus", False):
        warnings.warn("exodus output is not available; writing VTK instead", stacklevel=2)
    formats = tuple(f for f in ("vtk", "csv") if o.get_bool(f, True) or (f == "vtk" and o.get_bool("exodus", False)))
    return OutputOptions(o.get("file_base", default_base), formats, o.get_int("interval", 1))


def build_simulation(tree, filename=None):
    """Build a :class:`SimulationSpec` from a parsed tree.

    Sections may be missing; the spec then only carries what was given and
    :meth:`SimulationSpec.build_system` reports what is absent.
    """
    for name, sec in tree.children.items():
        if name not in KNOWN_SECTIONS:
            raise sec.error(f"unknown section [{name}]; valid sections: {', '.join(KNOWN_SECTIONS)}")
    spec = SimulationSpec(filename=filename)
    globals_ = dict(tree["GlobalParams"].params) if "GlobalParams" in tree else {}
    spec.global_params = globals_

    coord = XY
    if "Problem" in tree:
        coord = tree["Problem"].get("coord_type", XY).upper()
        if coord not in (XY, RZ):
            raise tree["Problem"].error(f"unknown coord_type {coord!r}; valid: XY, RZ", "coord_type")
    spec.coord = coord
    if "Mesh" in tree:
        spec.mesh_request = MeshRequest(tree["Mesh"].get("type"), dict(tree["Mesh"].params))
        spec.mesh = _build_mesh(tree["Mesh"])
    spec.variables = _variables(tree, globals_)

    for obj in _objects(tree, "Functions", FUNCTION_TYPES, {}):
        consts = {}
        names, vals = obj.list("vars", []), obj.floats("vals", [])
        if len(names) != len(vals):
            raise obj.error(f"function {obj.name!r}: 'vars' and 'vals' differ in length")
        consts = dict(zip(names, vals))
        try:
            spec.functions[obj.name] = Expression(obj.str("value"), consts)
        except ParseError as exc:
            line = obj.section.where("value")
            raise ParseError(f"function {obj.name!r}: {exc.message}", line, None, filename) from None

    for obj in _objects(tree, "Materials", MATERIAL_TYPES, {}):
        names, vals = obj.list("prop_names"), obj.floats("prop_values")
        if len(names) != len(vals):
            raise obj.error(f"material {obj.name!r}: prop_names and prop_values differ in length")
        spec.materials.update(zip(names, vals))

    if spec.mesh is not None:
        dim = spec.mesh.dim
    else:
        dim = sum(1 for k in ("u", "v", "w") if k in globals_) or 2
    ctx = _Context(spec, dim)

    spec.kernel_specs = _objects(tree, "Kernels", KERNEL_TYPES, globals_)
    spec.bc_specs = _objects(tree, "BCs", BC_TYPES, globals_)
    spec.pp_specs = _objects(tree, "Postprocessors", POSTPROCESSOR_TYPES, globals_)
    spec.executioner = _executioner(tree, spec)
    spec._ctx = ctx
    if spec.mesh is not None:
        spec.instantiate()
    base = "out"
    if filename:
        import os

        base = os.path.splitext(os.path.basename(filename))[0]
    spec.outputs = _outputs(tree, base)
    _cross_check(spec)
    return spec


def _cross_check(spec):
    declared = {v.name for v in spec.variables}
    if declared:
        for obj in spec.kernel_specs + spec.bc_specs:
            var = obj.str("variable")
            if var not in declared:
                raise obj.error(f"{obj.type} {obj.name!r}: variable {var!r} is not declared in [Variables]", "variable")
    if spec.mesh is not None:
        names = set(spec.mesh.boundary_names())
        for obj in spec.bc_specs:
            for b in obj.list("boundary"):
                if b not in names:
                    raise obj.error(f"{obj.type} {obj.name!r}: unknown boundary {b!r}; "
                                    f"available: {', '.join(sorted(names))}", "boundary")


def load_simulation(text, filename=None):
    """Substitute, parse and build in one step."""
    return build_simulation(parse_hit(substitute_dbe(text, filename), filename), filename)
