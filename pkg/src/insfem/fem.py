"""Variables, degree-of-freedom maps, constraints and global assembly."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, IncompatibleOrder, InvalidArgument, InvalidGeometry
from .mesh import RefElement, compute_geometry, face_geometry, map_basis, quadrature_for, shape_eval
from .solvers.sparse import SparseMatrixCSR

log = logging.getLogger(__name__)

XY, RZ = "XY", "RZ"
VELOCITY, PRESSURE, SCALAR = "velocity", "pressure", "scalar"


def coord_weight(x, cs=XY):
    """Volume weight of the coordinate system: 1 in XY, r = x[..., 0] in RZ."""
    x = np.asarray(x, dtype=float)
    cs = cs.upper()
    if cs == XY:
        return np.ones(x.shape[:-1]) if x.ndim > 1 else 1.0
    if cs == RZ:
        r = x[..., 0]
        if np.any(r < 0):
            raise InvalidGeometry("negative radius in RZ coordinates")
        return r if x.ndim > 1 else float(r)
    raise InvalidArgument(f"unknown coordinate system {cs!r}")


@dataclass(frozen=True)
class Variable:
    name: str
    order: int = 1
    role: str = SCALAR

    def __post_init__(self):
        if self.order not in (1, 2):
            raise InvalidArgument(f"variable {self.name!r}: order must be 1 or 2")
        if self.role not in (VELOCITY, PRESSURE, SCALAR):
            raise InvalidArgument(f"variable {self.name!r}: unknown role {self.role!r}")


class DofMap:
    """Block-contiguous numbering: all dofs of the first variable, then the next.

    Attributes
    ----------
    node_dofs : dict
        Variable name to an ``(n_nodes,)`` array of global indices, -1 where
        the variable has no dof (mid-side nodes of order-1 variables).
    elem_dofs : dict
        Variable name to an ``(n_elements, n_local)`` array.
    blocks : dict
        Variable name to ``range`` of its global indices.
    """

    def __init__(self, mesh, variables):
        self.mesh = mesh
        self.variables = list(variables)
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise InvalidArgument("variable names must be unique")
        ref = mesh.ref
        self.node_dofs, self.elem_dofs, self.blocks, self.refs = {}, {}, {}, {}
        start = 0
        for var in self.variables:
            if var.order > ref.order:
                raise IncompatibleOrder(f"variable {var.name!r} of order {var.order} on an order-{ref.order} mesh")
            vref = RefElement(ref.family, var.order)
            local = mesh.elements[:, : vref.n_nodes]
            used = np.unique(local)
            table = np.full(mesh.n_nodes, -1, dtype=np.int64)
            table[used] = start + np.arange(len(used))
            self.node_dofs[var.name] = table
            self.elem_dofs[var.name] = table[local]
            self.blocks[var.name] = range(start, start + len(used))
            self.refs[var.name] = vref
            start += len(used)
        self.n_dofs = start

    def variable(self, name):
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def dof_nodes(self, name):
        """Mesh node index of each dof of ``name``, in dof order."""
        table = self.node_dofs[name]
        nodes = np.nonzero(table >= 0)[0]
        return nodes[np.argsort(table[nodes])]

    def dof_coords(self, name):
        return self.mesh.nodes[self.dof_nodes(name)]

    def field(self, y, name):
        b = self.blocks[name]
        return np.asarray(y)[b.start:b.stop]

    def block_indices(self, names):
        return np.concatenate([np.arange(self.blocks[n].start, self.blocks[n].stop) for n in names])

    def interpolant(self, fns):
        """Nodal interpolant; ``fns`` maps variable names to ``f(x)`` or constants."""
        y = np.zeros(self.n_dofs)
        for name, fn in fns.items():
            x = self.dof_coords(name)
            b = self.blocks[name]
            y[b.start:b.stop] = fn(x) if callable(fn) else fn
        return y


def distribute_dofs(mesh, variables):
    return DofMap(mesh, variables)


def _as_function(value):
    if callable(value):
        return value
    c = float(value)
    return lambda x, t: np.full(len(x), c)


@dataclass
class DirichletBC:
    """Strong value ``g(x, t)`` for ``variable`` on the named boundaries."""

    variable: str
    boundary: object
    value: object = 0.0

    @property
    def boundaries(self):
        return (self.boundary,) if isinstance(self.boundary, str) else tuple(self.boundary)


@dataclass
class PinBC:
    """Single-dof constraint, located by node index or by point."""

    variable: str
    point: object = None
    node: int | None = None
    value: float = 0.0


class ConstraintSet:
    def __init__(self, constraints=()):
        self.constraints = list(constraints)

    def add(self, c):
        self.constraints.append(c)
        return self

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self):
        return len(self.constraints)

    def resolve(self, dofmap):
        return ResolvedConstraints(self, dofmap)


class ResolvedConstraints:
    """Constraint records mapped onto global dof indices."""

    def __init__(self, cset, dofmap):
        mesh = dofmap.mesh
        groups = []
        for c in cset:
            if c.variable not in dofmap.node_dofs:
                raise ConfigurationError(f"constraint on unknown variable {c.variable!r}")
            table = dofmap.node_dofs[c.variable]
            vertices_only = dofmap.refs[c.variable].order < mesh.order
            if isinstance(c, DirichletBC):
                nodes = []
                for b in c.boundaries:
                    try:
                        nodes.append(mesh.side_nodes(b, vertices_only=vertices_only))
                    except KeyError:
                        raise ConfigurationError(f"unknown boundary {b!r}") from None
                nodes = np.unique(np.concatenate(nodes))
                fn = _as_function(c.value)
            else:
                node = c.node if c.node is not None else mesh.find_node(c.point)
                nodes = np.array([node])
                fn = _as_function(c.value)
            dofs = table[nodes]
            if np.any(dofs < 0):
                raise ConfigurationError(f"constraint on {c.variable!r} hits nodes without dofs")
            groups.append((dofs, mesh.nodes[nodes], fn))
        self.groups = groups
        self.dofs = np.unique(np.concatenate([g[0] for g in groups])) if groups else np.zeros(0, dtype=np.int64)
        self.n_dofs = dofmap.n_dofs
        self.free = np.ones(self.n_dofs, dtype=bool)
        self.free[self.dofs] = False

    def values(self, t):
        """Constrained values at time ``t``; conflicting assignments raise."""
        g = np.full(self.n_dofs, np.nan)
        for dofs, x, fn in self.groups:
            v = np.broadcast_to(np.asarray(fn(x, t), dtype=float), dofs.shape)
            prev = g[dofs]
            clash = ~np.isnan(prev) & ~np.isclose(prev, v, rtol=1e-10, atol=1e-12)
            if np.any(clash):
                i = dofs[np.argmax(clash)]
                raise ConfigurationError(f"dof {i} constrained to conflicting values {prev[clash][0]} and {v[clash][0]}")
            g[dofs] = v
        return g[self.dofs]

    def apply_residual(self, F, y, t):
        F = F.copy()
        F[self.dofs] = y[self.dofs] - self.values(t)
        return F

    def apply_jacobian(self, J):
        keep = sp.diags(self.free.astype(float))
        fixed = sp.diags((~self.free).astype(float))
        return (keep @ J + fixed).tocsr()

    def impose(self, y, t):
        y = np.array(y, dtype=float)
        y[self.dofs] = self.values(t)
        return y


@dataclass
class SystemState:
    y: np.ndarray
    y_old: np.ndarray
    t: float = 0.0
    dt: float = math.inf

    def __post_init__(self):
        if len(self.y) != len(self.y_old):
            raise InvalidArgument("y and y_old must have equal length")
        if not self.dt > 0:
            raise InvalidArgument("dt must be positive")


class QPData:
    """Quadrature-point data for a chunk of elements or faces.

    ``val``, ``grad``, ``hess`` and ``dot`` hold each variable evaluated at the
    theta-weighted state ``theta*y + (1-theta)*y_old`` and its rate
    ``(y - y_old)/dt``.  ``tau_vel`` is the velocity used for stabilization
    parameters (the current one unless frozen).
    """

    def __init__(self, **kw):
        self.cache = {}
        self.__dict__.update(kw)

    def cached(self, key, fn):
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]

    @property
    def n_elem(self):
        return self.JxW.shape[0]


class Kernel:
    """Volume integrand.  Subclasses set ``variable`` (the test field) and
    implement ``residual(q) -> (E, A)`` and ``jacobian(q) -> {trial: (E, A, B)}``.
    """

    variable: str = ""
    transient = False

    def residual(self, q):
        raise NotImplementedError

    def jacobian(self, q):
        return {}


class BoundaryKernel(Kernel):
    boundaries: tuple = ()


def _default_threads():
    try:
        return max(1, int(os.environ.get("INSFEM_THREADS", "1")))
    except ValueError:
        return 1


class System:
    """Residual and Jacobian assembly for a set of kernels on one mesh.

    Parameters
    ----------
    mesh : Mesh
    variables : sequence of Variable
    kernels : sequence of Kernel
    constraints : ConstraintSet or sequence, optional
    boundary_kernels : sequence of BoundaryKernel, optional
    coord : {"XY", "RZ"}
    qdegree : int, optional
        Quadrature exactness; defaults to ``2 * max_order + 1``.
    chunk_size : int
        Elements processed per vectorized batch.
    threads : int, optional
        Worker threads for batches; defaults to ``$INSFEM_THREADS`` or 1.
    """

    def __init__(self, mesh, variables, kernels=(), constraints=None, boundary_kernels=(), coord=XY,
                 qdegree=None, chunk_size=4096, threads=None):
        self.mesh = mesh
        self.dofmap = distribute_dofs(mesh, variables)
        self.kernels = list(kernels)
        self.boundary_kernels = list(boundary_kernels)
        self.coord = coord.upper()
        if self.coord not in (XY, RZ):
            raise InvalidArgument(f"unknown coordinate system {coord!r}")
        if self.coord == RZ:
            if mesh.dim != 2:
                raise InvalidGeometry("RZ coordinates need a 2D mesh")
            if np.any(mesh.nodes[:, 0] < -1e-14):
                raise InvalidGeometry("RZ mesh has nodes with r < 0")
        if constraints is None:
            constraints = ConstraintSet()
        elif not isinstance(constraints, ConstraintSet):
            constraints = ConstraintSet(constraints)
        self.constraints = constraints
        self.rc = constraints.resolve(self.dofmap)
        max_order = max(v.order for v in self.dofmap.variables)
        self.qdegree = 2 * max_order + 1 if qdegree is None else int(qdegree)
        self.chunk_size = int(chunk_size)
        self.threads = _default_threads() if threads is None else int(threads)
        for k in self.kernels + self.boundary_kernels:
            if k.variable not in self.dofmap.node_dofs:
                raise ConfigurationError(f"kernel {type(k).__name__} acts on unknown variable {k.variable!r}")
        self.h = mesh.element_sizes()
        self._vol_cache = None
        self._face_cache = {}

    # geometry caches

    @property
    def n_dofs(self):
        return self.dofmap.n_dofs

    @property
    def is_transient(self):
        return any(k.transient for k in self.kernels)

    def _volume_chunks(self):
        if self._vol_cache is None:
            rule = quadrature_for(self.mesh.ref.family, self.qdegree)
            chunks = []
            for s in range(0, self.mesh.n_elements, self.chunk_size):
                ids = np.arange(s, min(s + self.chunk_size, self.mesh.n_elements))
                geom = compute_geometry(self.mesh, rule.points, rule.weights, ids)
                chunks.append((ids, geom, self._bases(geom)))
            self._vol_cache = chunks
        return self._vol_cache

    def _bases(self, geom):
        out = {}
        by_order = {}
        for name, vref in self.dofmap.refs.items():
            if vref.order not in by_order:
                by_order[vref.order] = map_basis(geom, vref)
            out[name] = by_order[vref.order]
        return out

    def _face_chunks(self, boundary):
        if boundary not in self._face_cache:
            if boundary not in self.mesh.side_sets:
                raise ConfigurationError(f"unknown side set {boundary!r}")
            faces = face_geometry(self.mesh, self.mesh.side_sets[boundary], self.qdegree)
            self._face_cache[boundary] = [(f, self._bases(f.geom)) for f in faces]
        return self._face_cache[boundary]

    # qp data

    def _qpdata(self, ids, geom, bases, y, y_old, t, dt, theta, tau_y, normal=None, jxw=None):
        dm = self.dofmap
        yt = theta * y + (1.0 - theta) * y_old
        finite = math.isfinite(dt)
        val, grad, hess, dot, old = {}, {}, {}, {}, {}
        for name, b in bases.items():
            ed = dm.elem_dofs[name][ids]
            c = yt[ed]
            val[name] = c @ b.phi.T
            grad[name] = np.einsum("eqad,ea->eqd", b.grad, c)
            hess[name] = np.einsum("eqaij,ea->eqij", b.hess, c)
            if finite:
                dot[name] = ((y[ed] - y_old[ed]) / dt) @ b.phi.T
            else:
                dot[name] = np.zeros_like(val[name])
        if tau_y is not None:
            tval = {}
            for name, b in bases.items():
                tval[name] = tau_y[dm.elem_dofs[name][ids]] @ b.phi.T
        else:
            tval = val
        xq = geom.xq
        if jxw is None:
            jxw = geom.JxW
        r = xq[..., 0] if self.coord == RZ else None
        if r is not None:
            jxw = jxw * r
        return QPData(
            elems=ids, xq=xq, JxW=jxw, r=r, coord=self.coord, dim=self.mesh.dim, basis=bases,
            val=val, grad=grad, hess=hess, dot=dot, tau_val=tval, h=self.h[ids],
            t=t - (1.0 - theta) * dt if finite else t, dt=dt, theta=theta,
            sigma1=1.0 / dt if finite else 0.0, normal=normal,
        )

    def _contexts(self, y, y_old, t, dt, theta, tau_y):
        for ids, geom, bases in self._volume_chunks():
            yield ids, lambda ids=ids, geom=geom, bases=bases: self._qpdata(ids, geom, bases, y, y_old, t, dt, theta, tau_y)

    def _face_contexts(self, boundary, y, y_old, t, dt, theta, tau_y):
        for f, bases in self._face_chunks(boundary):
            yield f.elems, lambda f=f, bases=bases: self._qpdata(
                f.elems, f.geom, bases, y, y_old, t, dt, theta, tau_y, normal=f.normal, jxw=f.JxW)

    def _prepare(self, y, y_old, dt, theta):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n_dofs,):
            raise InvalidArgument(f"state has length {y.shape}, expected {self.n_dofs}")
        y_old = y if y_old is None else np.asarray(y_old, dtype=float)
        if not math.isfinite(dt):
            theta = 1.0
        if not (0.0 <= theta <= 1.0):
            raise InvalidArgument("theta must lie in [0, 1]")
        return y, y_old, theta

    def _tasks(self, y, y_old, t, dt, theta, tau_y):
        tasks = [(self.kernels, ids, mk) for ids, mk in self._contexts(y, y_old, t, dt, theta, tau_y)]
        by_boundary = {}
        for k in self.boundary_kernels:
            for b in k.boundaries:
                by_boundary.setdefault(b, []).append(k)
        for b, ks in by_boundary.items():
            tasks += [(ks, ids, mk) for ids, mk in self._face_contexts(b, y, y_old, t, dt, theta, tau_y)]
        return tasks

    def _run(self, fn, tasks):
        if self.threads > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                return list(ex.map(fn, tasks))
        return [fn(t) for t in tasks]

    # public assembly

    def residual(self, y, y_old=None, t=0.0, dt=math.inf, theta=1.0, constrain=True, tau_state=None):
        """Global residual ``F(y)``; constrained rows hold ``y_i - g_i``."""
        y, y_old, theta = self._prepare(y, y_old, dt, theta)
        dm = self.dofmap

        def work(task):
            kernels, ids, mk = task
            q = mk()
            return [(dm.elem_dofs[k.variable][ids], k.residual(q)) for k in kernels]

        F = np.zeros(self.n_dofs)
        for parts in self._run(work, self._tasks(y, y_old, t, dt, theta, tau_state)):
            for rows, vals in parts:
                F += np.bincount(rows.ravel(), weights=vals.ravel(), minlength=self.n_dofs)
        if constrain:
            F = self.rc.apply_residual(F, y, t)
        return F

    def jacobian(self, y, y_old=None, t=0.0, dt=math.inf, theta=1.0, constrain=True, tau_state=None):
        """Analytic Jacobian as a :class:`SparseMatrixCSR` with variable blocks."""
        y, y_old, theta = self._prepare(y, y_old, dt, theta)
        dm = self.dofmap

        def work(task):
            kernels, ids, mk = task
            q = mk()
            acc = {}
            for k in kernels:
                for trial, blk in k.jacobian(q).items():
                    key = (k.variable, trial)
                    acc[key] = acc[key] + blk if key in acc else blk
            rows, cols, vals = [], [], []
            for (test, trial), blk in acc.items():
                rt = dm.elem_dofs[test][ids]
                ct = dm.elem_dofs[trial][ids]
                rows.append(np.broadcast_to(rt[:, :, None], blk.shape).ravel())
                cols.append(np.broadcast_to(ct[:, None, :], blk.shape).ravel())
                vals.append(blk.ravel())
            return rows, cols, vals

        R, C, V = [], [], []
        for rows, cols, vals in self._run(work, self._tasks(y, y_old, t, dt, theta, tau_state)):
            R += rows
            C += cols
            V += vals
        n = self.n_dofs
        if V:
            J = sp.coo_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))), shape=(n, n)).tocsr()
        else:
            J = sp.csr_matrix((n, n))
        if constrain:
            J = self.rc.apply_jacobian(J)
        blocks = {v.name: np.arange(dm.blocks[v.name].start, dm.blocks[v.name].stop) for v in dm.variables}
        return SparseMatrixCSR(J, blocks=blocks, constrained=self.rc.dofs if constrain else None)

    def constrained_values(self, t):
        return self.rc.values(t)

    def impose_constraints(self, y, t=0.0):
        return self.rc.impose(y, t)

    def interpolate(self, y, variable, elem, point, y_old=None):
        """Value, gradient, Hessian and old value of ``variable`` at a reference point."""
        return interpolate(self, y, variable, elem, point, y_old)


def interpolate(system, y, variable, elem, point, y_old=None):
    dm = system.dofmap
    mesh = system.mesh
    pt = np.atleast_2d(np.asarray(point, dtype=float))
    geom = compute_geometry(mesh, pt, np.ones(1), [elem])
    b = map_basis(geom, dm.refs[variable])
    ed = dm.elem_dofs[variable][elem]
    c = np.asarray(y, dtype=float)[ed]
    value = float(b.phi[0] @ c)
    grad = b.grad[0, 0].T @ c
    hess = np.einsum("aij,a->ij", b.hess[0, 0], c)
    old = float(b.phi[0] @ np.asarray(y_old, dtype=float)[ed]) if y_old is not None else None
    return value, grad, hess, old


def evaluate_at_points(system, y, variable, points):
    """Evaluate a field at physical points by inverting each element map (Newton)."""
    mesh = system.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ref = mesh.ref
    lin = ref.linear()
    verts = mesh.nodes[mesh.elements[:, : ref.n_vertices]]
    lo, hi = verts.min(axis=1) - 1e-12, verts.max(axis=1) + 1e-12
    out = np.full(len(pts), np.nan)
    start = lin.node_coords.mean(axis=0)
    for n, x in enumerate(pts):
        cand = np.nonzero(np.all((x >= lo) & (x <= hi), axis=1))[0]
        for e in cand:
            xi = start.copy()
            X = mesh.nodes[mesh.elements[e]]
            for _ in range(30):
                N, dN, _h = shape_eval(ref, xi)
                r = N @ X - x
                J = X.T @ dN
                step = np.linalg.solve(J, r)
                xi = xi - step
                if np.linalg.norm(step) < 1e-14:
                    break
            tol = 1e-10
            inside = np.all(xi >= -1 - tol) and np.all(xi <= 1 + tol) if ref.family != "TRI" else (
                xi[0] >= -tol and xi[1] >= -tol and xi.sum() <= 1 + tol)
            if inside:
                out[n] = interpolate(system, y, variable, e, xi)[0]
                break
    return out
