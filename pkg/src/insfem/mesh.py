"""Structured meshes, Lagrange reference elements, quadrature and element maps.

Reference domains are ``[-1, 1]`` for edges, ``[-1, 1]^2`` for quadrilaterals
and the unit right triangle ``{(0,0), (1,0), (0,1)}`` for triangles.  Local
node orderings follow the usual libMesh conventions: vertices first
(counterclockwise), then edge midpoints, then the quadrilateral center.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidArgument, InvertedElement, UnsupportedDegree, UnsupportedElement

EDGE, TRI, QUAD = "EDGE", "TRI", "QUAD"

_ELEM_TYPES = {
    "EDGE2": (EDGE, 1),
    "EDGE3": (EDGE, 2),
    "TRI3": (TRI, 1),
    "TRI6": (TRI, 2),
    "QUAD4": (QUAD, 1),
    "QUAD9": (QUAD, 2),
}

# legacy VTK cell type ids
VTK_CELL_TYPES = {"EDGE2": 3, "EDGE3": 21, "TRI3": 5, "TRI6": 22, "QUAD4": 9, "QUAD9": 28}

# 1D nodes for order 1 and order 2 (vertex nodes first)
_LINE_NODES = {1: np.array([-1.0, 1.0]), 2: np.array([-1.0, 1.0, 0.0])}

# (i, j) indices into _LINE_NODES for each local quad node
_QUAD_IJ = {
    1: [(0, 0), (1, 0), (1, 1), (0, 1)],
    2: [(0, 0), (1, 0), (1, 1), (0, 1), (2, 0), (1, 2), (2, 1), (0, 2), (2, 2)],
}

# local nodes of each side, listed in the direction that keeps the element on the left
_SIDES = {
    (EDGE, 1): [(0,), (1,)],
    (EDGE, 2): [(0,), (1,)],
    (TRI, 1): [(0, 1), (1, 2), (2, 0)],
    (TRI, 2): [(0, 1, 3), (1, 2, 4), (2, 0, 5)],
    (QUAD, 1): [(0, 1), (1, 2), (2, 3), (3, 0)],
    (QUAD, 2): [(0, 1, 4), (1, 2, 5), (2, 3, 6), (3, 0, 7)],
}


@dataclass(frozen=True)
class RefElement:
    family: str
    order: int

    def __post_init__(self):
        if self.family not in (EDGE, TRI, QUAD) or self.order not in (1, 2):
            raise UnsupportedElement(f"unsupported element {self.family} order {self.order}")

    @classmethod
    def from_type(cls, elem_type):
        try:
            family, order = _ELEM_TYPES[elem_type.upper()]
        except KeyError:
            raise UnsupportedElement(f"unknown element type {elem_type!r}") from None
        return cls(family, order)

    @property
    def dim(self):
        return 1 if self.family == EDGE else 2

    @property
    def n_nodes(self):
        return {EDGE: (2, 3), TRI: (3, 6), QUAD: (4, 9)}[self.family][self.order - 1]

    @property
    def n_vertices(self):
        return {EDGE: 2, TRI: 3, QUAD: 4}[self.family]

    @property
    def elem_type(self):
        return {EDGE: "EDGE", TRI: "TRI", QUAD: "QUAD"}[self.family] + str(self.n_nodes)

    @property
    def measure(self):
        return {EDGE: 2.0, TRI: 0.5, QUAD: 4.0}[self.family]

    @property
    def sides(self):
        return _SIDES[(self.family, self.order)]

    def linear(self):
        """The order-1 element sharing this element's vertices."""
        return RefElement(self.family, 1)

    @property
    def node_coords(self):
        if self.family == EDGE:
            return _LINE_NODES[self.order][:, None].copy()
        if self.family == QUAD:
            ln = _LINE_NODES[self.order]
            return np.array([[ln[i], ln[j]] for i, j in _QUAD_IJ[self.order]])
        pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
        if self.order == 2:
            pts += [[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]
        return np.array(pts)


def _line_basis(order, s):
    """1D Lagrange values, first and second derivatives; each (n_pts, n_nodes)."""
    s = np.asarray(s, dtype=float)
    one = np.ones_like(s)
    if order == 1:
        v = np.stack([(1 - s) / 2, (1 + s) / 2], axis=-1)
        d = np.stack([-0.5 * one, 0.5 * one], axis=-1)
        dd = np.zeros_like(v)
    else:
        v = np.stack([s * (s - 1) / 2, s * (s + 1) / 2, 1 - s * s], axis=-1)
        d = np.stack([s - 0.5, s + 0.5, -2 * s], axis=-1)
        dd = np.stack([one, one, -2 * one], axis=-1)
    return v, d, dd


def shape_eval(ref, pts):
    """Evaluate the Lagrange basis of ``ref`` at reference points.

    Parameters
    ----------
    ref : RefElement
    pts : array_like
        A single point of shape ``(dim,)`` or an array ``(n_pts, dim)``.

    Returns
    -------
    values : ndarray, shape (n_pts, n_nodes)
    grads : ndarray, shape (n_pts, n_nodes, dim)
    hessians : ndarray, shape (n_pts, n_nodes, dim, dim)

    A single input point drops the leading axis.
    """
    if not isinstance(ref, RefElement):
        raise UnsupportedElement(f"not a reference element: {ref!r}")
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if ref.family == EDGE and pts.shape[-1] != 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[1] != ref.dim:
        raise InvalidArgument(f"expected {ref.dim}-dimensional reference points")
    npt = pts.shape[0]

    if ref.family == EDGE:
        v, d, dd = _line_basis(ref.order, pts[:, 0])
        out = v, d[..., None], dd[..., None, None]
    elif ref.family == QUAD:
        vx, dx, ddx = _line_basis(ref.order, pts[:, 0])
        vy, dy, ddy = _line_basis(ref.order, pts[:, 1])
        ii = np.array([i for i, _ in _QUAD_IJ[ref.order]])
        jj = np.array([j for _, j in _QUAD_IJ[ref.order]])
        v = vx[:, ii] * vy[:, jj]
        g = np.stack([dx[:, ii] * vy[:, jj], vx[:, ii] * dy[:, jj]], axis=-1)
        h = np.empty((npt, len(ii), 2, 2))
        h[..., 0, 0] = ddx[:, ii] * vy[:, jj]
        h[..., 1, 1] = vx[:, ii] * ddy[:, jj]
        h[..., 0, 1] = h[..., 1, 0] = dx[:, ii] * dy[:, jj]
        out = v, g, h
    else:
        out = _tri_basis(ref.order, pts)
    if single:
        return tuple(a[0] for a in out)
    return out


def _tri_basis(order, pts):
    xi, eta = pts[:, 0], pts[:, 1]
    lam = np.stack([1 - xi - eta, xi, eta], axis=-1)
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    npt = pts.shape[0]
    if order == 1:
        g = np.broadcast_to(dlam, (npt, 3, 2)).copy()
        return lam, g, np.zeros((npt, 3, 2, 2))
    v = np.empty((npt, 6))
    g = np.empty((npt, 6, 2))
    h = np.empty((npt, 6, 2, 2))
    for a in range(3):
        v[:, a] = lam[:, a] * (2 * lam[:, a] - 1)
        g[:, a] = (4 * lam[:, a] - 1)[:, None] * dlam[a]
        h[:, a] = 4 * np.outer(dlam[a], dlam[a])
    for m, (a, b) in enumerate([(0, 1), (1, 2), (2, 0)]):
        v[:, 3 + m] = 4 * lam[:, a] * lam[:, b]
        g[:, 3 + m] = 4 * (lam[:, a, None] * dlam[b] + lam[:, b, None] * dlam[a])
        h[:, 3 + m] = 4 * (np.outer(dlam[a], dlam[b]) + np.outer(dlam[b], dlam[a]))
    return v, g, h


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


MAX_QUADRATURE_DEGREE = 7

# symmetric triangle rules on the unit triangle; weights normalized to sum 1
_TRI_RULES = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
    ],
    5: [
        ((1 / 3, 1 / 3, 1 / 3), 0.225),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115), 0.132394152788506),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456), 0.125939180544827),
    ],
}


def _expand_orbit(bary):
    a, b, c = bary
    if abs(a - b) < 1e-14 and abs(b - c) < 1e-14:
        return [bary]
    if abs(b - c) < 1e-14:
        return [(a, b, b), (b, a, b), (b, b, a)]
    raise AssertionError("only 1- and 3-point orbits are tabulated")


def _collapsed_triangle_rule(degree):
    # Duffy transform of a tensor Gauss rule; the map adds one polynomial degree
    n = (degree + 2) // 2 + 1
    s, w = np.polynomial.legendre.leggauss(n)
    u = (1 + s) / 2
    pts, wts = [], []
    for i in range(n):
        for j in range(n):
            xi = u[i]
            eta = (1 - xi) * u[j]
            pts.append((xi, eta))
            wts.append(w[i] * w[j] * (1 - xi) / 4)
    return np.array(pts), np.array(wts)


@lru_cache(maxsize=None)
def quadrature_for(family, degree):
    """Quadrature rule on the reference element exact for total degree ``degree``."""
    if degree < 0 or degree > MAX_QUADRATURE_DEGREE:
        raise UnsupportedDegree(f"quadrature degree {degree} outside 0..{MAX_QUADRATURE_DEGREE}")
    if family == EDGE:
        n = max(1, math.ceil((degree + 1) / 2))
        s, w = np.polynomial.legendre.leggauss(n)
        return QuadratureRule(s[:, None], w, degree)
    if family == QUAD:
        n = max(1, math.ceil((degree + 1) / 2))
        s, w = np.polynomial.legendre.leggauss(n)
        X, Y = np.meshgrid(s, s, indexing="ij")
        W = np.outer(w, w)
        return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel(), degree)
    if family == TRI:
        key = next((d for d in sorted(_TRI_RULES) if d >= degree), None)
        if key is None:
            pts, wts = _collapsed_triangle_rule(degree)
            return QuadratureRule(pts, wts, degree)
        pts, wts = [], []
        for bary, w in _TRI_RULES[key]:
            for l0, l1, l2 in _expand_orbit(bary):
                pts.append((l1, l2))
                wts.append(w / 2)
        return QuadratureRule(np.array(pts), np.array(wts), degree)
    raise UnsupportedElement(f"unknown family {family!r}")


def side_reference_points(ref, side, s):
    """Map edge parameter ``s`` in [-1, 1] onto side ``side`` of ``ref``.

    Returns reference points ``(n, dim)`` and the derivative d(xi)/ds ``(dim,)``.
    """
    s = np.asarray(s, dtype=float)
    if ref.family == QUAD:
        table = [
            (lambda t: np.column_stack([t, -np.ones_like(t)]), (1.0, 0.0)),
            (lambda t: np.column_stack([np.ones_like(t), t]), (0.0, 1.0)),
            (lambda t: np.column_stack([-t, np.ones_like(t)]), (-1.0, 0.0)),
            (lambda t: np.column_stack([-np.ones_like(t), -t]), (0.0, -1.0)),
        ]
    elif ref.family == TRI:
        table = [
            (lambda t: np.column_stack([(1 + t) / 2, np.zeros_like(t)]), (0.5, 0.0)),
            (lambda t: np.column_stack([(1 - t) / 2, (1 + t) / 2]), (-0.5, 0.5)),
            (lambda t: np.column_stack([np.zeros_like(t), (1 - t) / 2]), (0.0, -0.5)),
        ]
    else:
        raise UnsupportedElement("edge elements have point sides")
    fn, d = table[side]
    return fn(s), np.array(d)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Unstructured container for a single-element-type mesh.

    ``side_sets`` maps a name to an integer array of ``(element, local side)``
    rows; ``node_sets`` maps a name to node indices.
    """

    nodes: np.ndarray
    elements: np.ndarray
    elem_type: str
    side_sets: dict = field(default_factory=dict)
    node_sets: dict = field(default_factory=dict)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(
            self, "side_sets", {k: np.asarray(v, dtype=np.int64).reshape(-1, 2) for k, v in self.side_sets.items()}
        )
        object.__setattr__(
            self, "node_sets", {k: np.asarray(v, dtype=np.int64).ravel() for k, v in self.node_sets.items()}
        )
        ref = RefElement.from_type(self.elem_type)
        if elements.shape[1] != ref.n_nodes:
            raise InvalidArgument(f"{self.elem_type} expects {ref.n_nodes} nodes per element")
        if elements.size and (elements.max() >= len(nodes) or elements.min() < 0):
            raise InvalidArgument("element references a node index out of range")
        if nodes.shape[1] != ref.dim:
            raise InvalidArgument(f"{self.elem_type} mesh needs {ref.dim}D coordinates")

    @property
    def ref(self):
        return RefElement.from_type(self.elem_type)

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def order(self):
        return self.ref.order

    def vertex_nodes(self):
        """Sorted indices of nodes that are element vertices."""
        return np.unique(self.elements[:, : self.ref.n_vertices])

    def element_sizes(self):
        """Element diameter: the largest distance between two vertices."""
        v = self.nodes[self.elements[:, : self.ref.n_vertices]]
        diff = v[:, :, None, :] - v[:, None, :, :]
        return np.sqrt((diff**2).sum(-1)).max(axis=(1, 2))

    def side_nodes(self, name, vertices_only=False):
        """Unique node indices lying on the sides of a side set (or a node set)."""
        if name in self.node_sets:
            nodes = self.node_sets[name]
            if vertices_only:
                nodes = np.intersect1d(nodes, self.vertex_nodes())
            return np.unique(nodes)
        if name not in self.side_sets:
            raise KeyError(f"unknown boundary {name!r}")
        ref = self.ref
        sides = self.side_sets[name]
        out = []
        for local in range(len(ref.sides)):
            sel = sides[sides[:, 1] == local, 0]
            loc = ref.sides[local]
            if vertices_only:
                loc = [n for n in loc if n < ref.n_vertices]
            out.append(self.elements[np.ix_(sel, loc)].ravel())
        return np.unique(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)

    def find_node(self, point, tol=1e-10):
        d = np.linalg.norm(self.nodes - np.asarray(point, dtype=float), axis=1)
        i = int(np.argmin(d))
        if d[i] > tol:
            raise InvalidArgument(f"no mesh node at {tuple(point)}")
        return i

    def with_node_set(self, name, nodes):
        ns = dict(self.node_sets)
        ns[name] = np.atleast_1d(nodes)
        return Mesh(self.nodes, self.elements, self.elem_type, self.side_sets, ns)

    def boundary_names(self):
        return list(self.side_sets) + list(self.node_sets)


def build_interval_mesh(n, a, b, order=1):
    if n < 1 or not a < b:
        raise InvalidArgument("interval mesh needs n >= 1 and a < b")
    if order not in (1, 2):
        raise UnsupportedElement(f"order {order}")
    x = np.linspace(a, b, n * order + 1)
    i = np.arange(n) * order
    if order == 1:
        elems = np.column_stack([i, i + 1])
    else:
        elems = np.column_stack([i, i + 2, i + 1])
    return Mesh(x[:, None], elems, "EDGE2" if order == 1 else "EDGE3",
                {"left": [(0, 0)], "right": [(n - 1, 1)]})


def _check_rect(nx, ny, domain):
    x0, x1, y0, y1 = map(float, domain)
    if nx < 1 or ny < 1 or not (x0 < x1 and y0 < y1):
        raise InvalidArgument("structured mesh needs nx, ny >= 1 and a non-degenerate rectangle")
    return x0, x1, y0, y1


def _lattice(nx, ny, domain, order):
    x0, x1, y0, y1 = _check_rect(nx, ny, domain)
    mx, my = order * nx + 1, order * ny + 1
    X, Y = np.meshgrid(np.linspace(x0, x1, mx), np.linspace(y0, y1, my), indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    return nodes, (lambda i, j: j * mx + i)


def build_structured_quad_mesh(nx, ny, domain=(0.0, 1.0, 0.0, 1.0), order=1):
    """``nx * ny`` QUAD4/QUAD9 elements on ``domain = (xmin, xmax, ymin, ymax)``."""
    if order not in (1, 2):
        raise UnsupportedElement(f"order {order}")
    nodes, nid = _lattice(nx, ny, domain, order)
    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ex, ey = ex.ravel(), ey.ravel()
    i, j, o = ex * order, ey * order, order
    cols = [nid(i, j), nid(i + o, j), nid(i + o, j + o), nid(i, j + o)]
    if order == 2:
        cols += [nid(i + 1, j), nid(i + 2, j + 1), nid(i + 1, j + 2), nid(i, j + 1), nid(i + 1, j + 1)]
    elems = np.column_stack(cols)
    eid = np.arange(nx * ny)
    sides = {
        "bottom": np.column_stack([eid[ey == 0], np.zeros((ey == 0).sum(), int)]),
        "right": np.column_stack([eid[ex == nx - 1], np.ones((ex == nx - 1).sum(), int)]),
        "top": np.column_stack([eid[ey == ny - 1], np.full((ey == ny - 1).sum(), 2)]),
        "left": np.column_stack([eid[ex == 0], np.full((ex == 0).sum(), 3)]),
    }
    return Mesh(nodes, elems, "QUAD4" if order == 1 else "QUAD9", sides)


def build_structured_tri_mesh(nx, ny, domain=(0.0, 1.0, 0.0, 1.0), order=1):
    """Each structured quad split along its lower-left/upper-right diagonal."""
    if order not in (1, 2):
        raise UnsupportedElement(f"order {order}")
    nodes, nid = _lattice(nx, ny, domain, order)
    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    ex, ey = ex.ravel(), ey.ravel()
    i, j, o = ex * order, ey * order, order
    a = [nid(i, j), nid(i + o, j), nid(i + o, j + o)]
    b = [nid(i, j), nid(i + o, j + o), nid(i, j + o)]
    if order == 2:
        a += [nid(i + 1, j), nid(i + 2, j + 1), nid(i + 1, j + 1)]
        b += [nid(i + 1, j + 1), nid(i + 1, j + 2), nid(i, j + 1)]
    nq = nx * ny
    elems = np.empty((2 * nq, len(a)), dtype=np.int64)
    elems[0::2] = np.column_stack(a)
    elems[1::2] = np.column_stack(b)
    qa, qb = 2 * np.arange(nq), 2 * np.arange(nq) + 1

    def ss(ids, side):
        return np.column_stack([ids, np.full(len(ids), side)])

    sides = {
        "bottom": ss(qa[ey == 0], 0),
        "right": ss(qa[ex == nx - 1], 1),
        "top": ss(qb[ey == ny - 1], 1),
        "left": ss(qb[ex == 0], 2),
    }
    return Mesh(nodes, elems, "TRI3" if order == 1 else "TRI6", sides)


def build_conical_diffuser_mesh(nr, nz_cone, nz_pipe, family="TRI", order=1, inlet_radius=0.5,
                                outlet_radius=1.0, cone_length=1.0, length=4.0):
    """Axisymmetric (r, z) channel: a cone widening from ``inlet_radius`` to
    ``outlet_radius`` over ``cone_length``, then a straight pipe up to ``length``.

    Side sets are ``axis`` (r = 0), ``wall``, ``inlet`` (z = 0) and ``outlet``.
    Elements are straight sided, so the wall is represented exactly.
    """
    if not (0 < inlet_radius and 0 < outlet_radius and 0 < cone_length < length):
        raise InvalidArgument("diffuser needs positive radii and 0 < cone_length < length")
    if min(nr, nz_cone, nz_pipe) < 1:
        raise InvalidArgument("diffuser needs at least one element in each direction")
    builder = build_structured_quad_mesh if family == QUAD else build_structured_tri_mesh
    nz = nz_cone + nz_pipe
    base = builder(nr, nz, (0.0, 1.0, 0.0, float(nz)), order)

    def fn(p):
        s = p[:, 1]
        z = np.where(s <= nz_cone, s / nz_cone * cone_length,
                     cone_length + (s - nz_cone) / nz_pipe * (length - cone_length))
        radius = np.where(z <= cone_length, inlet_radius + (outlet_radius - inlet_radius) * z / cone_length,
                          outlet_radius)
        return np.column_stack([p[:, 0] * radius, z])

    m = map_mesh(base, fn, straight_sided=True)
    rename = {"left": "axis", "right": "wall", "bottom": "inlet", "top": "outlet"}
    sides = {rename[k]: v for k, v in m.side_sets.items()}
    return Mesh(m.nodes, m.elements, m.elem_type, sides, m.node_sets)


def map_mesh(mesh, fn, straight_sided=False):
    """Apply a coordinate transform ``fn(points) -> points`` to a mesh.

    With ``straight_sided`` only vertices are mapped and higher-order nodes are
    placed at edge/face midpoints, keeping elements affine where possible.
    """
    nodes = np.array(fn(mesh.nodes.copy()), dtype=float)
    if straight_sided and mesh.order == 2:
        ref = mesh.ref
        nv = ref.n_vertices
        vert_ids = mesh.vertex_nodes()
        new = mesh.nodes.copy()
        new[vert_ids] = nodes[vert_ids]
        for loc in ref.sides:
            if len(loc) == 3:
                a, b, m = loc
                new[mesh.elements[:, m]] = 0.5 * (new[mesh.elements[:, a]] + new[mesh.elements[:, b]])
        if ref.family == QUAD:
            new[mesh.elements[:, 8]] = new[mesh.elements[:, :nv]].mean(axis=1)
        nodes = new
    return Mesh(nodes, mesh.elements, mesh.elem_type, mesh.side_sets, mesh.node_sets)


@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Element map data at quadrature points, vectorized over elements.

    Shapes: ``xq (E, Q, d)``, ``jac (E, Q, d, d)`` with ``jac[..., i, k] =
    dx_i/dxi_k``, ``inv_jac (E, Q, d, d)`` with ``inv_jac[..., k, i] =
    dxi_k/dx_i``, ``det (E, Q)``, ``d2x (E, Q, d, d, d)`` the second
    derivatives of the map, and ``weights (Q,)``.
    """

    xq: np.ndarray
    jac: np.ndarray
    inv_jac: np.ndarray
    det: np.ndarray
    d2x: np.ndarray
    weights: np.ndarray
    points: np.ndarray

    @property
    def JxW(self):
        return self.det * self.weights


@dataclass(frozen=True, eq=False)
class MappedBasis:
    """Basis values at quadrature points: ``phi (Q, A)``, ``grad (E, Q, A, d)``,
    ``hess (E, Q, A, d, d)``."""

    phi: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


def compute_geometry(mesh, points, weights, elem_ids=None):
    ref = mesh.ref
    conn = mesh.elements if elem_ids is None else mesh.elements[elem_ids]
    X = mesh.nodes[conn]  # (E, A, d)
    N, dN, d2N = shape_eval(ref, points)
    xq = np.einsum("qa,ead->eqd", N, X)
    jac = np.einsum("qak,ead->eqdk", dN, X)
    d2x = np.einsum("qakl,ead->eqdkl", d2N, X)
    det = np.linalg.det(jac)
    if np.any(det <= 0):
        bad = np.unique(np.nonzero(det <= 0)[0])
        ids = bad if elem_ids is None else np.asarray(elem_ids)[bad]
        raise InvertedElement(f"non-positive mapping Jacobian in elements {ids[:10].tolist()}")
    inv = np.linalg.inv(jac)
    return ElementGeometry(xq, jac, inv, det, d2x, np.asarray(weights, dtype=float), np.asarray(points))


def map_basis(geom, basis_ref):
    """Physical gradients and Hessians of ``basis_ref`` under ``geom``.

    The Hessian includes the curvature of non-affine maps:
    ``H = J^-T (d2N - sum_m dN/dx_m d2x_m) J^-1``.
    """
    N, dN, d2N = shape_eval(basis_ref, geom.points)
    inv = geom.inv_jac
    grad = np.einsum("qak,eqki->eqai", dN, inv)
    corr = np.einsum("eqam,eqmkl->eqakl", grad, geom.d2x)
    ref_h = d2N[None] - corr
    hess = np.einsum("eqakl,eqki,eqlj->eqaij", ref_h, inv, inv)
    return MappedBasis(N, grad, hess)


@dataclass(frozen=True, eq=False)
class MappedElement:
    """Per-quadrature-point data for one element."""

    xq: np.ndarray
    phi: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    detJ: np.ndarray
    weights: np.ndarray

    @property
    def JxW(self):
        return self.detJ * self.weights


def map_element(mesh, elem_id, rule):
    if not 0 <= elem_id < mesh.n_elements:
        raise InvalidArgument(f"element id {elem_id} out of range")
    geom = compute_geometry(mesh, rule.points, rule.weights, elem_ids=[elem_id])
    b = map_basis(geom, mesh.ref)
    return MappedElement(geom.xq[0], b.phi, b.grad[0], b.hess[0], geom.det[0], geom.weights)


@dataclass(frozen=True, eq=False)
class FaceGeometry:
    """Side quadrature data for a list of (element, side) pairs sharing one side index."""

    elems: np.ndarray
    side: int
    xq: np.ndarray        # (F, Q, d)
    normal: np.ndarray    # (F, Q, d) outward unit normal
    JxW: np.ndarray       # (F, Q) surface measure times weight
    geom: ElementGeometry  # volume map evaluated at the side points


def face_geometry(mesh, sides, degree):
    """Group ``sides`` (rows of element, local side) by side index and map them."""
    sides = np.asarray(sides, dtype=np.int64).reshape(-1, 2)
    ref = mesh.ref
    out = []
    for local in np.unique(sides[:, 1]):
        elems = sides[sides[:, 1] == local, 0]
        if ref.family == EDGE:
            pts = np.array([[-1.0]]) if local == 0 else np.array([[1.0]])
            geom = compute_geometry(mesh, pts, np.ones(1), elems)
            sign = -1.0 if local == 0 else 1.0
            normal = np.full(geom.xq.shape, sign)
            jxw = np.ones(geom.det.shape)
        else:
            rule = quadrature_for(EDGE, degree)
            pts, dxi = side_reference_points(ref, int(local), rule.points[:, 0])
            geom = compute_geometry(mesh, pts, rule.weights, elems)
            t = np.einsum("eqdk,k->eqd", geom.jac, dxi)
            tn = np.linalg.norm(t, axis=-1)
            normal = np.stack([t[..., 1], -t[..., 0]], axis=-1) / tn[..., None]
            jxw = tn * rule.weights
        out.append(FaceGeometry(elems, int(local), geom.xq, normal, jxw, geom))
    return out
