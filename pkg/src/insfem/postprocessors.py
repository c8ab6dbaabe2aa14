"""Scalar quantities computed from a solution: flow rates, errors, point values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fem import RZ, evaluate_at_points
from .mesh import face_geometry, shape_eval


def _face_values(system, y, name, fg):
    ref = system.dofmap.refs[name]
    phi = shape_eval(ref, fg.geom.points)[0]
    if phi.ndim == 1:
        phi = phi[None]
    return np.asarray(y)[system.dofmap.elem_dofs[name][fg.elems]] @ phi.T


def volumetric_flow_rate(system, y, boundary, velocity=("vel_x", "vel_y"), coord=None, degree=None):
    """Signed outward flux ``int u . n dS`` over a side set.

    In RZ coordinates the surface measure is ``2 pi r ds``.
    """
    mesh = system.mesh
    if boundary not in mesh.side_sets:
        raise ConfigurationError(f"unknown side set {boundary!r}; available: {sorted(mesh.side_sets)}")
    for v in velocity:
        if v not in system.dofmap.blocks:
            raise ConfigurationError(f"flow rate needs velocity variable {v!r}")
    coord = (coord or system.coord).upper()
    degree = degree or system.qdegree
    total = 0.0
    for fg in face_geometry(mesh, mesh.side_sets[boundary], degree):
        un = sum(_face_values(system, y, v, fg) * fg.normal[..., k] for k, v in enumerate(velocity))
        w = fg.JxW
        if coord == RZ:
            w = w * 2.0 * math.pi * fg.xq[..., 0]
        total += float(np.sum(un * w))
    return total


def side_integral(system, y, boundary, variable, coord=None, degree=None):
    """``int u dS`` over a side set (RZ weighted by ``2 pi r``)."""
    mesh = system.mesh
    if boundary not in mesh.side_sets:
        raise ConfigurationError(f"unknown side set {boundary!r}")
    coord = (coord or system.coord).upper()
    total = 0.0
    for fg in face_geometry(mesh, mesh.side_sets[boundary], degree or system.qdegree):
        w = fg.JxW * (2.0 * math.pi * fg.xq[..., 0] if coord == RZ else 1.0)
        total += float(np.sum(_face_values(system, y, variable, fg) * w))
    return total


@dataclass
class Postprocessor:
    """Named scalar evaluated after every step.

    ``kind`` is one of ``flow_rate``, ``l2_error``, ``point_value``,
    ``residual_norm``, ``min``, ``max`` or ``side_integral``.
    """

    name: str
    kind: str
    boundary: str | None = None
    variable: str | None = None
    function: object = None
    point: tuple | None = None
    velocity: tuple = ("vel_x", "vel_y")

    def validate(self, system):
        mesh = system.mesh
        if self.boundary is not None and self.boundary not in mesh.side_sets:
            raise ConfigurationError(f"postprocessor {self.name!r}: unknown side set {self.boundary!r}")
        if self.variable is not None and self.variable not in system.dofmap.blocks:
            raise ConfigurationError(f"postprocessor {self.name!r}: unknown variable {self.variable!r}")
        if self.kind == "flow_rate":
            for v in self.velocity:
                if v not in system.dofmap.blocks:
                    raise ConfigurationError(f"postprocessor {self.name!r}: unknown velocity variable {v!r}")

    def __call__(self, system, y, t=0.0):
        from .verify.norms import l2_error

        k = self.kind
        if k == "flow_rate":
            return volumetric_flow_rate(system, y, self.boundary, self.velocity)
        if k == "side_integral":
            return side_integral(system, y, self.boundary, self.variable)
        if k == "l2_error":
            fn = self.function
            return l2_error(system, y, self.variable, lambda x: fn(x, t))
        if k == "point_value":
            return float(evaluate_at_points(system, y, self.variable, [self.point])[0])
        if k in ("min", "max"):
            vals = system.dofmap.field(y, self.variable)
            return float(vals.min() if k == "min" else vals.max())
        if k == "residual_norm":
            return float(np.linalg.norm(system.residual(y, t=t)))
        raise ConfigurationError(f"unknown postprocessor kind {k!r}")
