"""Legacy ASCII VTK and CSV writers (plus a VTK reader for round trips)."""

from __future__ import annotations

import csv
import os

import numpy as np

from .errors import InvalidArgument
from .fem import VELOCITY
from .mesh import VTK_CELL_TYPES, shape_eval

_VTK_TO_ELEM = {v: k for k, v in VTK_CELL_TYPES.items()}


def nodal_field(system, y, name):
    """Values of ``name`` at every mesh node.

    Lower-order fields on quadratic meshes are evaluated at mid-side and
    center nodes through their own basis.
    """
    dm = system.dofmap
    mesh = system.mesh
    ref = dm.refs[name]
    vals = np.asarray(y, dtype=float)[dm.elem_dofs[name]]
    if ref.n_nodes == mesh.ref.n_nodes:
        out = np.empty(mesh.n_nodes)
        out[mesh.elements] = vals
        return out
    phi = shape_eval(ref, mesh.ref.node_coords)[0]
    out = np.empty(mesh.n_nodes)
    out[mesh.elements] = vals @ phi.T
    return out


def _fmt(v):
    return repr(float(v))


def write_vtk(system, y, path, variables=None, title="insfem output"):
    """Write nodal fields and a 3-component ``vel`` vector to legacy VTK."""
    mesh = system.mesh
    dm = system.dofmap
    names = [v.name for v in dm.variables] if variables is None else list(variables)
    for n in names:
        if n not in dm.blocks:
            raise InvalidArgument(f"unknown variable {n!r}")
    fields = {n: nodal_field(system, y, n) for n in names}
    vel = [v.name for v in dm.variables if v.role == VELOCITY]
    pts = np.zeros((mesh.n_nodes, 3))
    pts[:, : mesh.dim] = mesh.nodes
    ctype = VTK_CELL_TYPES[mesh.elem_type]
    npe = mesh.elements.shape[1]
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [" ".join(_fmt(c) for c in p) for p in pts]
    lines.append(f"CELLS {mesh.n_elements} {mesh.n_elements * (npe + 1)}")
    lines += [f"{npe} " + " ".join(map(str, e)) for e in mesh.elements]
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines += [str(ctype)] * mesh.n_elements
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    for n, f in fields.items():
        lines += [f"SCALARS {n} double 1", "LOOKUP_TABLE default"]
        lines += [_fmt(v) for v in f]
    if vel:
        comps = [fields[v] if v in fields else nodal_field(system, y, v) for v in vel]
        while len(comps) < 3:
            comps.append(np.zeros(mesh.n_nodes))
        lines.append("VECTORS vel double")
        lines += [" ".join(_fmt(c[i]) for c in comps[:3]) for i in range(mesh.n_nodes)]
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc.strerror}") from exc


def read_vtk(path):
    """Read files produced by :func:`write_vtk`.

    Returns a dict with ``points (n, 3)``, ``cells`` (list of index arrays),
    ``cell_types``, ``point_data`` (name -> array) and ``vectors``.
    """
    with open(path) as fh:
        toks = fh.read().split("\n")
    if not toks[0].startswith("# vtk DataFile"):
        raise InvalidArgument(f"{path} is not a legacy VTK file")
    it = iter(toks[4:])
    out = {"points": None, "cells": [], "cell_types": None, "point_data": {}, "vectors": {}}
    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            out["points"] = np.array([[float(v) for v in next(it).split()] for _ in range(n)])
        elif key == "CELLS":
            n = int(parts[1])
            out["cells"] = [np.array(next(it).split()[1:], dtype=np.int64) for _ in range(n)]
        elif key == "CELL_TYPES":
            n = int(parts[1])
            out["cell_types"] = np.array([int(next(it)) for _ in range(n)])
        elif key == "SCALARS":
            name = parts[1]
            next(it)
            n = len(out["points"])
            out["point_data"][name] = np.array([float(next(it)) for _ in range(n)])
        elif key == "VECTORS":
            n = len(out["points"])
            out["vectors"][parts[1]] = np.array([[float(v) for v in next(it).split()] for _ in range(n)])
    return out


def write_csv(path, names, rows):
    """Write ``time`` plus postprocessor columns; ``rows`` holds ``(t, values)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + list(names))
        for t, vals in rows:
            w.writerow([_fmt(t)] + [_fmt(v) for v in vals])


class OutputWriter:
    """Collects postprocessor rows and writes VTK snapshots every ``interval`` steps."""

    def __init__(self, basename, formats=("vtk", "csv"), interval=1, directory="."):
        if interval < 1:
            raise InvalidArgument("output interval must be at least 1")
        self.basename = basename
        self.formats = tuple(f.lower() for f in formats)
        self.interval = int(interval)
        self.directory = directory
        self.rows = []
        self.names = []
        self.files = []

    def path(self, suffix):
        return os.path.join(self.directory, f"{self.basename}{suffix}")

    def record(self, step, t, system, y, pp_values):
        self.names = list(pp_values)
        self.rows.append((t, list(pp_values.values())))
        if "vtk" in self.formats and step % self.interval == 0:
            p = self.path(f"_{step:04d}.vtk")
            write_vtk(system, y, p)
            self.files.append(p)

    def finish(self, step, t, system, y):
        if "vtk" in self.formats and (not self.files or not self.files[-1].endswith(f"_{step:04d}.vtk")):
            p = self.path(f"_{step:04d}.vtk")
            write_vtk(system, y, p)
            self.files.append(p)
        if "csv" in self.formats:
            p = self.path(".csv")
            write_csv(p, self.names, self.rows)
            self.files.append(p)
        return self.files
