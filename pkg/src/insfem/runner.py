"""Execute a :class:`~insfem.inputdsl.builder.SimulationSpec`."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

from .output import OutputWriter
from .timeloop import Executioner

log = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    system: object
    run: object
    postprocessors: list = field(default_factory=list)  # (t, {name: value})
    files: list = field(default_factory=list)

    @property
    def y(self):
        return self.run.y

    def last(self, name):
        return self.postprocessors[-1][1][name]


def run_simulation(spec, output_dir=None, write=True):
    """Build the system, run the executioner, evaluate postprocessors each step
    and write outputs into ``output_dir`` (the current directory by default)."""
    system = spec.build_system()
    out_dir = output_dir or "."
    if write:
        os.makedirs(out_dir, exist_ok=True)
    writer = OutputWriter(spec.outputs.basename, spec.outputs.formats if write else (), spec.outputs.interval, out_dir)
    rows = []

    def on_step(rec, y):
        vals = {pp.name: pp(system, y, rec.time) for pp in spec.postprocessors}
        rows.append((rec.time, vals))
        writer.record(rec.step, rec.time, system, y, vals)
        if vals:
            log.info("t=%.6g %s", rec.time, " ".join(f"{k}={v:.6g}" for k, v in vals.items()))

    res = Executioner(system, spec.executioner, on_step).run()
    files = writer.finish(len(res.steps), res.time, system, res.y) if write else []
    return SimulationResult(system, res, rows, files)
