"""Acceptance checks and suite results."""

from __future__ import annotations

import time
from dataclasses import dataclass, field


@dataclass
class Check:
    """A measured quantity compared against an acceptance window."""

    name: str
    value: float
    target: str
    passed: bool

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.6g} (target {self.target})"


def within(name, value, center, tol):
    return Check(name, value, f"{center} +/- {tol}", abs(value - center) <= tol)


def at_least(name, value, bound):
    return Check(name, value, f">= {bound}", value >= bound)


def at_most(name, value, bound):
    return Check(name, value, f"<= {bound:g}", value <= bound)


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def report(self):
        lines = [f"== {self.name} ({self.seconds:.1f} s)"]
        for t in self.tables:
            lines.append(t)
        lines += [c.line() for c in self.checks]
        return "\n".join(lines)


def timed(fn):
    """Store the wall time of a suite function in ``result.seconds``."""
    def run(*a, **kw):
        t0 = time.perf_counter()
        out = fn(*a, **kw)
        out.seconds = time.perf_counter() - t0
        return out
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run
