"""Theta-method time integration with adaptive and retried steps."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidArgument, StepFailed, TimestepTooSmall
from .solvers import FieldSplitOptions, KrylovOptions, NewtonOptions, newton_solve

log = logging.getLogger(__name__)

STEADY, TRANSIENT = "steady", "transient"


@dataclass
class AdaptiveDT:
    optimal_iterations: int = 5
    growth_factor: float = 1.2
    cutback_factor: float = 0.4

    def __post_init__(self):
        if not self.growth_factor > 1.0 > self.cutback_factor > 0.0:
            raise InvalidArgument("need growth_factor > 1 > cutback_factor > 0")


@dataclass
class ExecutionerOptions:
    mode: str = STEADY
    theta: float = 1.0
    dt0: float = 1.0
    dtmin: float = 0.0
    num_steps: int | None = None
    end_time: float | None = None
    start_time: float = 0.0
    ss_check: bool = False
    ss_check_tol: float = 1e-8
    adaptive: AdaptiveDT | None = None
    newton: NewtonOptions = field(default_factory=NewtonOptions)
    krylov: KrylovOptions = field(default_factory=lambda: KrylovOptions(preconditioner="lu"))
    fieldsplit: FieldSplitOptions | None = None

    def __post_init__(self):
        self.mode = self.mode.lower()
        if self.mode not in (STEADY, TRANSIENT):
            raise InvalidArgument(f"unknown executioner mode {self.mode!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise InvalidArgument("theta must lie in [0, 1]")
        if self.mode == TRANSIENT:
            if not self.dt0 > 0:
                raise InvalidArgument("dt must be positive")
            if self.dtmin > self.dt0:
                raise InvalidArgument("dtmin must not exceed dt")
            if self.num_steps is None and self.end_time is None:
                raise InvalidArgument("transient runs need num_steps or end_time")
            if self.theta == 0.0:
                warnings.warn("theta = 0 is the explicit Euler method; stability is not guaranteed", stacklevel=2)


@dataclass
class StepRecord:
    step: int
    time: float
    dt: float
    nl_its: int
    residual: float
    converged: bool


@dataclass
class RunResult:
    y: np.ndarray
    time: float
    steps: list
    steady_state: bool = False
    newton: object = None


def adapt_dt(dt, newton_iterations, opts):
    """Grow ``dt`` after an easy step, cut it back after a hard one."""
    if newton_iterations <= opts.optimal_iterations:
        return dt * opts.growth_factor
    return dt * opts.cutback_factor


def retry_on_failure(dt, dtmin=0.0):
    """Halve a failed step; abort once it falls below ``dtmin``."""
    new = 0.5 * dt
    if new < dtmin or new <= 0.0:
        raise TimestepTooSmall(f"timestep {new:.3e} below dtmin {dtmin:.3e}")
    return new


def steady_state_check(y_new, y_old, dt, tol):
    """True when the rate of change ``|y_new - y_old| / (dt |y_new|)`` is below ``tol``."""
    num = np.linalg.norm(np.asarray(y_new) - np.asarray(y_old))
    den = dt * np.linalg.norm(y_new)
    if den == 0.0:
        return num == 0.0
    return num / den < tol


def theta_step(system, y_old, t_old, dt, theta=1.0, nopts=None, kopts=None, fieldsplit=None):
    """Advance one theta-method step.

    Time terms use ``(y - y_old)/dt`` and spatial terms the state
    ``theta*y + (1-theta)*y_old``; constraint values are taken at the new time.
    Raises :class:`StepFailed` if Newton does not converge.
    """
    t_new = t_old + dt
    y_old = np.asarray(y_old, dtype=float)
    y0 = system.impose_constraints(y_old, t_new)

    def F(y):
        return system.residual(y, y_old, t=t_new, dt=dt, theta=theta)

    def J(y):
        return system.jacobian(y, y_old, t=t_new, dt=dt, theta=theta)

    res = newton_solve(F, J, y0, nopts, kopts, fieldsplit)
    if not res.converged:
        raise StepFailed(f"nonlinear solve failed at t={t_new:.6g} ({res.reason})", res)
    return res


def steady_solve(system, y0=None, nopts=None, kopts=None, fieldsplit=None, t=0.0):
    if system.is_transient:
        raise ConfigurationError("time-derivative kernels cannot be used with a steady executioner")
    y0 = np.zeros(system.n_dofs) if y0 is None else np.asarray(y0, dtype=float)
    y0 = system.impose_constraints(y0, t)
    res = newton_solve(lambda y: system.residual(y, t=t), lambda y: system.jacobian(y, t=t), y0, nopts, kopts,
                       fieldsplit)
    return res


class Executioner:
    """Drives a :class:`~insfem.fem.System` in steady or transient mode."""

    def __init__(self, system, opts, on_step=None):
        self.system = system
        self.opts = opts
        self.on_step = on_step

    def run(self, y0=None):
        o = self.opts
        sysm = self.system
        y = np.zeros(sysm.n_dofs) if y0 is None else np.asarray(y0, dtype=float).copy()
        if o.mode == STEADY:
            res = steady_solve(sysm, y, o.newton, o.krylov, o.fieldsplit, o.start_time)
            rec = StepRecord(1, o.start_time, math.inf, res.iterations, res.history[-1], res.converged)
            log.info("steady solve: %d nonlinear iterations, |F| = %.3e", res.iterations, res.history[-1])
            if not res.converged:
                raise StepFailed(f"steady solve did not converge ({res.reason})", res)
            if self.on_step:
                self.on_step(rec, res.y)
            return RunResult(res.y, o.start_time, [rec], False, res)

        t = o.start_time
        dt = o.dt0
        y = sysm.impose_constraints(y, t)
        steps = []
        step = 0
        steady = False
        last = None
        while True:
            if o.num_steps is not None and step >= o.num_steps:
                break
            if o.end_time is not None:
                remaining = o.end_time - t
                if remaining <= 1e-12 * max(1.0, abs(o.end_time)):
                    break
                dt = min(dt, remaining)
            while True:
                try:
                    res = theta_step(sysm, y, t, dt, o.theta, o.newton, o.krylov, o.fieldsplit)
                    break
                except StepFailed as exc:
                    log.warning("step failed at t=%.6g with dt=%.3e: %s", t + dt, dt, exc)
                    dt = retry_on_failure(dt, o.dtmin)
            step += 1
            y_new = res.y
            t += dt
            rec = StepRecord(step, t, dt, res.iterations, res.history[-1], True)
            steps.append(rec)
            log.info("step %d t=%.6g dt=%.4g nl_its=%d |F|=%.3e", step, t, dt, res.iterations, res.history[-1])
            if self.on_step:
                self.on_step(rec, y_new)
            done = o.ss_check and steady_state_check(y_new, y, dt, o.ss_check_tol)
            y = y_new
            last = res
            if done:
                steady = True
                log.info("steady state reached at t=%.6g", t)
                break
            if o.adaptive is not None:
                dt = adapt_dt(dt, res.iterations, o.adaptive)
        return RunResult(y, t, steps, steady, last)
