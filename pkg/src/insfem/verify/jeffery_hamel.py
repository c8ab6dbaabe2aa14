"""Semi-analytic Jeffery-Hamel wedge flow.

The similarity profile solves ``f''' + 2 Re alpha f f' + 4 alpha^2 f' = 0`` on
``0 < eta < 1`` with ``f(0) = 1``, ``f'(0) = 0`` and ``f(1) = 0``; the missing
initial slope ``f''(0)`` is found by shooting with a secant iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ..errors import InvalidArgument, NoConvergence

K_REFERENCE = -9.7822146449


def _rhs(alpha, re):
    a2 = 4.0 * alpha * alpha
    c = 2.0 * re * alpha

    def f(s):
        return np.array([s[1], s[2], -c * s[0] * s[1] - a2 * s[1]])
    return f


def _rk4(alpha, re, fpp0, n, eta_end=1.0):
    """Integrate from eta=0 with ``n`` steps per unit length up to ``eta_end``."""
    rhs = _rhs(alpha, re)
    steps = int(round(n * eta_end))
    h = eta_end / steps
    out = np.empty((steps + 1, 3))
    s = np.array([1.0, 0.0, fpp0])
    out[0] = s
    for i in range(steps):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = s
    return np.linspace(0.0, eta_end, steps + 1), out


@dataclass
class JefferyHamelSolution:
    alpha: float
    Re: float
    fpp0: float
    fp1: float
    K: float
    eta: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    residual: float

    def __post_init__(self):
        self._spline = CubicHermiteSpline(self.eta, self.f, self.fp)
        self._dspline = self._spline.derivative()

    def profile(self, eta):
        """f(|eta|); the profile is even in eta."""
        return self._spline(np.abs(np.asarray(eta, dtype=float)))

    def profile_derivative(self, eta):
        eta = np.asarray(eta, dtype=float)
        return np.sign(eta) * self._dspline(np.abs(eta))


def jeffery_hamel_solve(alpha, Re, tol=1e-13, steps=4000, eta_max=1.25, max_iter=50):
    """Solve the similarity equation by RK4 shooting.

    Parameters
    ----------
    alpha : float
        Wedge half-angle in radians.
    Re : float
        ``lambda * alpha / nu``.
    steps : int
        RK4 steps per unit of eta (at least 2000).
    eta_max : float
        The profile is continued past the wall up to this value so exact fields
        can be evaluated slightly outside a discretized wedge.
    """
    if not alpha > 0 or alpha >= math.pi / 2:
        raise InvalidArgument("alpha must lie in (0, pi/2)")
    if steps < 2000:
        raise InvalidArgument("use at least 2000 RK4 steps")

    def miss(g):
        return _rk4(alpha, Re, g, steps)[1][-1, 0]

    # Stokes-limit slope as the first guess
    c = math.cos(2 * alpha)
    g0 = -4 * alpha * alpha / (1 - c)
    g1 = g0 * 1.1 - 0.1
    m0, m1 = miss(g0), miss(g1)
    history = [(g0, m0), (g1, m1)]
    for _ in range(max_iter):
        if abs(m1) <= tol:
            break
        if m1 == m0:
            raise NoConvergence(f"shooting stalled; last guesses {history[-2:]}")
        g0, g1 = g1, g1 - m1 * (g1 - g0) / (m1 - m0)
        m0, m1 = m1, miss(g1)
        history.append((g1, m1))
    else:
        raise NoConvergence(f"shooting did not converge in {max_iter} iterations; bracket {history[-2:]}")
    eta, s = _rk4(alpha, Re, g1, steps, eta_max)
    i1 = int(round(steps))
    fp1 = s[i1, 1]
    K = (0.5 * fp1**2 - alpha * Re / 3.0 - 2 * alpha**2) / (4 * alpha**2)
    return JefferyHamelSolution(alpha, Re, g1, fp1, K, eta, s[:, 0], s[:, 1], abs(m1))


def stokes_profile(alpha, eta):
    """Closed-form profile for Re = 0."""
    c = math.cos(2 * alpha)
    return (np.cos(2 * alpha * np.asarray(eta)) - c) / (1 - c)


@dataclass
class JefferyHamelFields:
    """Exact fields in Cartesian coordinates for the wedge ``r1 <= r <= r2``."""

    sol: JefferyHamelSolution
    lam: float
    mu: float
    p_star: float

    def polar(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        th = np.arctan2(pts[:, 1], pts[:, 0])
        return r, th

    def u_r(self, pts):
        r, th = self.polar(pts)
        return self.lam / r * self.sol.profile(th / self.sol.alpha)

    def u1(self, pts):
        r, th = self.polar(pts)
        return self.u_r(pts) * np.cos(th)

    def u2(self, pts):
        r, th = self.polar(pts)
        return self.u_r(pts) * np.sin(th)

    def p(self, pts):
        r, th = self.polar(pts)
        return self.p_star + 2 * self.mu * self.lam / r**2 * (self.sol.profile(th / self.sol.alpha) + self.sol.K)


def jh_exact_fields(sol, lam=None, mu=1.0, p_star=None, rho=1.0):
    """Exact velocity and pressure; by default ``lam = Re nu / alpha`` and the
    pressure vanishes at ``r = 1`` on the centerline."""
    nu = mu / rho
    if lam is None:
        lam = sol.Re * nu / sol.alpha
    if p_star is None:
        p_star = -2 * mu * lam * (1.0 + sol.K)
    return JefferyHamelFields(sol, lam, mu, p_star)
