"""Exact solutions, error norms and refinement studies."""

from .jeffery_hamel import K_REFERENCE, jeffery_hamel_solve, jh_exact_fields, stokes_profile
from .norms import ConvergenceStudy, fit_rate, h1_seminorm_error, l2_error
from .study import SUITES, run_convergence_study

__all__ = [
    "K_REFERENCE", "jeffery_hamel_solve", "jh_exact_fields", "stokes_profile",
    "ConvergenceStudy", "fit_rate", "h1_seminorm_error", "l2_error",
    "SUITES", "run_convergence_study",
]
