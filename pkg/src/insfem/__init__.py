"""Stabilized finite element solver for the incompressible Navier-Stokes equations."""

from .inputdsl import load_simulation
from .runner import SimulationResult, run_simulation

__version__ = "0.1.0"

__all__ = ["load_simulation", "run_simulation", "SimulationResult", "__version__"]
