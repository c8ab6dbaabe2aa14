"""Input files: hierarchical parser, substitution, expressions and simulation building."""

from .builder import SimulationSpec, build_simulation, load_simulation
from .expression import Expression, eval_expression, parse_expression
from .hit import Section, parse_file, parse_hit, render, substitute_dbe

__all__ = [
    "SimulationSpec", "build_simulation", "load_simulation",
    "Expression", "eval_expression", "parse_expression",
    "Section", "parse_file", "parse_hit", "render", "substitute_dbe",
]
