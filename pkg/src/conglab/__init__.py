"""Hydrodynamic-type systems, their conservation laws, transformations and line-congruence geometry."""

from .claws import CommutingFlow, ConservationLaw
from .expr import Grid, parse, to_string
from .hydro import DiagonalSystem, GeneralSystem

__all__ = ["CommutingFlow", "ConservationLaw", "DiagonalSystem", "GeneralSystem", "Grid", "parse", "to_string"]
__version__ = "0.1.0"
