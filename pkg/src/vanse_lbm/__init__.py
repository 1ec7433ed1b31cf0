"""Lattice Boltzmann solver for the volume averaged Navier-Stokes equations."""
__version__ = "0.1.0"

from .errors import ConfigurationError, NumericalBreakdown
from .lattice import make_lattice, make_quadrature
from .fields import Grid, PopulationField
from .kernel import SchemeConfig, Stepper
from .mms import CASES, get_case
from .analysis import ConvergenceTable, ErrorReport, eoc, error_norms

__all__ = [
    "ConfigurationError", "NumericalBreakdown", "make_lattice", "make_quadrature", "Grid",
    "PopulationField", "SchemeConfig", "Stepper", "CASES", "get_case", "ConvergenceTable",
    "ErrorReport", "eoc", "error_norms",
]
