"""Numerical verification lab for second-order regularity of p-Laplace type equations."""

from .constants import ParameterRangeError, ProblemParams
from .grid import Region, ScalarField, SpaceTimeField

__version__ = "0.1.0"

__all__ = ["ParameterRangeError", "ProblemParams", "Region", "ScalarField", "SpaceTimeField", "__version__"]
