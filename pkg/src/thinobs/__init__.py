"""Numerical construction of homogeneous solutions of the thin obstacle problem in three dimensions.

The pipeline runs from Legendre-type profiles through slit-wedge eigenpairs to
the obstruction functional ``c(sigma)`` and its root.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BracketError,
    ConvergenceError,
    GrowthBoundError,
    IntegrationError,
    NearZeroError,
    NegativeCurvatureError,
    NodalSignError,
    ThinObsError,
)
