"""Willmore energy minimization for genus-1 surfaces under a fixed conformal class."""

from .backend import backend_name
from .geometry import (
    GeometryError,
    Immersion,
    curvature,
    el_operator,
    gauss_bonnet_report,
    projections,
    pullback_metric,
    willmore_energy,
)
from .grid import GridSpec, integrate, partial, poisson_solve, spectral_partial, vector_poisson_solve

__version__ = "0.1.0"
