"""Left-tail asymptotics of renewal measures of two-sided random walks."""

from .dist import (
    LatticePmf,
    PolyGeomLattice,
    RegVarExpLeft,
    StepDistribution,
    TwoSidedExponential,
    calibrate_boundary,
    detect_span,
    laplace,
    laplace_deriv,
    mass_in_window,
)
from .extreal import INF, ExtendedReal

__version__ = "0.1.0"
