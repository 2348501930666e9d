"""Qubit pure-state estimation from N identical copies.

Collective fidelity bounds, fixed and adaptive local von Neumann schemes,
Fisher-information asymptotics, and a reproducible experiment harness.
"""

__version__ = "0.1.0"

from ._kernels import backend_name
from .core import (
    FidelityResult,
    Guess,
    Method,
    Mode,
    PosteriorSummary,
    fidelity,
    optimal_guess,
    posterior_summary,
    quadrature_grid,
    sample_prior,
    sphere_monomial_integral,
    unit_vector,
)

__all__ = [
    "FidelityResult",
    "Guess",
    "Method",
    "Mode",
    "PosteriorSummary",
    "backend_name",
    "fidelity",
    "optimal_guess",
    "posterior_summary",
    "quadrature_grid",
    "sample_prior",
    "sphere_monomial_integral",
    "unit_vector",
]
