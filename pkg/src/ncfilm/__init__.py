"""Numerical laboratory for a non-conserved thin-film equation.

The evolution dh/dt = (h^3 p_x)_x + gamma*p with p = pi(h) - h_xx couples
conserved Cahn-Hilliard-type transport to a non-conserved Allen-Cahn-type
source.  Subpackages cover uniform states and their dispersion relation,
spatially periodic steady states of second and fourth order, Floquet
analysis of secondary bifurcations, linearized spectra, time evolution
(limit cycles, slow-fast dynamics, finite-time rupture), and the
self-similar rupture profile.
"""

__version__ = "0.1.0"

from .model import (
    ConvergenceError,
    Diagnostics,
    GridFunction,
    ModelParams,
    PositivityError,
    diagnostics,
    pi,
    potential,
    pressure_field,
)

__all__ = [
    "ConvergenceError",
    "Diagnostics",
    "GridFunction",
    "ModelParams",
    "PositivityError",
    "diagnostics",
    "pi",
    "potential",
    "pressure_field",
    "__version__",
]
