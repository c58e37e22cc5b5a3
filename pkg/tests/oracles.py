"""Independent cross-checks used by the module and acceptance tests.

Everything here recomputes a quantity through a different route than the
package uses, so agreement is evidence rather than tautology.
"""

import numpy as np
from scipy.integrate import solve_ivp

from ncfilm import model


def ode_period(h_min: float, pbar: float) -> float:
    """Period of the zero-pressure orbit by direct integration.

    The package computes it as a turning-point quadrature; here we shoot
    the phase-plane system (h, h') from the inner turning point and time
    the return to h' = 0, doubling the half-loop.
    """

    def rhs(x, y):
        return [y[1], model.pi(y[0], pbar)]

    def turning(x, y):
        return y[1]

    turning.terminal = True
    turning.direction = -1
    # (h_min, 0) is a regular point of the flow: the slope leaves zero at
    # rate pi(h_min) > 0, so the downward-crossing event only fires at the
    # opposite turning point half a loop later
    sol = solve_ivp(
        rhs, (0.0, 1e4), [h_min, 0.0], events=turning,
        rtol=1e-13, atol=1e-14, method="DOP853",
    )
    if not sol.t_events[0].size:
        raise RuntimeError("no turning point found")
    return 2.0 * float(sol.t_events[0][0])


def dispersion_rate(k: int, H: float, L: float, gamma: float) -> float:
    """Uniform-state growth rate written out from scratch."""
    q = 2.0 * np.pi * k / L
    return (gamma - H**3 * q**2) * (model.pi_prime(H) + q**2)
