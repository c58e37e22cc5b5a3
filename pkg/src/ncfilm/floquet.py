"""Monodromy analysis of perturbations around zero-pressure periodic profiles.

The linearized steady problem about a zero-pressure periodic state is a 4x4
system with periodic coefficients whose pressure pair (p, h^3 p') decouples
from the height pair (h, h').  Integrating the principal fundamental matrix
over one domain therefore yields a block-triangular monodromy matrix: the
pressure block decides whether a periodic pressure perturbation exists at
all, and the height entries of the third and fourth fundamental solutions
decide whether it extends to a periodic height perturbation.  Both checks
together locate the domain sizes where a nonzero-pressure branch detaches
from the zero-pressure family.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .model import ConvergenceError, ModelParams, pi, pi_prime
from .steady2 import PhasePlaneOrbit, SteadyProfile, orbit_for_period

__all__ = [
    "MonodromyResult",
    "SecondaryBifurcation",
    "monodromy2",
    "monodromy4",
    "secondary_bifurcation_scan",
]

logger = logging.getLogger(__name__)

RTOL = 1e-10
ATOL = 1e-12
TOL_RHO = 1e-4


@dataclass(frozen=True)
class MonodromyResult:
    """Fundamental-matrix data after one traversal of the domain.

    The pressure block B2 is always present; the full 4x4 matrix and the
    height entries of the third/fourth fundamental solutions are filled
    only by the 4x4 integration.
    """

    B2: np.ndarray
    multipliers2: np.ndarray
    B4: np.ndarray | None = None
    multipliers4: np.ndarray | None = None
    H3L: float | None = None
    H4L: float | None = None
    product: float | None = None


@dataclass(frozen=True)
class SecondaryBifurcation:
    """A domain size passing both the multiplier and the closure test."""

    L: float
    rho_gap: float
    product: float
    located_by: str  # 'sign_change' for simple zeros, 'abs_minimum' for even-order ones


def _start_state(base: SteadyProfile) -> float:
    if base.order not in ("uniform", "second"):
        raise ValueError(
            "monodromy analysis needs a zero-pressure base profile, "
            f"got order={base.order!r}"
        )
    return float(np.min(base.h.values))


def _sorted_eigvals(B: np.ndarray) -> np.ndarray:
    vals = np.linalg.eigvals(B)
    return vals[np.lexsort((vals.imag, -vals.real))]


def _integrate_blocks(
    h0: float,
    L: float,
    gamma: float,
    pbar: float,
    full: bool,
    rtol: float = RTOL,
    atol: float = ATOL,
    flat: bool = False,
) -> np.ndarray:
    """Final fundamental matrix over [0, L]; 2x2 pressure block or full 4x4.

    The base profile is regenerated alongside the perturbation system from
    its own planar equation h'' = Pi(h), started at the trough, so the
    coefficients are exact rather than interpolated from a stored grid.
    flat bases must be pinned instead: the thin root is a saddle of the
    planar equation and regeneration drifts off it exponentially.
    """
    m = 4 if full else 2

    def rhs(x, y):
        H, V = y[0], y[1]
        M = y[2:].reshape(m, m)
        dM = np.empty_like(M)
        if full:
            dM[0] = M[1]
            dM[1] = pi_prime(H) * M[0] - M[2]
            dM[2] = M[3] / H**3
            dM[3] = -gamma * M[2]
        else:
            dM[0] = M[1] / H**3
            dM[1] = -gamma * M[0]
        if flat:
            return np.concatenate(([0.0, 0.0], dM.ravel()))
        return np.concatenate(([V, pi(H, pbar)], dM.ravel()))

    y0 = np.concatenate(([h0, 0.0], np.eye(m).ravel()))
    sol = solve_ivp(rhs, (0.0, L), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(
            f"fundamental-matrix integration stopped at x = {sol.t[-1]:.6g} "
            f"of {L:.6g}: {sol.message}"
        )
    return sol.y[2:, -1].reshape(m, m)


def monodromy2(base: SteadyProfile, params: ModelParams | None = None) -> MonodromyResult:
    """Pressure-block monodromy matrix over the domain of `base`."""
    p = params or base.params
    h0 = _start_state(base)
    B2 = _integrate_blocks(h0, p.L, p.gamma, p.pbar, full=False,
                           flat=base.order == "uniform")
    return MonodromyResult(B2=B2, multipliers2=_sorted_eigvals(B2))


def monodromy4(base: SteadyProfile, params: ModelParams | None = None) -> MonodromyResult:
    """Full 4x4 monodromy matrix plus the height-closure entries."""
    p = params or base.params
    h0 = _start_state(base)
    B4 = _integrate_blocks(h0, p.L, p.gamma, p.pbar, full=True,
                           flat=base.order == "uniform")
    B2 = B4[2:, 2:]
    H3L, H4L = float(B4[0, 2]), float(B4[0, 3])
    return MonodromyResult(
        B2=B2,
        multipliers2=_sorted_eigvals(B2),
        B4=B4,
        multipliers4=_sorted_eigvals(B4),
        H3L=H3L,
        H4L=H4L,
        product=H3L * H4L,
    )


def _pressure_block(L: float, k: int, gamma: float, pbar: float) -> np.ndarray:
    # tighter than the public tolerance: at a unit-multiplier point the
    # block is defective and eigenvalues feel the square root of any error
    orb = orbit_for_period(L / k, pbar)
    return _integrate_blocks(orb.h_min, L, gamma, pbar, full=False, rtol=1e-12, atol=1e-14)


def _rho_gap(L: float, k: int, gamma: float, pbar: float) -> float:
    """Distance of the pressure-block multipliers from one."""
    B2 = _pressure_block(L, k, gamma, pbar)
    return float(np.min(np.abs(np.linalg.eigvals(B2) - 1.0)))


def _trace_gap(L: float, k: int, gamma: float, pbar: float) -> float:
    return float(np.trace(_pressure_block(L, k, gamma, pbar))) - 2.0


def _closure_product(L: float, k: int, gamma: float, pbar: float) -> float:
    orb = orbit_for_period(L / k, pbar)
    B4 = _integrate_blocks(orb.h_min, L, gamma, pbar, full=True)
    return float(B4[0, 2] * B4[0, 3])


def secondary_bifurcation_scan(
    pbar: float,
    gamma: float,
    k: int,
    L_range: tuple[float, float],
    resolution: float = 0.5,
    tol_rho: float = TOL_RHO,
) -> list[SecondaryBifurcation]:
    """Domain sizes where a nonzero-pressure branch leaves the k-hump family.

    Locates unit multipliers of the pressure block as local minima of
    min|rho - 1| (sign-change detection misses them for multi-hump bases,
    where the trace only touches 2), then keeps the candidates where the
    height-closure product vanishes as well.  Simple product zeros are
    refined by bisection; even-order zeros (k-hump bases produce order-k
    contact) are located by a bounded minimum search and tagged.
    """
    lo, hi = sorted(map(float, L_range))
    n = max(int(round((hi - lo) / resolution)) + 1, 2)
    grid = np.linspace(lo, hi, n)

    samples: list[tuple[float, float]] = []
    for L in grid:
        try:
            samples.append((float(L), _rho_gap(L, k, gamma, pbar)))
        except (ConvergenceError, ValueError) as exc:
            logger.info("no %d-hump base at L = %.4f: %s", k, L, exc)

    roots: list[SecondaryBifurcation] = []
    for i in range(1, len(samples) - 1):
        La, fa = samples[i - 1]
        Lm, fm = samples[i]
        Lb, fb = samples[i + 1]
        # unit multipliers appear as local minima of the gap: V-shaped at
        # transversal crossings, quadratic where the trace only touches 2
        if not (fm <= fa and fm <= fb) or Lb - La > 2.5 * resolution:
            continue
        # transversal crossings sit at sign changes of tr - 2 (the multiplier
        # gap is a square-root cusp there, too steep for a minimizer); the
        # tangential touches have no sign change but a smooth quadratic gap
        ta = _trace_gap(La, k, gamma, pbar)
        tb = _trace_gap(Lb, k, gamma, pbar)
        if ta * tb < 0.0:
            L_rho = brentq(_trace_gap, La, Lb, args=(k, gamma, pbar), xtol=1e-10)
        else:
            opt_rho = minimize_scalar(
                _rho_gap, args=(k, gamma, pbar), bounds=(La, Lb), method="bounded",
                options={"xatol": 1e-9},
            )
            L_rho = float(opt_rho.x)
        gap = _rho_gap(L_rho, k, gamma, pbar)
        if gap > tol_rho:
            continue

        # closure test on a window around the unit-multiplier point
        delta = 0.5 * min(resolution, 0.5)
        wa, wb = L_rho - delta, L_rho + delta
        try:
            ga = _closure_product(wa, k, gamma, pbar)
            gb = _closure_product(wb, k, gamma, pbar)
        except (ConvergenceError, ValueError) as exc:
            logger.info("closure product unavailable near L = %.4f: %s", L_rho, exc)
            continue
        scale = max(abs(ga), abs(gb), 1e-300)
        if ga * gb < 0.0:
            L_star = brentq(_closure_product, wa, wb, args=(k, gamma, pbar), xtol=1e-7)
            g_star = _closure_product(L_star, k, gamma, pbar)
            roots.append(
                SecondaryBifurcation(
                    L=float(L_star),
                    rho_gap=gap,
                    product=float(g_star),
                    located_by="sign_change",
                )
            )
        else:
            opt = minimize_scalar(
                lambda L: abs(_closure_product(L, k, gamma, pbar)),
                bounds=(wa, wb),
                method="bounded",
                options={"xatol": 1e-6},
            )
            if opt.fun <= 1e-3 * scale:
                roots.append(
                    SecondaryBifurcation(
                        L=float(opt.x),
                        rho_gap=gap,
                        product=float(opt.fun),
                        located_by="abs_minimum",
                    )
                )
    deduped: list[SecondaryBifurcation] = []
    for r in sorted(roots, key=lambda r: r.L):
        if deduped and abs(r.L - deduped[-1].L) < 0.25 * resolution:
            if abs(r.product) < abs(deduped[-1].product):
                deduped[-1] = r
            continue
        deduped.append(r)
    return deduped
