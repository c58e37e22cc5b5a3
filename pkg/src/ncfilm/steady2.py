"""Second-order (constant-pressure) periodic steady states.

With p identically equal to a constant P0, steady states of the evolution
reduce to the planar system

    dH/dx = s,    ds/dx = pi(H) + pbar - (pbar + P0) = Pi(H) - P0,

whose first integral is s^2/2 = U_eff(H) - U_eff(h_min) with
U_eff(h) = U(h) - P0*h.  A P0 state at offset pbar is exactly a P0 = 0
state at offset pbar + P0, so the phase-plane helpers below take a single
effective offset argument.  Orbits are closed curves around the thick
uniform state; their inner turning point h_min parametrizes the family,
from the center (period ell_plus_p) out to the homoclinic loop through
the thin state (period diverging logarithmically).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad as _quad1d, solve_ivp
from scipy.optimize import brentq

from . import uniform
from .branches import Branch, BranchAnnotation, BranchPoint
from .model import (
    ConvergenceError,
    GridFunction,
    ModelParams,
    derivative_matrix,
    grid,
    pi as _pi,
    pi_prime,
    potential,
    pressure_field,
    quad,
)

CONJUGATE_TOL = 1e-12


@dataclass(frozen=True)
class SteadyProfile:
    """A steady state on the periodic grid.

    order records which reduction produced it: 'uniform' (flat), 'second'
    (zero-pressure periodic state), 'constant_pressure' (P0 != 0), or
    'fourth' (genuinely non-constant pressure).  residual is the max-norm
    residual of the defining equations.
    """

    h: GridFunction
    order: str
    pressure: GridFunction
    residual: float
    params: ModelParams
    mean: float
    p0: float = 0.0
    k_periods: int = 1


@dataclass(frozen=True)
class PhasePlaneOrbit:
    h_min: float
    h_max: float
    period: float


# ---------------------------------------------------------------------------
# phase-plane machinery
#
# Everything is written against the effective offset: callers studying a
# constant pressure P0 at offset pbar pass pbar + P0.
# ---------------------------------------------------------------------------


def _roots(pbar: float) -> tuple[float, float]:
    states = {s.branch: s for s in uniform.uniform_states(pbar)}
    if "plus" not in states:
        raise ValueError(f"no closed orbits: offset {pbar} admits no thick uniform state")
    return states["minus"].value, states["plus"].value


def _check_hmin(h_min: float, lo: float, hi: float):
    if not (lo < h_min < hi):
        raise ValueError(
            f"h_min = {h_min} outside the orbit range ({lo}, {hi}) of turning points"
        )


def _potential_slope(h, href, pbar):
    """B with U(h) - U(href) = (h - href) * B, evaluated without cancellation."""
    h = np.asarray(h, dtype=float)
    return (
        (h + href) / (2.0 * h * h * href * href)
        - (h * h + h * href + href * href) / (3.0 * h**3 * href**3)
        - pbar
    )


def conjugate_height(h_min: float, pbar: float) -> float:
    """Outer turning point h_max > thick root with U(h_max) = U(h_min)."""
    lo, hi = _roots(pbar)
    _check_hmin(h_min, lo, hi)
    target = potential(h_min, pbar)
    upper = hi + max(hi - h_min, 1e-4)
    while potential(upper, pbar) > target:
        upper *= 1.5
    hmax = brentq(lambda h: potential(h, pbar) - target, hi, upper, xtol=1e-15, rtol=8.9e-16)
    # polish on the factored form, which is better conditioned near the center
    for _ in range(3):
        f = (hmax - h_min) * _potential_slope(hmax, h_min, pbar)
        if abs(f) <= CONJUGATE_TOL:
            break
        hmax -= f / _pi(hmax, pbar)
    return float(hmax)


def homoclinic_height(pbar: float) -> float:
    """Peak height of the solitary (infinite-period) droplet orbit."""
    lo, hi = _roots(pbar)
    target = potential(lo, pbar)
    upper = 2.0 * hi
    while potential(upper, pbar) > target:
        upper *= 1.5
    return float(brentq(lambda h: potential(h, pbar) - target, hi, upper, xtol=1e-15, rtol=8.9e-16))


def _orbit_integral(h_min: float, h_max: float, pbar: float, weight=None) -> float:
    """integral of weight(h) / sqrt(2 (U(h) - U(h_min))) dh over [h_min, h_max].

    Split at the midpoint with the substitution h = endpoint -+ a sin^2(theta)
    on each half; combined with the factored potential difference the
    integrand is bounded and smooth at both turning points.
    """
    h_mid = 0.5 * (h_min + h_max)

    def lower(th):
        a = h_mid - h_min
        h = h_min + a * np.sin(th) ** 2
        return np.cos(th) * _w(h) * np.sqrt(2.0 * a / _potential_slope(h, h_min, pbar))

    def upper(th):
        b = h_max - h_mid
        h = h_max - b * np.sin(th) ** 2
        return np.cos(th) * _w(h) * np.sqrt(2.0 * b / (-_potential_slope(h, h_max, pbar)))

    _w = weight if weight is not None else (lambda h: 1.0)
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    with warnings.catch_warnings():
        # near the homoclinic the integrand peaks like log(1/delta); quad
        # resolves it but reports roundoff near its own epsabs floor
        warnings.simplefilter("ignore", IntegrationWarning)
        lo_val = _quad1d(lower, 0.0, np.pi / 2.0, **opts)[0]
        hi_val = _quad1d(upper, 0.0, np.pi / 2.0, **opts)[0]
    return lo_val + hi_val


def period(h_min: float, pbar: float) -> float:
    """Orbit period ell(h_min) = 2 * integral dh / sqrt(2 (U - U(h_min)))."""
    lo, hi = _roots(pbar)
    _check_hmin(h_min, lo, hi)
    h_max = conjugate_height(h_min, pbar)
    return 2.0 * _orbit_integral(h_min, h_max, pbar)


def orbit(h_min: float, pbar: float) -> PhasePlaneOrbit:
    lo, hi = _roots(pbar)
    _check_hmin(h_min, lo, hi)
    h_max = conjugate_height(h_min, pbar)
    return PhasePlaneOrbit(float(h_min), h_max, 2.0 * _orbit_integral(h_min, h_max, pbar))


def orbit_mean(h_min: float, pbar: float) -> float:
    """Spatial mean of h along one orbit period."""
    h_max = conjugate_height(h_min, pbar)
    ell = 2.0 * _orbit_integral(h_min, h_max, pbar)
    return 2.0 * _orbit_integral(h_min, h_max, pbar, weight=lambda h: h) / ell


def orbit_for_period(ell: float, pbar: float) -> PhasePlaneOrbit:
    """Invert the period map: the orbit with period ell.

    period(h_min) decreases monotonically from its logarithmic divergence at
    the homoclinic to ell_plus_p at the center, so bisection on h_min is
    safe.  The brackets stand off both endpoints: the center side because
    the factored potential slope loses all significance within ~1e-12 of
    the turning-point collision (the period is within ~1e-10 there), the
    homoclinic side at the resolution limit of the saddle distance.
    """
    lo, hi = _roots(pbar)
    ell_min = 2.0 * np.pi / np.sqrt(-pi_prime(hi))
    if ell <= ell_min:
        raise ConvergenceError(
            f"no orbit of period {ell}: minimum period at this offset is {ell_min}"
        )
    a = lo + 1e-13
    b = hi - 1e-5 * (hi - lo)
    if period(b, pbar) >= ell:
        return orbit(float(b), pbar)
    if period(a, pbar) < ell:
        raise ConvergenceError(
            f"period {ell} exceeds the longest resolvable orbit {period(a, pbar):.6g} "
            "at this offset"
        )
    h_min = brentq(lambda hm: period(hm, pbar) - ell, a, b, xtol=1e-14, rtol=8.9e-16)
    return orbit(float(h_min), pbar)


def sample_orbit(orb: PhasePlaneOrbit, pbar: float, xi: np.ndarray) -> np.ndarray:
    """Heights along one orbit, peak at xi = 0, sampled at offsets xi.

    Integrates the planar system from the peak; the profile is even in xi,
    so only the half-period trajectory is needed.
    """
    half = orb.period / 2.0

    def rhs(x, y):
        return [y[1], _pi(y[0], pbar)]

    sol = solve_ivp(
        rhs,
        (0.0, half),
        [orb.h_max, 0.0],
        dense_output=True,
        rtol=1e-12,
        atol=1e-13,
        max_step=half / 50.0,
    )
    if not sol.success:
        raise ConvergenceError("phase-plane integration failed: " + sol.message)
    xi = np.asarray(xi, dtype=float)
    folded = np.abs((xi + half) % orb.period - half)
    return sol.sol(folded)[0]


# ---------------------------------------------------------------------------
# grid profiles
# ---------------------------------------------------------------------------


def as_profile(value, params: ModelParams) -> SteadyProfile:
    """Wrap a uniform state (or plain height) as a grid SteadyProfile."""
    H = value.value if isinstance(value, uniform.UniformState) else float(value)
    h = GridFunction(np.full(params.N, H), params.L)
    p = pressure_field(h, params)
    return SteadyProfile(
        h=h,
        order="uniform",
        pressure=p,
        residual=0.0,
        params=params,
        mean=H,
        p0=float(_pi(H, params.pbar)),
        k_periods=0,
    )


def solve_second_order(
    L: float, k_periods: int, params: ModelParams, P0: float = 0.0
) -> SteadyProfile:
    """Periodic steady state with constant pressure P0 and k identical periods.

    Seeds Newton with the phase-plane orbit of period L/k, then polishes on
    the collocation grid with a translation-fixing condition (zero slope and
    a maximum at x = L/2).
    """
    if k_periods < 1:
        raise ValueError("k_periods must be >= 1")
    params = params.with_(L=float(L))
    pbar_eff = params.pbar + P0
    ell = L / k_periods
    orb = orbit_for_period(ell, pbar_eff)

    x = grid(params.L, params.N)
    guess = sample_orbit(orb, pbar_eff, x - L / 2.0)
    values = _newton_polish(guess, params, P0)

    h = GridFunction(values, params.L)
    p = pressure_field(h, params)
    D2 = derivative_matrix(params.N, params.L, 2, params.scheme)
    residual = float(np.max(np.abs(D2 @ values - _pi(values, pbar_eff))))
    order = "second" if P0 == 0.0 else "constant_pressure"
    return SteadyProfile(
        h=h,
        order=order,
        pressure=p,
        residual=residual,
        params=params,
        mean=quad(values, params.L) / params.L,
        p0=float(P0),
        k_periods=k_periods,
    )


def _newton_polish(guess: np.ndarray, params: ModelParams, P0: float) -> np.ndarray:
    """Bordered Newton for D2 h = Pi(h) - P0 with the peak pinned at L/2.

    The translation null direction is removed by adding mu * h' to the
    residual and requiring h'(L/2) = 0; mu converges to zero along with
    the Newton iteration.
    """
    N, L = params.N, params.L
    pbar_eff = params.pbar + P0
    D1 = derivative_matrix(N, L, 1, params.scheme)
    D2 = derivative_matrix(N, L, 2, params.scheme)
    mid = N // 2
    h = guess.copy()
    for _ in range(params.max_iter):
        F = D2 @ h - _pi(h, pbar_eff)
        res = np.max(np.abs(F))
        if res <= params.newton_tol:
            return h
        t = D1 @ h
        J = np.empty((N + 1, N + 1))
        J[:N, :N] = D2 - np.diag(pi_prime(h))
        J[:N, N] = t
        J[N, :N] = D1[mid]
        J[N, N] = 0.0
        rhs = np.concatenate([-F, [-t[mid]]])
        step = np.linalg.solve(J, rhs)
        dh = step[:N]
        # keep the iterate positive; backtrack if the full step overshoots
        scale = 1.0
        while np.min(h + scale * dh) <= 0 and scale > 1e-6:
            scale *= 0.5
        h = h + scale * dh
    raise ConvergenceError(
        f"steady profile Newton stalled at residual {res:.3e}", residual=float(res)
    )


def parabolic_approximation(L: float, pbar: float, n: int = 256) -> tuple[GridFunction, float]:
    """Truncated-parabola droplet model and its closed-form mean.

    The droplet cap is the parabola through the homoclinic peak with
    curvature Pi(h_peak) < 0, truncated at the thin-film level; its mean
    is thin + (4 sqrt(2) (peak - thin)^{3/2}) / (3 sqrt(|Pi(peak)|) L).
    """
    lo, _ = _roots(pbar)
    peak = homoclinic_height(pbar)
    curv = _pi(peak, pbar)
    x = grid(L, n)
    vals = np.maximum(peak + 0.5 * curv * (x - L / 2.0) ** 2, lo)
    bound = lo + 4.0 * np.sqrt(2.0) * (peak - lo) ** 1.5 / (3.0 * np.sqrt(-curv) * L)
    return GridFunction(vals, L), float(bound)


def local_amplitude_second(pbar: float) -> tuple[float, float]:
    """Small-amplitude onset data at the thick state.

    Returns (A_sq, mean_slope): A_sq scales the profile amplitude like
    A sqrt(L - ell_plus_p), and mean_slope is d<H>/dL on the one-period
    branch at onset; the k-period branch slope is mean_slope / k.
    """
    states = {s.branch: s for s in uniform.uniform_states(pbar)}
    if "plus" not in states:
        raise ValueError("onset data needs the thick uniform state")
    H = states["plus"].value
    p1 = pi_prime(H)
    from .model import pi_second, pi_third

    p2 = pi_second(H)
    p3 = pi_third(H)
    A_sq = abs(24.0 * (-p1) ** 2.5 / (5.0 * np.pi * p2**2 - 3.0 * np.pi * p3 * p1))
    mean_slope = -A_sq * p2 / (4.0 * p1)
    return float(A_sq), float(mean_slope)


def constant_pressure_branch(L: float, pbar: float, P0_range: tuple[float, float]) -> Branch:
    """Family of one-period states of D2 h = Pi(h) - P0 at fixed L, swept in P0.

    Parametrized through the effective offset pbar + P0: states exist where
    the minimum orbit period at that offset is below L.  The branch carries
    the two amplitude-vanishing endpoints (onset bifurcations where the mean
    meets the thick uniform value) and the interior extremum of mean vs P0.
    """
    p_lo, p_hi = _offset_window(L)
    lo_eff = max(pbar + P0_range[0], p_lo)
    hi_eff = min(pbar + P0_range[1], p_hi)
    if not (lo_eff < hi_eff):
        raise ConvergenceError(
            f"no constant-pressure states: requested P0 range maps outside ({p_lo}, {p_hi})"
        )

    branch = Branch(parameter="P0")
    n_pts = 141
    # cluster samples toward the endpoints, where the amplitude vanishes
    s = np.linspace(0.0, np.pi, n_pts)
    effs = lo_eff + (hi_eff - lo_eff) * 0.5 * (1.0 - np.cos(s))
    effs[0] = lo_eff
    effs[-1] = hi_eff
    if lo_eff < pbar < hi_eff:
        # make sure the P0 = 0 state is sampled exactly
        effs = np.sort(np.append(effs, pbar))
    for pe in effs:
        try:
            orb = orbit_for_period(L, pe)
        except (ConvergenceError, ValueError):
            continue
        mean = orbit_mean(orb.h_min, pe)
        p0 = pe - pbar
        branch.points.append(
            BranchPoint(
                param=float(p0),
                mean=float(mean),
                p_min=float(p0),
                p_max=float(p0),
                h_min=orb.h_min,
                h_max=orb.h_max,
                amplitude=float(orb.h_max - orb.h_min),
            )
        )
    if len(branch.points) < 3:
        raise ConvergenceError("constant-pressure branch: too few converged points")

    for pe, label in ((lo_eff, "low"), (hi_eff, "high")):
        thick = {st.branch: st for st in uniform.uniform_states(pe)}["plus"].value
        branch.annotations.append(
            BranchAnnotation(
                kind="primary_bif",
                param_value=float(pe - pbar),
                detail=f"{label} endpoint: amplitude vanishes at mean {thick:.12g}",
            )
        )
    means = np.array(branch.means())
    p0s = np.array(branch.params())
    dm = np.diff(means)
    flips = np.nonzero(dm[:-1] * dm[1:] < 0)[0]
    for i in flips:
        branch.annotations.append(
            BranchAnnotation(
                kind="fold",
                param_value=float(p0s[i + 1]),
                detail=f"extremum of mean vs P0 at mean {means[i + 1]:.12g}",
            )
        )
    return branch


def slow_manifold(L: float, pbar: float, P0_range: tuple[float, float], n_uniform: int = 120) -> Branch:
    """Both sheets of the quasi-static family in the (mean, P0) plane.

    The patterned sheet is the constant-pressure branch at this L; the
    uniform sheet is the thick flat state under the same offset, where a
    relaxation orbit spends its other slow phase.  The patterned sheet
    ends where its amplitude vanishes (the orbit period outgrows L), so
    a trajectory reference needs the uniform continuation past that
    point.  Uniform points carry amplitude = 0.
    """
    branch = constant_pressure_branch(L, pbar, P0_range)
    combined = Branch(parameter="P0", annotations=list(branch.annotations))
    combined.points.extend(branch.points)
    for p0 in np.linspace(P0_range[0], P0_range[1], n_uniform):
        eff = pbar + p0
        try:
            states = {st.branch: st for st in uniform.uniform_states(eff)}
        except (ValueError, ConvergenceError):
            continue
        if "plus" not in states:
            continue
        h = states["plus"].value
        combined.points.append(
            BranchPoint(
                param=float(p0),
                mean=float(h),
                p_min=float(p0),
                p_max=float(p0),
                h_min=float(h),
                h_max=float(h),
                amplitude=0.0,
            )
        )
    return combined


def mean_branch(
    L_range: tuple[float, float], k_periods: int, pbar: float, n_points: int = 60
) -> Branch:
    """Mean of the k-period zero-pressure state as a function of L.

    Built from orbit quadrature alone (no grid solves), so it is cheap
    enough to serve as the reference curve for crossing detection.
    """
    ell_min = 2.0 * np.pi / np.sqrt(-pi_prime(_roots(pbar)[1]))
    lo = max(L_range[0], k_periods * ell_min * (1.0 + 1e-9))
    branch = Branch(parameter="L")
    for L in np.linspace(lo, L_range[1], n_points):
        try:
            orb = orbit_for_period(L / k_periods, pbar)
        except ConvergenceError:
            continue
        branch.points.append(
            BranchPoint(
                param=float(L),
                mean=float(orbit_mean(orb.h_min, pbar)),
                p_min=0.0,
                p_max=0.0,
                h_min=orb.h_min,
                h_max=orb.h_max,
                amplitude=float(orb.h_max - orb.h_min),
            )
        )
    return branch


def _offset_window(L: float) -> tuple[float, float]:
    """Effective-offset interval where the minimum orbit period is below L.

    The minimum period ell_plus_p(offset) diverges at both ends of
    (0, 27/256) and has a single interior minimum; bisect both flanks.
    """

    def ell_min(pe):
        states = {s.branch: s for s in uniform.uniform_states(pe)}
        return 2.0 * np.pi / np.sqrt(-states["plus"].pi_prime)

    eps = 1e-9
    hi_cap = uniform.PBAR_MAX - 1e-9
    # golden-section search for the interior minimum of ell_min
    a, b = eps, hi_cap
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    for _ in range(120):
        if ell_min(c) < ell_min(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    pe_star = 0.5 * (a + b)
    if ell_min(pe_star) >= L:
        raise ConvergenceError(
            f"domain L = {L} is below the minimum period {ell_min(pe_star):.6g} "
            "for every admissible offset"
        )
    p_lo = brentq(lambda pe: ell_min(pe) - L, eps, pe_star, xtol=1e-14)
    p_hi = brentq(lambda pe: ell_min(pe) - L, pe_star, hi_cap, xtol=1e-14)
    return float(p_lo), float(p_hi)
