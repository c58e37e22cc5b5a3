"""Self-similar structure of the finite-time touchdown.

Close to a touchdown point the film follows h = tau^(1/5) H(eta) with
eta = (x - x_c) / tau^(3/10), tau the time left.  Expanding the mobility
flux (h^3 (h^-4)')' = -4 h^-2 h'' + 8 h^-3 h'^2 reduces the inner problem
to a second-order ODE,

    H'' = 2 H'^2 / H + (H^2 / 4) (-H/5 + (3/10) eta H' + gamma / H^4),

integrated from the symmetric trough H(0) = H0, H'(0) = 0.  Matching the
slowly evolving film outside the touchdown region forces the neutral far
field H/5 = (3/10) eta H', i.e. H ~ C |eta|^(2/3).  A single trough value
H0* separates profiles that lift off above the cone from profiles that
touch down at finite eta; it is found by bisection on that dichotomy.
The matched profile itself is then rebuilt to integrator accuracy by
joining a forward integration off the trough with a backward integration
off the cone, matched where both directions are stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import ConvergenceError

FARFIELD_SLOPE = 2.0 / 3.0
TUBE_HALF_WIDTH = 0.05  # |eta H'/H - 2/3| beyond this starts to count
TUBE_WINDOW = 5.0  # deviation must persist over this much eta
TOUCHDOWN = 1e-3
SAMPLE_STEP = 0.02


@dataclass(frozen=True)
class SimilarityProfile:
    """Touchdown inner profile on [0, eta_max], symmetric in eta.

    classification is 'balanced' for the matched solution, 'blowup_up'
    when the trough lifts persistently above the far-field cone, and
    'crash_down' when it touches zero or sinks persistently below it.
    farfield_exponent is eta H'/H extrapolated to the end of the grid;
    the matched profile has it near 2/3.
    """

    H0: float
    gamma: float
    eta_grid: np.ndarray
    H_values: np.ndarray
    H_prime: np.ndarray
    farfield_exponent: float
    classification: str

    def evaluate(self, eta: np.ndarray | float) -> np.ndarray:
        """Height at |eta|, continued by the matched cone beyond the grid."""
        ae = np.abs(np.asarray(eta, dtype=float))
        out = np.interp(ae, self.eta_grid, self.H_values)
        emax = float(self.eta_grid[-1])
        cone = self.H_values[-1] / emax**FARFIELD_SLOPE
        return np.where(ae > emax, cone * ae**FARFIELD_SLOPE, out)


def _ode(gamma: float):
    def f(eta, y):
        H, dH = y
        d2 = 2.0 * dH * dH / H + 0.25 * H * H * (
            -0.2 * H + 0.3 * eta * dH + gamma / H**4
        )
        return [dH, d2]

    return f


def shoot(H0: float, gamma: float, eta_max: float = 100.0) -> SimilarityProfile:
    """Integrate the trough ODE outward and classify the far-field match.

    The local slope exponent s = eta H'/H is compared against the cone
    value 2/3. Overshoot means s sits above the band for a full
    TUBE_WINDOW; undershoot additionally requires H falling or s
    decreasing, so the slow rise of s from zero near the origin does not
    count against a healthy trough. Deep dips classify as crash_down
    outright even when the source term later bounces the trajectory
    upward; 'balanced' means neither side won by eta_max.
    """
    if H0 <= 0.0:
        raise ValueError("trough height H0 must be positive")
    if eta_max < 50.0:
        raise ValueError("eta_max below 50 cannot exhibit the far-field regime")

    # ceiling is far above any cone value on [0, eta_max] but small enough
    # that post-bounce explosions terminate before overwhelming the stepper
    ceiling = 1e3 * max(1.0, H0)

    hit = lambda eta, y: float(np.clip(y[0], -1e6, 1e6)) - TOUCHDOWN
    hit.terminal = True
    hit.direction = -1
    big = lambda eta, y: float(np.clip(y[0], -1e6, 2e3 * ceiling)) - ceiling
    big.terminal = True

    sol = solve_ivp(
        _ode(gamma),
        (0.0, eta_max),
        [H0, 0.0],
        method="LSODA",
        dense_output=True,
        events=(hit, big),
        rtol=1e-10,
        atol=1e-12,
    )
    eta_stop = float(sol.t[-1])
    grid = np.arange(0.0, eta_stop + 0.5 * SAMPLE_STEP, SAMPLE_STEP)
    grid[-1] = min(grid[-1], eta_stop)
    H, dH = sol.sol(grid)

    touched = sol.status == 1 and len(sol.t_events[0]) > 0
    exploded = sol.status == 1 and len(sol.t_events[1]) > 0
    s = np.zeros_like(grid)
    s[1:] = grid[1:] * dH[1:] / H[1:]
    dev = s - FARFIELD_SLOPE

    # a too-deep trough dives and then bounces off the source term, so a
    # descent is the 'undershoot' signature even when the tail explodes
    if touched or H.min() < 0.5 * H0:
        classification = "crash_down"
    else:
        under = (dev < -TUBE_HALF_WIDTH) & (
            (dH < 0.0) | np.concatenate([[False], np.diff(s) < 0.0])
        )
        over = dev > TUBE_HALF_WIDTH
        i_up = _first_persistent(over, eta_stop >= eta_max)
        i_dn = _first_persistent(under, eta_stop >= eta_max)
        if i_up is not None and (i_dn is None or i_up <= i_dn):
            classification = "blowup_up"
        elif i_dn is not None:
            classification = "crash_down"
        elif exploded:
            classification = "blowup_up"
        else:
            classification = "balanced"

    k = min(int(0.9 * len(grid)), len(grid) - 2)
    if k >= 0 and len(grid) - k >= 2:
        farfield = float(np.polyval(np.polyfit(grid[k:], s[k:], 1), grid[-1]))
    else:
        farfield = float(s[-1])
    return SimilarityProfile(
        H0=float(H0),
        gamma=float(gamma),
        eta_grid=grid,
        H_values=H,
        H_prime=dH,
        farfield_exponent=farfield,
        classification=classification,
    )


def _first_persistent(mask: np.ndarray, reached_end: bool) -> int | None:
    """Start index of the first run of ``mask`` lasting a full tube window.

    A shorter run that is still open when the integration terminated early
    counts too, since the event cut it off rather than the dynamics.
    """
    n_win = int(round(TUBE_WINDOW / SAMPLE_STEP))
    out = mask.astype(int)
    c = np.concatenate([[0], np.cumsum(out)])
    if out.size >= n_win:
        runs = np.nonzero(c[n_win:] - c[:-n_win] == n_win)[0]
        if runs.size:
            return int(runs[0])
    if out.size and out[-1] and not reached_end:
        tail = int(out[::-1].argmin()) or out.size
        return out.size - tail
    return None


def find_H0star(gamma: float, eta_max: float = 100.0, tol: float = 1e-6) -> float:
    """Trough height of the matched profile, by bisection on the shot type.

    Small troughs blow up above the cone (the source term dominates) and
    large troughs sink into touchdown, so the two classifications bracket
    a unique flip.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    scan = np.geomspace(1e-3, 10.0, 50)
    kinds = []
    flip = None
    for i, h0 in enumerate(scan):
        kinds.append(_side(shoot(h0, gamma, eta_max)))
        if i > 0 and kinds[-1] != kinds[-2]:
            flip = (scan[i - 1], scan[i])
            break
    if flip is None:
        raise ConvergenceError(
            "no classification change for trough heights in [1e-3, 10]"
        )
    lo, hi = flip
    lo_side = _side(shoot(lo, gamma, eta_max))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _side(shoot(mid, gamma, eta_max)) == lo_side:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _side(profile: SimilarityProfile) -> str:
    if profile.classification != "balanced":
        return profile.classification
    return "blowup_up" if profile.farfield_exponent > FARFIELD_SLOPE else "crash_down"


def rupture_profile(gamma: float, eta_max: float = 100.0) -> SimilarityProfile:
    """Matched touchdown profile, built to integrator accuracy.

    The cone carries an exponentially growing companion mode whose
    amplification over [0, eta_max] overflows double precision, so
    neither outward shooting nor whole-interval collocation can hold the
    far field.  The profile is instead assembled from a forward arc off
    the trough and a backward arc off the cone (the bad mode decays
    leftward), Newton-matching height and slope at a station placed where
    the forward error growth is still modest.  Unknowns: trough height
    and cone amplitude.
    """
    h0 = find_H0star(gamma, eta_max, tol=1e-8)
    # station scales with the trough width ~ gamma^(-1/5)
    eta_m = min(max(4.0, 4.4 * gamma**-0.2), 0.4 * eta_max)
    rhs = _ode(gamma)

    def arc(span, y0):
        sol = solve_ivp(
            rhs, span, y0, method="LSODA", dense_output=True, rtol=1e-12, atol=1e-14
        )
        if not sol.success or abs(float(sol.t[-1]) - span[1]) > 1e-9:
            raise ConvergenceError("matched-shooting arc did not reach the station")
        return sol

    seed = arc((0.0, eta_m), [h0, 0.0])
    c_seed = float(seed.y[0, -1]) / eta_m**FARFIELD_SLOPE

    # the cone start is off the true solution by its next asymptotic
    # correction and relaxes over 1/rate; pad the arc so that boundary
    # layer dies out before the reported interval begins
    rate = 0.075 * c_seed**2 * eta_max ** (7.0 / 3.0)
    pad = min(0.2 * eta_max, max(28.0 / max(rate, 1e-6), 0.05))
    eta_start = eta_max + pad

    def mismatch(q):
        fwd = arc((0.0, eta_m), [q[0], 0.0])
        bwd = arc(
            (eta_start, eta_m),
            [
                q[1] * eta_start**FARFIELD_SLOPE,
                FARFIELD_SLOPE * q[1] * eta_start ** (FARFIELD_SLOPE - 1.0),
            ],
        )
        return fwd.y[:, -1] - bwd.y[:, -1], fwd, bwd

    q = np.array([h0, c_seed])
    F, fwd, bwd = mismatch(q)
    scale = max(1.0, abs(float(fwd.y[0, -1])))

    for _ in range(40):
        if np.max(np.abs(F)) <= 1e-11 * scale:
            break
        J = np.empty((2, 2))
        for j, step in enumerate((1e-9 * max(q[0], 0.1), 1e-7 * max(q[1], 0.1))):
            qp = q.copy()
            qp[j] += step
            Fp, _, _ = mismatch(qp)
            J[:, j] = (Fp - F) / step
        try:
            dq = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("matching Jacobian is singular") from exc
        lam = 1.0
        for _ in range(12):
            qn = q + lam * dq
            if qn.min() > 0.0:
                Fn, fn, bn = mismatch(qn)
                if np.max(np.abs(Fn)) < np.max(np.abs(F)):
                    q, F, fwd, bwd = qn, Fn, fn, bn
                    break
            lam *= 0.5
        else:
            # line search hit the integrator noise floor; accept if tight
            if np.max(np.abs(F)) <= 1e-9 * scale:
                break
            raise ConvergenceError("matched-shooting line search stalled")
    else:
        raise ConvergenceError("matched-shooting Newton did not converge")

    grid = np.linspace(0.0, eta_max, 20001)
    left = grid <= eta_m
    H = np.empty_like(grid)
    dH = np.empty_like(grid)
    H[left], dH[left] = fwd.sol(grid[left])
    H[~left], dH[~left] = bwd.sol(grid[~left])
    far = float(grid[-1] * dH[-1] / H[-1])
    return SimilarityProfile(
        H0=float(q[0]),
        gamma=float(gamma),
        eta_grid=grid,
        H_values=H,
        H_prime=dH,
        farfield_exponent=far,
        classification="balanced",
    )


def ode_residual(profile: SimilarityProfile) -> np.ndarray:
    """Pointwise defect of the profile under the trough ODE.

    H' comes from the stored slope and H'' from a fourth-order central
    difference of it, so the defect is an independent consistency check
    rather than a restatement of the integrator's own right-hand side.
    Returned for interior nodes (two trimmed at each end).
    """
    e, H, dH = profile.eta_grid, profile.H_values, profile.H_prime
    d = float(e[1] - e[0])
    if not np.allclose(np.diff(e), d, rtol=1e-8):
        raise ValueError("residual check needs the profile on a uniform grid")
    d2 = (-dH[4:] + 8.0 * dH[3:-1] - 8.0 * dH[1:-3] + dH[:-4]) / (12.0 * d)
    Hi, dHi, ei = H[2:-2], dH[2:-2], e[2:-2]
    return (
        -Hi / 5.0
        + 0.3 * ei * dHi
        - 4.0 * d2 / Hi**2
        + 8.0 * dHi**2 / Hi**3
        + profile.gamma / Hi**4
    )


def cone_gap(eta: np.ndarray, scaled: np.ndarray, profile: SimilarityProfile) -> float:
    """Largest relative gap between a rescaled snapshot and the profile.

    eta and scaled come from a collapse snapshot rescaled by the trough
    height (lateral scale h_min^(3/2)); the profile's own variable is
    related by a factor H0^(3/2), since h_min = tau^(1/5) H0.
    """
    model = profile.evaluate(np.asarray(eta) * profile.H0**1.5) / profile.H0
    return float(np.max(np.abs(np.asarray(scaled) / model - 1.0)))
