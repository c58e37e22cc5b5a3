"""Fourth-order steady states and their bifurcation structure.

Genuine steady states satisfy the coupled system

    d/dx ( H^3 dP/dx ) + gamma * P = 0,
    P = Pi(H) - H'',

with non-constant pressure.  They bifurcate from uniform states where the
mobility factor of the dispersion relation vanishes (domain lengths
k * 2*pi*H^(3/2)/sqrt(gamma)) and can terminate on the constant-pressure
family when ||P|| -> 0.  Branches are traced by pseudo-arclength
continuation on the unit grid, with L entering the derivative matrices as
an explicit scale factor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import steady2
from .branches import Branch, BranchAnnotation, BranchPoint
from .model import (
    ConvergenceError,
    GridFunction,
    ModelParams,
    derivative_matrix,
    pi as _pi,
    pi_prime,
    pi_second,
)
from .steady2 import SteadyProfile
from .uniform import UniformState, uniform_states

FOURTH_PRESSURE_FACTOR = 100.0  # ||P||_inf above this times newton_tol means genuinely fourth order


@dataclass(frozen=True)
class LocalPredictor:
    """Weakly nonlinear onset data at a uniform state.

    W > 0 means supercritical (branch exists where the uniform state has
    just destabilized), W < 0 subcritical; slope is the one-sided
    d<H>/dL of the bifurcating branch at onset, valid on whichever side
    the branch exists.
    """

    W: float
    W1: float
    W2: float
    bif_type: str
    slope: float


@dataclass
class StepControl:
    initial: float = 0.25
    min: float = 1e-5
    max: float = 2.0
    grow: float = 1.3
    shrink: float = 0.5
    grow_after: int = 3
    max_points: int = 1500
    amp_end: float = 2e-3
    pnorm_end: float = 1e-6


def _unit_ops(N: int):
    return derivative_matrix(N, 1.0, 1), derivative_matrix(N, 1.0, 2)


def _residual(H, P, L, gamma, pbar, D1, D2):
    F1 = D1 @ (H**3 * (D1 @ P)) / L**2 + gamma * P
    F2 = P - _pi(H, pbar) + (D2 @ H) / L**2
    return F1, F2


def _jacobian(H, P, L, gamma, pbar, D1, D2):
    N = H.size
    J = np.zeros((2 * N, 2 * N))
    J[:N, :N] = D1 * (3.0 * H**2 * (D1 @ P))[None, :] / L**2
    J[:N, N:] = (D1 * (H**3)[None, :]) @ D1 / L**2 + gamma * np.eye(N)
    J[N:, :N] = D2 / L**2 - np.diag(pi_prime(H))
    J[N:, N:] = np.eye(N)
    return J


def _dresidual_dparam(H, P, L, gamma, param, D1, D2):
    N = H.size
    out = np.zeros(2 * N)
    if param == "L":
        out[:N] = -2.0 / L**3 * (D1 @ (H**3 * (D1 @ P)))
        out[N:] = -2.0 / L**3 * (D2 @ H)
    else:  # gamma
        out[:N] = P
    return out


def _classify(H: np.ndarray, P: np.ndarray, tol: float) -> str:
    if np.max(np.abs(P)) > FOURTH_PRESSURE_FACTOR * tol:
        return "fourth"
    if np.max(np.abs(H - H.mean())) > 1e-8:
        return "second"
    return "uniform"


def _count_peaks(H: np.ndarray) -> int:
    if np.max(np.abs(H - H.mean())) <= 1e-8:
        return 0
    up = H > np.roll(H, 1)
    down = H > np.roll(H, -1)
    return int(np.count_nonzero(up & down))


def _make_profile(H, P, params: ModelParams, residual: float) -> SteadyProfile:
    order = _classify(H, P, params.newton_tol)
    h = GridFunction(H.copy(), params.L)
    p = GridFunction(P.copy(), params.L)
    return SteadyProfile(
        h=h,
        order=order,
        pressure=p,
        residual=float(residual),
        params=params,
        mean=float(H.mean()),
        p0=float(P.mean()) if order != "fourth" else 0.0,
        k_periods=_count_peaks(H),
    )


def solve_fourth_order(guess: SteadyProfile, params: ModelParams) -> SteadyProfile:
    """Newton solve of the coupled (H, P) system at fixed L and gamma.

    An exact root returns untouched in zero iterations; a run that lands on
    a constant-pressure or flat solution is reported through the order tag,
    not as a failure.
    """
    if params.gamma == 0:
        raise ValueError(
            "the coupled system is degenerate at gamma = 0 (every constant "
            "pressure solves it); use the second-order solver there"
        )
    N, L = params.N, params.L
    D1, D2 = _unit_ops(N)
    H = guess.h.values.copy()
    P = guess.pressure.values.copy()
    H_ref = H.copy()
    c_row = (D1 @ H_ref) / N

    res = np.inf
    for it in range(params.max_iter + 1):
        F1, F2 = _residual(H, P, L, params.gamma, params.pbar, D1, D2)
        res = max(np.max(np.abs(F1)), np.max(np.abs(F2)))
        if res <= params.newton_tol:
            return _make_profile(H, P, params, res)
        if it == params.max_iter:
            break
        # live translation border; mu is re-solved each step and vanishes
        # at any genuine root
        tH, tP = D1 @ H, D1 @ P
        n_unk = 2 * N + 1
        J = np.zeros((n_unk, n_unk))
        J[: 2 * N, : 2 * N] = _jacobian(H, P, L, params.gamma, params.pbar, D1, D2)
        J[:N, -1] = tH
        J[N : 2 * N, -1] = tP
        J[-1, :N] = c_row
        rhs = -np.concatenate([F1, F2, [c_row @ (H - H_ref)]])
        try:
            step = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian: {exc}", residual=res) from exc
        scale = 1.0
        while np.min(H + scale * step[:N]) <= 0 and scale > 1e-8:
            scale *= 0.5
        H = H + scale * step[:N]
        P = P + scale * step[N : 2 * N]
    raise ConvergenceError(
        f"fourth-order Newton stalled at residual {res:.3e}", residual=float(res)
    )


def seed_fourth_from_uniform(
    state: UniformState, k: int, params: ModelParams, amplitude: float = 5e-3
) -> SteadyProfile:
    """Small-amplitude branch point near the mobility-factor onset.

    Solves the (H, P, L) system with the amplitude of the k-th cosine
    pinned, so the returned profile sits on the bifurcating branch at
    whichever side of the critical length the branch exists.
    """
    if params.gamma <= 0:
        raise ValueError("onset requires gamma > 0")
    N = params.N
    D1, D2 = _unit_ops(N)
    Hbar = state.value
    L_c = k * 2.0 * np.pi * Hbar**1.5 / np.sqrt(params.gamma)
    X = np.arange(N) / N
    ck = np.cos(2.0 * np.pi * k * (X - 0.5))
    sk = np.sin(2.0 * np.pi * k * (X - 0.5))
    q2 = (2.0 * np.pi * k / L_c) ** 2
    H = Hbar + amplitude * ck
    P = (state.pi_prime + q2) * amplitude * ck
    L = L_c
    amp_row = 2.0 * ck / N
    phase_row = 2.0 * sk / N

    for _ in range(params.max_iter):
        F1, F2 = _residual(H, P, L, params.gamma, params.pbar, D1, D2)
        g_amp = amp_row @ H - amplitude
        g_phase = phase_row @ H
        res = max(np.max(np.abs(F1)), np.max(np.abs(F2)), abs(g_amp), abs(g_phase))
        if res <= params.newton_tol:
            pp = params.with_(L=float(L))
            return _make_profile(H, P, pp, max(np.max(np.abs(F1)), np.max(np.abs(F2))))
        tH, tP = D1 @ H, D1 @ P
        n_unk = 2 * N + 2
        J = np.zeros((n_unk, n_unk))
        J[: 2 * N, : 2 * N] = _jacobian(H, P, L, params.gamma, params.pbar, D1, D2)
        J[: 2 * N, 2 * N] = _dresidual_dparam(H, P, L, params.gamma, "L", D1, D2)
        # live translation border; mu is re-solved each step and vanishes at any genuine root
        J[:N, 2 * N + 1] = tH
        J[N : 2 * N, 2 * N + 1] = tP
        J[2 * N, :N] = phase_row
        J[2 * N + 1, :N] = amp_row
        rhs = -np.concatenate([F1, F2, [g_phase, g_amp]])
        step = np.linalg.solve(J, rhs)
        scale = 1.0
        while np.min(H + scale * step[:N]) <= 0 and scale > 1e-8:
            scale *= 0.5
        H = H + scale * step[:N]
        P = P + scale * step[N : 2 * N]
        L = L + scale * step[2 * N]
    raise ConvergenceError(f"onset seed failed to converge (residual {res:.3e})", residual=res)


def fourth_state_at(
    L_target: float,
    params: ModelParams,
    branch: str = "minus",
    k: int = 1,
    amplitude: float = 5e-3,
) -> SteadyProfile:
    """Walk the k-th bifurcating family from its onset to a target length.

    Pseudo-arclength stepping, the same scheme as continue_branch.  Plain
    fixed-L restepping cannot pass a point where another steady family
    crosses this one: both satisfy the same fixed-L equations there and
    Newton keeps landing on the intersecting state.  The arclength
    corrector constrains the step to the branch tangent instead, so
    crossings and folds are both passable.  The first walk segment that
    brackets L_target seeds a bordered re-solve at exactly that length.
    A target outside the family's span in L surfaces as a
    ConvergenceError, never as a state from a different family.
    """
    state = next(s for s in uniform_states(params.pbar) if s.branch == branch)
    seed = seed_fourth_from_uniform(state, k, params, amplitude=amplitude)
    N = params.N
    u_prev = np.concatenate([seed.h.values, seed.pressure.values])
    lam_prev = float(seed.params.L)

    # amplitude-pinned first step: a parameter step from a near-onset seed
    # would slide back onto the uniform family
    u_cur = None
    lam_cur = lam_prev
    factor = 2.0
    for _ in range(12):
        try:
            u_cur, lam_cur = _deviation_step(u_prev, lam_prev, factor, "L", params)
            break
        except (ConvergenceError, np.linalg.LinAlgError):
            factor = 1.0 + 0.5 * (factor - 1.0)
    if u_cur is None:
        raise ConvergenceError("could not take the initial amplitude step")

    def polish(ug: np.ndarray) -> SteadyProfile | None:
        guess = _make_profile(
            np.maximum(ug[:N], 1e-4), ug[N:], params.with_(L=L_target), 0.0
        )
        try:
            cand = solve_fourth_order(guess, params.with_(L=L_target))
        except (ConvergenceError, np.linalg.LinAlgError):
            return None
        return cand if cand.order == "fourth" else None

    def bracket_polish() -> SteadyProfile | None:
        if lam_cur == lam_prev or (lam_prev - L_target) * (lam_cur - L_target) > 0.0:
            return None
        frac = (L_target - lam_prev) / (lam_cur - lam_prev)
        cand = polish(u_prev + frac * (u_cur - u_prev))
        if cand is None:
            cand = polish(u_cur if frac > 0.5 else u_prev)
        return cand

    sc = StepControl()
    w = 1.0 / (2.0 * N)
    ds = sc.initial
    successes = 0

    prof = bracket_polish()
    if prof is not None:
        return prof

    for _ in range(sc.max_points):
        du = u_cur - u_prev
        dlam = lam_cur - lam_prev
        norm = _seglen(du, dlam, w)
        tang_u, tang_lam = du / norm, dlam / norm
        u_pred = u_cur + ds * tang_u
        lam_pred = lam_cur + ds * tang_lam
        try:
            u_new, lam_new = _corrector(
                u_pred, lam_pred, tang_u, tang_lam, u_cur, "L", params, lam_cur
            )
        except (ConvergenceError, np.linalg.LinAlgError):
            successes = 0
            ds *= sc.shrink
            if ds < sc.min:
                raise ConvergenceError(
                    f"family walk stalled at L = {lam_cur:.6g} on the way to {L_target:.6g}"
                )
            continue

        amp_prev = float(np.max(np.abs(u_cur[:N] - u_cur[:N].mean())))
        amp_new = float(np.max(np.abs(u_new[:N] - u_new[:N].mean())))
        if amp_new < 0.35 * amp_prev and amp_prev > 20.0 * sc.amp_end and ds > sc.min:
            # the step crushed the amplitude: about to slide onto the
            # uniform family, resolve the approach instead of jumping it
            successes = 0
            ds = max(ds * sc.shrink, sc.min)
            continue

        u_prev, lam_prev = u_cur, lam_cur
        u_cur, lam_cur = u_new, lam_new
        successes += 1
        if successes >= sc.grow_after:
            ds = min(ds * sc.grow, sc.max)

        prof = bracket_polish()
        if prof is not None:
            return prof

        if amp_new < sc.amp_end:
            break
        if float(np.max(np.abs(u_new[N:]))) < sc.pnorm_end and amp_new > 10.0 * sc.amp_end:
            break

    raise ConvergenceError(
        f"no state at L = {L_target:.6g} on this family (walk ended near L = {lam_cur:.6g})"
    )


def local_predictor_fourth(state: UniformState, params: ModelParams) -> LocalPredictor:
    """Evaluate the onset coefficients W1, W2, W at a uniform state.

    The mobility is H^3 throughout.  The W numerator carries the factor
    (Pi'(H) H^3 + 4 gamma) whose zero separates sub- from supercritical
    onset at the thick state; within a small window of that zero the
    direction is reported as degenerate rather than guessed from noise.
    """
    if params.gamma <= 0:
        raise ValueError("predictor requires gamma > 0")
    H = state.value
    g = params.gamma
    p1 = pi_prime(H)
    p2 = pi_second(H)
    Mc = H**3
    Mcp = 3.0 * H**2
    Mcpp = 6.0 * H
    W1 = -3.0 * Mc**2 * Mcpp + 4.0 * Mc * Mcp**2
    W2 = 3.0 * Mc**2 * Mcp * p2 - 12.0 * Mc * Mcpp * g + 28.0 * Mcp**2 * g
    denom = np.pi * (W1 * p1**2 + W2 * p1 + 24.0 * Mc * Mcp * p2 * g)
    if abs(denom) < 1e-14:
        raise ZeroDivisionError("onset coefficient denominator vanished")
    W = -24.0 * np.sqrt(g) * Mc**1.5 * (p1 * Mc + 4.0 * g) * p1 / denom
    crossover = p1 * Mc + 4.0 * g
    if abs(crossover) <= 1e-8 * max(abs(p1 * Mc), 4.0 * g):
        bif_type = "degenerate"
    else:
        bif_type = "supercritical" if W > 0 else "subcritical"
    slope = -W * p2 / (4.0 * p1)
    return LocalPredictor(float(W), float(W1), float(W2), bif_type, float(slope))


# ---------------------------------------------------------------------------
# pseudo-arclength continuation
# ---------------------------------------------------------------------------


def _corrector(
    u_pred, lam_pred, tang_u, tang_lam, u_prev, param, params, base_lam, step_tol_iters=8
):
    """One pseudo-arclength corrector solve; returns (u, lam) or raises."""
    N = params.N
    D1, D2 = _unit_ops(N)
    H = u_pred[:N].copy()
    P = u_pred[N:].copy()
    lam = float(lam_pred)
    tH, tP = D1 @ u_prev[:N], D1 @ u_prev[N:]
    c_row = tH / N
    w = 1.0 / (2.0 * N)
    for _ in range(step_tol_iters):
        L = lam if param == "L" else params.L
        gamma = lam if param == "gamma" else params.gamma
        if L <= 0 or gamma < 0:
            raise ConvergenceError("parameter left the admissible region")
        F1, F2 = _residual(H, P, L, gamma, params.pbar, D1, D2)
        u = np.concatenate([H, P])
        g_phase = c_row @ (H - u_prev[:N])
        g_arc = w * (tang_u @ (u - u_pred)) + tang_lam * (lam - lam_pred)
        res = max(np.max(np.abs(F1)), np.max(np.abs(F2)), abs(g_phase), abs(g_arc))
        if res <= params.newton_tol:
            return u, lam
        n_unk = 2 * N + 2
        J = np.zeros((n_unk, n_unk))
        J[: 2 * N, : 2 * N] = _jacobian(H, P, L, gamma, params.pbar, D1, D2)
        J[: 2 * N, 2 * N] = _dresidual_dparam(H, P, L, gamma, param, D1, D2)
        J[:N, 2 * N + 1] = tH
        J[N : 2 * N, 2 * N + 1] = tP
        J[2 * N, :N] = c_row
        J[2 * N + 1, : 2 * N] = w * tang_u
        J[2 * N + 1, 2 * N] = tang_lam
        rhs = -np.concatenate([F1, F2, [g_phase, g_arc]])
        step = np.linalg.solve(J, rhs)
        scale = 1.0
        while np.min(H + scale * step[:N]) <= 0 and scale > 1e-8:
            scale *= 0.5
        H = H + scale * step[:N]
        P = P + scale * step[N : 2 * N]
        lam = lam + scale * step[2 * N]
    raise ConvergenceError("corrector did not converge")


def _branch_point(u, lam, N) -> BranchPoint:
    H, P = u[:N], u[N:]
    mean = float(H.mean())
    return BranchPoint(
        param=float(lam),
        mean=mean,
        p_min=float(P.min()),
        p_max=float(P.max()),
        h_min=float(H.min()),
        h_max=float(H.max()),
        amplitude=float(np.max(np.abs(H - mean))),
        p_norm=float(np.max(np.abs(P))),
    )


def _deviation_step(u0, lam0, factor, param, params):
    """Solve for the state whose projection on the seed's shape is factor x the seed's.

    Pins a linear amplitude measure (projection of H onto the seed's deviation
    from its mean) while the continuation parameter floats, so the step moves
    along the bifurcating branch instead of sliding back to the uniform family.
    """
    N = params.N
    D1, D2 = _unit_ops(N)
    H0, P0 = u0[:N], u0[N:]
    v = H0 - H0.mean()
    vv = float(v @ v)
    if vv < 1e-24:
        raise ConvergenceError("seed has no spatial structure to rescale")
    amp_row = v / vv
    phase_row = (D1 @ H0) / N
    H = H0 + (factor - 1.0) * v
    P = factor * P0
    lam = float(lam0)
    for _ in range(params.max_iter):
        L = lam if param == "L" else params.L
        gamma = lam if param == "gamma" else params.gamma
        if L <= 0 or gamma < 0:
            raise ConvergenceError("parameter left the admissible region")
        F1, F2 = _residual(H, P, L, gamma, params.pbar, D1, D2)
        g_amp = amp_row @ (H - H.mean()) - factor
        g_phase = phase_row @ (H - H0)
        res = max(np.max(np.abs(F1)), np.max(np.abs(F2)), abs(g_amp), abs(g_phase))
        if res <= params.newton_tol:
            return np.concatenate([H, P]), lam
        tH, tP = D1 @ H, D1 @ P
        n_unk = 2 * N + 2
        J = np.zeros((n_unk, n_unk))
        J[: 2 * N, : 2 * N] = _jacobian(H, P, L, gamma, params.pbar, D1, D2)
        J[: 2 * N, 2 * N] = _dresidual_dparam(H, P, L, gamma, param, D1, D2)
        J[:N, 2 * N + 1] = tH
        J[N : 2 * N, 2 * N + 1] = tP
        J[2 * N, :N] = phase_row
        J[2 * N + 1, :N] = amp_row - amp_row.mean()
        rhs = -np.concatenate([F1, F2, [g_phase, g_amp]])
        step = np.linalg.solve(J, rhs)
        scale = 1.0
        while np.min(H + scale * step[:N]) <= 0 and scale > 1e-8:
            scale *= 0.5
        H = H + scale * step[:N]
        P = P + scale * step[N : 2 * N]
        lam = lam + scale * step[2 * N]
    raise ConvergenceError(f"amplitude step did not converge (residual {res:.3e})", residual=res)


def continue_branch(
    seed: SteadyProfile,
    param: str,
    p_range: tuple[float, float],
    step_control: StepControl | None = None,
) -> Branch:
    """Trace a branch of fourth-order states by pseudo-arclength.

    Folds are flagged at sign changes of dparam/ds; the branch stops when
    the profile amplitude vanishes (onset endpoint), when the pressure norm
    vanishes (termination on the constant-pressure family), when the
    parameter leaves p_range, or when the step collapses (truncated).
    """
    if param not in ("L", "gamma"):
        raise ValueError("param must be 'L' or 'gamma'")
    sc = step_control or StepControl()
    params = seed.params
    N = params.N
    lam0 = params.L if param == "L" else params.gamma
    u0 = np.concatenate([seed.h.values, seed.pressure.values])

    branch = Branch(parameter=param)
    branch.points.append(_branch_point(u0, lam0, N))

    # second point by growing the seed's deviation: a parameter step would
    # fall back onto the uniform family when the seed amplitude is small
    u1 = lam1 = None
    factor = 2.0
    for _ in range(12):
        try:
            u1, lam1 = _deviation_step(u0, lam0, factor, param, params)
            break
        except (ConvergenceError, np.linalg.LinAlgError):
            factor = 1.0 + 0.5 * (factor - 1.0)
    if u1 is None:
        raise ConvergenceError("could not take the initial amplitude step")
    branch.points.append(_branch_point(u1, lam1, N))

    u_prev, lam_prev = u0, lam0
    u_cur, lam_cur = u1, lam1
    ds = sc.initial
    successes = 0
    w = 1.0 / (2.0 * N)
    arcs = [0.0, _seglen(u1 - u0, lam1 - lam0, w)]
    lo, hi = min(p_range), max(p_range)

    while len(branch.points) < sc.max_points:
        du = u_cur - u_prev
        dlam = lam_cur - lam_prev
        norm = _seglen(du, dlam, w)
        tang_u, tang_lam = du / norm, dlam / norm
        u_pred = u_cur + ds * tang_u
        lam_pred = lam_cur + ds * tang_lam
        try:
            u_new, lam_new = _corrector(u_pred, lam_pred, tang_u, tang_lam, u_cur, param, params, lam_cur)
        except (ConvergenceError, np.linalg.LinAlgError):
            successes = 0
            ds *= sc.shrink
            if ds < sc.min:
                branch.truncated = True
                warnings.warn(f"branch truncated: step collapsed near {param} = {lam_cur}")
                break
            continue

        pt = _branch_point(u_new, lam_new, N)

        # a step that crushes the amplitude has usually slid onto the uniform
        # family; resolve the endpoint approach instead of jumping across it
        amp_here = branch.points[-1].amplitude
        if pt.amplitude < 0.35 * amp_here and amp_here > 20.0 * sc.amp_end and ds > sc.min:
            successes = 0
            ds = max(ds * sc.shrink, sc.min)
            continue

        branch.points.append(pt)
        arcs.append(arcs[-1] + _seglen(u_new - u_cur, lam_new - lam_cur, w))

        # fold: the parameter component of the tangent changes sign
        if (lam_new - lam_cur) * (lam_cur - lam_prev) < 0:
            lam_fold = _quad_extremum(
                arcs[-3:], [lam_prev, lam_cur, lam_new]
            )
            tail = branch.points[-3:]
            amp3 = [p.amplitude for p in tail]
            pn3 = [p.p_norm for p in tail]
            amp_max = max(p.amplitude for p in branch.points)
            pn_max = max(p.p_norm for p in branch.points)
            if min(amp3) < max(20.0 * sc.amp_end, 0.02 * amp_max):
                # not a fold: the branch landed on the uniform family and
                # bounced onto its mirror leg; cut at the closest approach
                j = int(np.argmin(amp3))
                lam_land = tail[j].param if amp3[j] < 1e-8 else lam_fold
                del branch.points[len(branch.points) - 2 + j :]
                branch.annotations.append(
                    BranchAnnotation(
                        "primary_bif", float(lam_land), "amplitude -> 0 (uniform endpoint)"
                    )
                )
                break
            if (
                min(pn3) < max(20.0 * sc.pnorm_end, 0.05 * pn_max)
                and tail[int(np.argmin(pn3))].amplitude > 10.0 * sc.amp_end
            ):
                # landing on the constant-pressure family, same bounce geometry
                j = int(np.argmin(pn3))
                lam_land = tail[j].param if pn3[j] < 1e-8 else lam_fold
                del branch.points[len(branch.points) - 2 + j :]
                branch.annotations.append(
                    BranchAnnotation(
                        "secondary_bif",
                        float(lam_land),
                        "pressure -> 0 (constant-pressure endpoint)",
                    )
                )
                break
            branch.annotations.append(
                BranchAnnotation("fold", float(lam_fold), "sign change of dparam/ds")
            )

        u_prev, lam_prev = u_cur, lam_cur
        u_cur, lam_cur = u_new, lam_new

        if pt.amplitude < sc.amp_end:
            lam_end = pt.param if pt.amplitude < 1e-8 else _extrapolate_root(branch, "amplitude")
            branch.annotations.append(
                BranchAnnotation("primary_bif", float(lam_end), "amplitude -> 0 (uniform endpoint)")
            )
            break
        if pt.p_norm < sc.pnorm_end and pt.amplitude > 10.0 * sc.amp_end:
            lam_end = pt.param if pt.p_norm < 1e-8 else _extrapolate_root(branch, "p_norm")
            branch.annotations.append(
                BranchAnnotation(
                    "secondary_bif", float(lam_end), "pressure -> 0 (constant-pressure endpoint)"
                )
            )
            break
        if not (lo <= lam_cur <= hi):
            break
        successes += 1
        if successes >= sc.grow_after:
            ds = min(ds * sc.grow, sc.max)
            successes = 0
    else:
        branch.truncated = True
        warnings.warn("branch stopped at max_points")
    return branch


def _seglen(du, dlam, w) -> float:
    return float(np.sqrt(w * (du @ du) + dlam * dlam))


def _quad_extremum(s_vals, lam_vals) -> float:
    """Parameter value at the extremum of a parabola through three samples."""
    coef = np.polyfit(s_vals, lam_vals, 2)
    if abs(coef[0]) < 1e-14:
        return lam_vals[1]
    s_star = -coef[1] / (2.0 * coef[0])
    s_star = min(max(s_star, s_vals[0]), s_vals[-1])
    return float(np.polyval(coef, s_star))


def _extrapolate_root(branch: Branch, field: str, n_fit: int = 5) -> float:
    """Parameter where a squared decay measure hits zero (pitchfork scaling)."""
    pts = branch.points[-n_fit:]
    y = np.array([getattr(p, field) for p in pts]) ** 2
    x = np.array([p.param for p in pts])
    if len(pts) < 2 or np.ptp(x) == 0:
        return branch.points[-1].param
    a, b = np.polyfit(x, y, 1)
    if abs(a) < 1e-14:
        return branch.points[-1].param
    return float(-b / a)


def detect_transcritical(branchA: Branch, branchB: Branch, p_norm_floor: float = 1e-3) -> list[float]:
    """Parameter values where branchB's mean crosses branchA's mean curve.

    branchA must be single-valued in the parameter (sorted internally);
    crossings where branchB's pressure norm is already vanishing are the
    termination points on the other family, not transcritical crossings,
    and are excluded by the pressure floor.
    """
    if not branchA.points or not branchB.points:
        return []
    pa = np.array([p.param for p in branchA.points])
    ma = np.array([p.mean for p in branchA.points])
    order = np.argsort(pa)
    pa, ma = pa[order], ma[order]

    crossings = []
    pts = branchB.points
    for a, b in zip(pts[:-1], pts[1:]):
        if min(a.param, b.param) < pa[0] or max(a.param, b.param) > pa[-1]:
            continue
        if min(a.p_norm, b.p_norm) < p_norm_floor:
            continue
        da = a.mean - np.interp(a.param, pa, ma)
        db = b.mean - np.interp(b.param, pa, ma)
        if da == 0.0:
            crossings.append(float(a.param))
        elif da * db < 0:
            t = da / (da - db)
            crossings.append(float(a.param + t * (b.param - a.param)))
    return crossings
