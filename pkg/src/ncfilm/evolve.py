"""Time integration of the film equation and trajectory analysis.

Stepping is implicit (variable-order BDF) with the analytic Jacobian of
the discrete right-hand side as the Newton iteration matrix; the
fourth-order viscous term makes the semidiscrete system stiff on any
grid worth using.

The driver owns the step loop instead of delegating to solve_ivp so it
can act between accepted steps: cap the step once the film enters a
finite-time collapse (dt shrinks like h_min^5, the clock of the local
sink term), store profile snapshots on fixed time marks and on
geometric h_min thresholds, and halt on cheap whole-state tests
(convergence, rupture floor, mass cap) that are awkward as root
functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import BDF
from scipy.optimize import brentq

from .branches import Branch
from .model import (
    POSITIVITY_FLOOR,
    ConvergenceError,
    GridFunction,
    ModelParams,
    PositivityError,
    deriv,
    grid,
    l2_norm,
    pi,
    potential,
    quad,
)
from .model import pi_prime
from .steady2 import SteadyProfile
from .uniform import uniform_states

logger = logging.getLogger(__name__)

# Collapse bookkeeping: engage the step cap once h_min drops below
# ENGAGE; the cap CAP_COEF * h_min^5 / gamma tracks the local drainage
# clock (dh/dt ~ -gamma/h^4 at the minimum, so h^5 decays linearly in
# time) with a few dozen steps per e-fold of h_min.
RUPTURE_ENGAGE = 0.25
CAP_COEF = 0.01
SNAPSHOT_FACTOR = 10.0 ** (1.0 / 8.0)


@dataclass(frozen=True)
class EventConfig:
    """Halting rules and storage cadence for a single run.

    Any of the three event thresholds may be None to disable that event.
    profile_every = None stores roughly 256 profiles across the run.
    """

    rupture_floor: float | None = 1e-3
    converged_rate: float | None = None
    mass_cap: float | None = None
    max_dt: float | None = None
    profile_every: float | None = None


@dataclass(frozen=True)
class SimEvent:
    kind: str  # 'converged' | 'rupture' | 'mass_runaway'
    time: float
    payload: dict


@dataclass
class SimTrace:
    """Per-step scalar diagnostics plus sparse profile snapshots.

    times are the accepted solver steps; profiles are stored on a coarser
    cadence and, during a collapse, on geometric h_min thresholds, so
    profile_times need not align with times.

    During a collapse the step size shrinks below the float spacing of the
    absolute time, so the integrator clock is restarted at a fresh origin
    (an epoch).  times stay absolute and therefore quantize near the end;
    fine_times hold the offset from the owning epoch's origin at full
    resolution, epochs index the origin per sample, and epoch_offsets map
    an epoch index to its absolute origin.  Clock fits near a collapse
    must use fine_times within one epoch.
    """

    params: ModelParams
    times: np.ndarray
    mean: np.ndarray
    h_min: np.ndarray
    h_max: np.ndarray
    mass: np.ndarray
    mass_rate: np.ndarray
    energy: np.ndarray
    energy_rate: np.ndarray
    mean_pressure: np.ndarray
    fine_times: np.ndarray
    epochs: np.ndarray
    epoch_offsets: np.ndarray
    profile_times: np.ndarray
    profiles: np.ndarray
    final: GridFunction
    events: list[SimEvent] = field(default_factory=list)

    def event(self, kind: str) -> SimEvent | None:
        for ev in self.events:
            if ev.kind == kind:
                return ev
        return None


@dataclass(frozen=True)
class LimitCycle:
    period: float
    amplitude_mean: float  # peak-to-trough of the spatial mean
    amplitude_range: tuple[float, float]  # (min, max) of the mean over a cycle
    n_cycles: int


@dataclass(frozen=True)
class FamilyEntry:
    gamma: float
    status: str  # 'cycle' | 'absent' | 'unfinished'
    cycle: LimitCycle | None
    t_used: float
    pattern_swing: float | None = None  # max of h_max - h_min over the last period


@dataclass(frozen=True)
class SlowFastReport:
    segments: list[tuple[str, float, float]]  # ('slow'|'fast', t_start, t_end)
    max_slow_distance: float  # normalized distance to the reference branch
    sign_consistency: float  # fraction of slow samples with sign d<h>/dt = sign P0
    max_fast_jump: float  # largest |change of <h>| across a fast segment
    n_slow: int
    n_fast: int


@dataclass(frozen=True)
class ProfileSnapshot:
    time: float
    h_min: float
    eta: np.ndarray  # (x - x_c) / h_min^(3/2), wrapped to the shortest image
    scaled: np.ndarray  # h / h_min


@dataclass(frozen=True)
class RuptureReport:
    t_c: float
    x_c: float
    alpha_fit: float
    slope_h5: float  # fitted d(h_min^5)/dt, close to -5*gamma for local drainage
    decades: float  # span of h_min resolved by the fit window
    snapshots: list[ProfileSnapshot]
    low_confidence: bool


@dataclass(frozen=True)
class GrowthFit:
    rate: float
    t_start: float
    t_end: float
    residual: float  # rms fit residual relative to the log-distance change


@dataclass(frozen=True)
class UniformTrajectory:
    times: np.ndarray
    values: np.ndarray
    outcome: str  # 'thick' | 'thin' | 'quench' | 'undecided'


# ---------------------------------------------------------------------------
# right-hand side


def _spectral_rhs(params: ModelParams):
    # 2/3-rule dealiasing as a Galerkin projection: the state and the whole
    # right-hand side are confined to the lower 2/3 band.  Masking only the
    # nonlinear product would strip the stabilizing fourth-order flux from
    # the top band while leaving the anti-diffusive gamma*p term there,
    # which is linearly unstable at rate about gamma*q^2.
    N, L, pbar, gamma = params.N, params.L, params.pbar, params.gamma
    ik = 2j * np.pi * np.fft.rfftfreq(N, d=1.0 / N) / L
    mask = (np.arange(ik.size) <= N // 3).astype(float)

    def rhs(y: np.ndarray) -> np.ndarray:
        if y.min() <= POSITIVITY_FLOOR:
            return np.full_like(y, np.nan)
        Y = np.fft.rfft(y) * mask
        yb = np.fft.irfft(Y, N)
        if yb.min() <= POSITIVITY_FLOOR:
            return np.full_like(y, np.nan)
        p = pi(yb, pbar) - np.fft.irfft(ik * ik * Y, N)
        P = np.fft.rfft(p)
        px = np.fft.irfft(ik * mask * P, N)
        flux = np.fft.rfft(yb**3 * px)
        return np.fft.irfft((ik * flux + gamma * P) * mask, N)

    return rhs


def _fd_rhs(params: ModelParams):
    N, L, pbar, gamma = params.N, params.L, params.pbar, params.gamma
    dx = L / N

    def rhs(y: np.ndarray) -> np.ndarray:
        if y.min() <= POSITIVITY_FLOOR:
            return np.full_like(y, np.nan)
        p = pi(y, pbar) - (np.roll(y, -1) - 2.0 * y + np.roll(y, 1)) / dx**2
        # flux at the half points i+1/2; the divergence telescopes, so the
        # conserved part moves no mass to rounding
        dp = (np.roll(p, -1) - p) / dx
        hm = 0.5 * (y + np.roll(y, -1))
        flux = hm**3 * dp
        return (flux - np.roll(flux, 1)) / dx + gamma * p

    return rhs


def time_derivative(values: np.ndarray, params: ModelParams) -> np.ndarray:
    """Discrete d(h)/dt for a sampled field, matching run()'s stepping."""
    y = np.asarray(values, dtype=float)
    if y.size != params.N:
        raise ValueError(f"expected {params.N} samples, got {y.size}")
    f = _fd_rhs(params) if params.scheme == "fd" else _spectral_rhs(params)
    return f(y)


def _jac_function(params: ModelParams):
    """Exact Jacobian of the scheme-specific rhs above.

    The Newton iteration matrix must match the stepped rhs including the
    dealiasing mask (spectral) or the staggered flux (fd); a collocation
    Jacobian ignoring either differs by order one in the top wavenumbers
    and stalls the implicit stepper at machine-small dt.
    """
    N, L, pbar, gamma = params.N, params.L, params.pbar, params.gamma
    eye = np.eye(N)
    if params.scheme == "spectral":
        F = np.fft.rfft(eye, axis=0)
        ik = (2j * np.pi * np.fft.rfftfreq(N, d=1.0 / N) / L)[:, None]
        mask = (np.arange(ik.shape[0]) <= N // 3).astype(float)[:, None]
        M = np.fft.irfft(mask * F, N, axis=0)
        D1M = np.fft.irfft(ik * mask * F, N, axis=0)
        D2M = np.fft.irfft(ik * ik * mask * F, N, axis=0)

        def jac(y: np.ndarray) -> np.ndarray:
            if y.min() <= POSITIVITY_FLOOR:
                return np.full((N, N), np.nan)
            yb = M @ y
            if yb.min() <= POSITIVITY_FLOOR:
                return np.full((N, N), np.nan)
            p = pi(yb, pbar) - D2M @ y
            px = D1M @ p
            AM = pi_prime(yb)[:, None] * M - D2M
            out = D1M @ ((3.0 * yb**2 * px)[:, None] * M + (yb**3)[:, None] * (D1M @ AM))
            return out + gamma * (M @ AM)

        return jac

    dx = L / N
    Sp = np.roll(eye, -1, axis=0)  # (Sp y)_i = y_{i+1}
    Sm = np.roll(eye, 1, axis=0)
    lap = (Sp - 2.0 * eye + Sm) / dx**2

    def jac(y: np.ndarray) -> np.ndarray:
        if y.min() <= POSITIVITY_FLOOR:
            return np.full((N, N), np.nan)
        p = pi(y, pbar) - lap @ y
        dP = np.diag(pi_prime(y)) - lap
        hm = 0.5 * (y + np.roll(y, -1))
        dp = (np.roll(p, -1) - p) / dx
        dflux = (1.5 * hm**2 * dp)[:, None] * (eye + Sp)
        dflux += (hm**3 / dx)[:, None] * ((Sp - eye) @ dP)
        return (dflux - Sm @ dflux) / dx + gamma * dP

    return jac


# ---------------------------------------------------------------------------
# trace recording


class _Recorder:
    def __init__(self, params: ModelParams, ev: EventConfig, t_end: float):
        self.params = params
        self.scheme = params.scheme
        self.rows: list[tuple] = []
        self.profile_times: list[float] = []
        self.profiles: list[np.ndarray] = []
        cadence = ev.profile_every if ev.profile_every is not None else t_end / 256.0
        self.cadence = max(cadence, 1e-12)
        self.next_mark = 0.0
        self.next_snapshot = np.inf  # armed on first log

    def log(self, t: float, y: np.ndarray, epoch: int = 0, t_fine: float = 0.0) -> None:
        p = self.params
        pres = pi(y, p.pbar) - deriv(y, p.L, 2, self.scheme)
        hx = deriv(y, p.L, 1, self.scheme)
        px = deriv(pres, p.L, 1, self.scheme)
        mean = float(y.mean())
        int_p = quad(pres, p.L)
        energy = quad(0.5 * hx**2 + potential(y, p.pbar), p.L)
        energy_rate = -quad(y**3 * px**2, p.L) + p.gamma * quad(pres**2, p.L)
        self.rows.append(
            (
                t,
                mean,
                float(y.min()),
                float(y.max()),
                mean * p.L,
                p.gamma * int_p,
                energy,
                energy_rate,
                int_p / p.L,
                t_fine,
                float(epoch),
            )
        )
        if not np.isfinite(self.next_snapshot):
            self.next_snapshot = float(y.min()) / SNAPSHOT_FACTOR

    def store(self, t: float, y: np.ndarray, force: bool = False) -> None:
        # collapse steps are closer than the float spacing of t, so equal
        # stamps are legitimate there; only cadence marks dedupe by time
        if (
            not force
            and self.profile_times
            and abs(t - self.profile_times[-1]) < 1e-14 * max(t, 1.0)
        ):
            return
        self.profile_times.append(t)
        self.profiles.append(np.array(y, dtype=float, copy=True))

    def marks_upto(self, sol, t_new: float, y_new: np.ndarray, off: float = 0.0) -> None:
        while self.next_mark <= t_new + 1e-14:
            tm = self.next_mark
            self.next_mark += self.cadence
            if tm - off >= sol.t:
                self.store(t_new, y_new)
            else:
                yv = sol(max(tm - off, sol.t_old))
                self.store(tm, np.asarray(yv, dtype=float))
        hm = float(y_new.min())
        if hm <= self.next_snapshot:
            self.store(t_new, y_new, force=True)
            while self.next_snapshot > hm:
                self.next_snapshot /= SNAPSHOT_FACTOR

    def to_trace(
        self, events: list[SimEvent], y_final: np.ndarray, epoch_offsets: list[float]
    ) -> SimTrace:
        cols = list(zip(*self.rows))
        arrs = [np.asarray(c, dtype=float) for c in cols]
        self.store(arrs[0][-1], y_final, force=True)
        return SimTrace(
            params=self.params,
            times=arrs[0],
            mean=arrs[1],
            h_min=arrs[2],
            h_max=arrs[3],
            mass=arrs[4],
            mass_rate=arrs[5],
            energy=arrs[6],
            energy_rate=arrs[7],
            mean_pressure=arrs[8],
            fine_times=arrs[9],
            epochs=arrs[10].astype(int),
            epoch_offsets=np.asarray(epoch_offsets, dtype=float),
            profile_times=np.asarray(self.profile_times),
            profiles=np.vstack(self.profiles),
            final=GridFunction(np.array(y_final, copy=True), self.params.L),
            events=events,
        )


def _floor_crossing(sol, floor: float) -> float:
    g = lambda t: float(np.min(sol(t))) - floor
    a, b = sol.t_old, sol.t
    if g(a) <= 0.0:
        return float(a)
    if g(b) > 0.0:
        return float(b)
    return float(brentq(g, a, b, xtol=1e-12 * max(abs(b), 1.0)))


# ---------------------------------------------------------------------------
# the driver


def run(
    h0: GridFunction | SteadyProfile,
    params: ModelParams,
    t_end: float,
    events: EventConfig | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> SimTrace:
    """Integrate the film equation from h0 up to t_end or a terminal event.

    The initial field must live on the params grid.  Diagnostics are
    logged at every accepted step; profiles at the configured cadence.
    """
    base = h0.h if isinstance(h0, SteadyProfile) else h0
    y0 = np.array(base.values, dtype=float, copy=True)
    if y0.size != params.N:
        raise ValueError(f"initial condition has {y0.size} points, params.N = {params.N}")
    if abs(base.L - params.L) > 1e-9 * params.L:
        raise ValueError(f"initial condition L = {base.L} does not match params.L = {params.L}")
    if y0.min() <= POSITIVITY_FLOOR:
        raise PositivityError(f"initial film touches the floor: min h = {y0.min():.3e}")
    ev = events if events is not None else EventConfig()

    rhs = _fd_rhs(params) if params.scheme == "fd" else _spectral_rhs(params)
    jac = _jac_function(params)
    gamma_eff = max(params.gamma, 1e-3)

    solver = BDF(
        lambda t, y: rhs(y),
        0.0,
        y0,
        t_end,
        rtol=rtol,
        atol=atol,
        max_step=ev.max_dt if ev.max_dt is not None else np.inf,
        jac=lambda t, y: jac(y),
    )
    rec = _Recorder(params, ev, t_end)
    rec.log(0.0, y0)
    rec.store(0.0, y0)
    rec.next_mark = rec.cadence

    out_events: list[SimEvent] = []
    eps = np.finfo(float).eps
    off = 0.0
    epoch = 0
    epoch_offsets = [0.0]
    while solver.status == "running":
        if ev.rupture_floor is not None:
            hm = float(solver.y.min())
            if hm < RUPTURE_ENGAGE:
                cap = CAP_COEF * hm**5 / gamma_eff
                if solver.t > 0.0 and cap < 1e5 * eps * solver.t:
                    # the collapse clock now ticks below the float spacing
                    # of the integrator time; restart at a fresh origin so
                    # dt is limited by physics, not representation
                    off += float(solver.t)
                    epoch += 1
                    epoch_offsets.append(off)
                    solver = BDF(
                        lambda t, y: rhs(y),
                        0.0,
                        solver.y.copy(),
                        t_end - off,
                        rtol=rtol,
                        atol=atol,
                        max_step=cap,
                        jac=lambda t, y: jac(y),
                    )
                solver.max_step = max(cap, 64.0 * eps * max(solver.t, 1.0))
            elif ev.max_dt is None and not np.isinf(solver.max_step):
                solver.max_step = np.inf
            elif ev.max_dt is not None:
                solver.max_step = ev.max_dt
        msg = solver.step()
        if solver.status == "failed":
            hm = float(np.nanmin(solver.y))
            if ev.rupture_floor is not None and hm <= max(30.0 * ev.rupture_floor, 0.6 * RUPTURE_ENGAGE):
                # the step needed to continue is not realizable: report
                # arrival at the singularity instead
                out_events.append(
                    SimEvent(
                        "rupture",
                        off + float(solver.t),
                        {"h_min": hm, "x_index": int(np.argmin(solver.y)), "floor_reached": False},
                    )
                )
                rec.store(off + float(solver.t), solver.y, force=True)
                break
            raise ConvergenceError(f"implicit step failed at t = {off + solver.t:.6g}: {msg}")
        t_loc = float(solver.t)
        t_abs = off + t_loc
        y_new = solver.y
        sol = solver.dense_output()
        rec.marks_upto(sol, t_abs, y_new, off)
        rec.log(t_abs, y_new, epoch, t_loc)

        if ev.rupture_floor is not None and float(y_new.min()) <= ev.rupture_floor:
            t_r = off + _floor_crossing(sol, ev.rupture_floor)
            out_events.append(
                SimEvent(
                    "rupture",
                    t_r,
                    {
                        "h_min": float(y_new.min()),
                        "x_index": int(np.argmin(y_new)),
                        "floor_reached": True,
                    },
                )
            )
            break
        if ev.converged_rate is not None:
            rate = float(np.abs(rhs(y_new)).max())
            if rate <= ev.converged_rate:
                out_events.append(SimEvent("converged", t_abs, {"max_rate": rate}))
                break
        if ev.mass_cap is not None and float(y_new.mean()) >= ev.mass_cap:
            out_events.append(SimEvent("mass_runaway", t_abs, {"mean": float(y_new.mean())}))
            break

    if solver.status == "failed" and not out_events:
        raise ConvergenceError("implicit step failed before any event")
    trace = rec.to_trace(out_events, solver.y, epoch_offsets)
    logger.info(
        "run finished at t = %.6g after %d steps (%s)",
        trace.times[-1],
        trace.times.size - 1,
        out_events[0].kind if out_events else "t_end",
    )
    return trace


# ---------------------------------------------------------------------------
# initial conditions


def orient_mode(mode: np.ndarray, base_values: np.ndarray) -> np.ndarray:
    """Sign-fix an eigenmode so positive amplitude deepens the base's trough.

    Eigenvectors come out of the solver with an arbitrary overall sign;
    pinning it at the base minimum makes 'toward rupture' mean delta > 0
    and 'away from it' delta < 0, independent of grid phase.
    """
    mv = np.asarray(mode, dtype=float)
    j = int(np.argmin(np.asarray(base_values)))
    s = float(np.sign(mv[j]))
    return -s * mv if s != 0.0 else mv


def perturbed_initial(
    base: SteadyProfile | GridFunction, mode: GridFunction | np.ndarray, delta: float
) -> GridFunction:
    """base + delta * (mode normalized to unit L2), L2 distance exactly |delta|."""
    bh = base.h if isinstance(base, SteadyProfile) else base
    mv = mode.values if isinstance(mode, GridFunction) else np.asarray(mode, dtype=float)
    if mv.size != bh.values.size:
        raise ValueError(f"mode has {mv.size} points, base has {bh.values.size}")
    nrm = l2_norm(mv, bh.L)
    if nrm < 1e-300:
        raise ValueError("perturbation mode vanishes identically")
    values = bh.values + delta * mv / nrm
    if values.min() <= POSITIVITY_FLOOR:
        raise PositivityError(
            f"perturbation drives the film to min h = {values.min():.3e}"
        )
    return GridFunction(values, bh.L)


def uniform_ode(h_bar0: float, params: ModelParams, t_end: float = 2000.0) -> UniformTrajectory:
    """Spatially uniform reduction dh/dt = gamma * pi(h) with endpoint label.

    Quench (finite-time drainage through h = 0.05) halts the integration;
    otherwise the endpoint is classified against the uniform roots.
    """
    if h_bar0 <= 0.05:
        raise PositivityError(f"uniform start {h_bar0} is at or below the quench cut")
    gamma, pbar = params.gamma, params.pbar
    quench_cut = 0.05

    def f(t, y):
        return [gamma * pi(max(y[0], 1e-5), pbar)]

    def hit_cut(t, y):
        return y[0] - quench_cut

    hit_cut.terminal = True
    hit_cut.direction = -1.0
    from scipy.integrate import solve_ivp

    sol = solve_ivp(
        f,
        (0.0, t_end),
        [h_bar0],
        method="LSODA",
        events=hit_cut,
        rtol=1e-10,
        atol=1e-12,
        dense_output=False,
        max_step=t_end / 50.0,
    )
    if not sol.success and sol.status != 1:
        raise ConvergenceError(f"uniform reduction failed: {sol.message}")
    times = sol.t
    values = sol.y[0]
    if sol.status == 1:  # quench event
        outcome = "quench"
    else:
        roots = {s.branch: s.value for s in uniform_states(pbar)}
        hf = values[-1]
        if abs(hf - roots["plus"]) < 1e-3:
            outcome = "thick"
        elif abs(hf - roots["minus"]) < 1e-3:
            outcome = "thin"
        else:
            outcome = "undecided"
    return UniformTrajectory(times=times, values=values, outcome=outcome)


# ---------------------------------------------------------------------------
# limit cycles


def _upward_crossings(t: np.ndarray, m: np.ndarray, level: float) -> np.ndarray:
    below = m[:-1] < level
    above = m[1:] >= level
    idx = np.nonzero(below & above)[0]
    if idx.size == 0:
        return np.empty(0)
    frac = (level - m[idx]) / (m[idx + 1] - m[idx])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def detect_limit_cycle(
    trace: SimTrace,
    rel_tol: float = 0.01,
    n_agree: int = 3,
    min_cycles: int = 5,
    amp_floor: float = 1e-5,
) -> LimitCycle | None:
    """Poincare test on the spatial mean: upward crossings of its time mean.

    Declares a cycle only when at least min_cycles full returns exist and
    the last n_agree consecutive periods and per-cycle amplitudes both
    agree to rel_tol.  Decaying oscillations keep a steady period, so the
    amplitude check is what rejects them.
    """
    t, m = trace.times, trace.mean
    if t.size < 16:
        return None
    half = t[-1] - 0.5 * (t[-1] - t[0])
    sel = t >= half
    level = float(np.trapezoid(m[sel], t[sel]) / (t[sel][-1] - t[sel][0])) if sel.sum() > 3 else float(m.mean())
    crossings = _upward_crossings(t, m, level)
    if crossings.size < min_cycles + 1:
        return None
    periods = np.diff(crossings)
    tail_p = periods[-n_agree:]
    if tail_p.size < n_agree or tail_p.mean() <= 0:
        return None
    if (tail_p.max() - tail_p.min()) > rel_tol * tail_p.mean():
        return None
    # per-cycle peak-to-trough amplitudes over the last n_agree returns
    amps = []
    mins, maxs = [], []
    for a, b in zip(crossings[-n_agree - 1 : -1], crossings[-n_agree:]):
        s = (t >= a) & (t <= b)
        if s.sum() < 4:
            return None
        amps.append(float(m[s].max() - m[s].min()))
        mins.append(float(m[s].min()))
        maxs.append(float(m[s].max()))
    amps = np.asarray(amps)
    if amps.mean() < amp_floor:
        return None
    if (amps.max() - amps.min()) > rel_tol * amps.mean():
        return None
    return LimitCycle(
        period=float(tail_p.mean()),
        amplitude_mean=float(amps.mean()),
        amplitude_range=(float(np.min(mins)), float(np.max(maxs))),
        n_cycles=int(crossings.size - 1),
    )


def _cycle_status(trace: SimTrace, cycle: LimitCycle | None) -> str:
    if cycle is not None:
        return "cycle"
    if trace.event("converged") is not None:
        return "absent"
    # no cycle declared: decaying if successive swings of the mean shrink
    t, m = trace.times, trace.mean
    level = float(m[t >= t[-1] / 2].mean())
    crossings = _upward_crossings(t, m, level)
    if crossings.size < 4:
        # distinguish a settled mean from a horizon shorter than the period
        rng = float(m.max() - m.min())
        tail = m[t >= 0.75 * t[-1]]
        if rng < 1e-6 or float(tail.max() - tail.min()) < 0.05 * rng:
            return "absent"
        return "unfinished"
    amps = []
    for a, b in zip(crossings[:-1], crossings[1:]):
        s = (t >= a) & (t <= b)
        if s.sum() >= 3:
            amps.append(m[s].max() - m[s].min())
    if len(amps) >= 3 and (amps[-1] < 0.9 * max(amps) or amps[-1] < 1e-6):
        return "absent"
    return "unfinished"


def _pattern_swing(trace: SimTrace, period: float) -> float:
    last = trace.times >= trace.times[-1] - period
    return float(np.max(trace.h_max[last] - trace.h_min[last]))


def limit_cycle_family(
    pbar: float,
    L: float,
    gamma_range,
    N: int = 128,
    t_cap: float = 500000.0,
    rel_tol: float = 0.01,
    anchor_state: GridFunction | None = None,
) -> list[FamilyEntry]:
    """Follow the periodic attractor across a set of gamma values.

    Runs start at the gamma nearest 0.02 (where the oscillation is robust)
    from the pattern state kicked along its leading oscillatory eigenmode,
    then sweep outward in both directions, each run seeded with the
    previous final profile so it begins essentially on the neighboring
    attractor.  The horizon per run covers the Hopf transient at the
    anchor and, away from it, several multiples of the neighbor's
    measured period; the period stretches like 1/gamma toward small
    gamma, hence the large default cap.  Runs that hit the cap without a
    strict verdict still report the loosest cycle measurement available
    but are flagged unfinished.
    """
    from .spectrum import spectrum as _spectrum
    from .steady2 import solve_second_order
    from .steady4 import solve_fourth_order

    gammas = sorted(float(g) for g in gamma_range)
    if not gammas:
        return []
    anchor_idx = int(np.argmin([abs(g - 0.02) for g in gammas]))
    order = list(range(anchor_idx, len(gammas))) + list(range(anchor_idx - 1, -1, -1))

    if anchor_state is None:
        g0 = gammas[anchor_idx]
        params0 = ModelParams(pbar=pbar, gamma=g0, L=L, N=N)
        base = solve_fourth_order(solve_second_order(L, 1, params0), params0)
        sp = _spectrum(base, params0)
        mode = orient_mode(np.real(sp.eigenfunctions[:, 0]), base.h.values)
        anchor_state = GridFunction(base.h.values + 0.01 * mode, L)

    entries: dict[int, FamilyEntry] = {}
    seeds: dict[int, GridFunction] = {}
    periods: dict[int, float] = {}
    for pos, i in enumerate(order):
        g = gammas[i]
        params = ModelParams(pbar=pbar, gamma=g, L=L, N=N)
        if pos == 0:
            seed, k = anchor_state, None
        elif i > anchor_idx:
            seed, k = seeds.get(i - 1, anchor_state), i - 1
        else:
            seed, k = seeds.get(i + 1, anchor_state), i + 1
        # expected period from the neighbor, stretched like 1/gamma
        appr = periods[k] * gammas[k] / g if k is not None and k in periods else 0.0
        horizon = min(t_cap, max(40000.0, 7.0 * appr))
        trace = run(seed, params, horizon, EventConfig(converged_rate=1e-9))
        cycle = detect_limit_cycle(trace, rel_tol=rel_tol)
        status = _cycle_status(trace, cycle)
        if cycle is None and status == "unfinished":
            # cap hit mid-family: salvage amplitude/period from fewer turns
            cycle = detect_limit_cycle(trace, rel_tol=5 * rel_tol, min_cycles=2)
        swing = _pattern_swing(trace, cycle.period) if cycle else None
        entries[i] = FamilyEntry(
            gamma=g,
            status=status,
            cycle=cycle,
            t_used=float(trace.times[-1]),
            pattern_swing=swing,
        )
        seeds[i] = trace.final
        if cycle is not None:
            periods[i] = cycle.period
        logger.info("family gamma = %.6g: %s", g, status)
    return [entries[i] for i in range(len(gammas))]


# ---------------------------------------------------------------------------
# slow/fast decomposition


def slow_fast_diagnostics(
    trace: SimTrace, slow_branch: Branch, pressure_factor: float = 10.0
) -> SlowFastReport:
    """Classify a trajectory into slow (on-branch) and fast stages.

    The two phase types carry comparable mean-pressure magnitudes (both
    visit the branch's own P0 range), so the gate is the rate of change
    of the mean pressure instead: slow drift moves <p> on the pumping
    timescale while a structural rearrangement moves it orders of
    magnitude faster.  Fast samples are those with |d<p>/dt| above
    pressure_factor times the time-weighted median rate; the weighting
    matters because the implicit stepper clusters its steps inside the
    short fast bursts, so a plain sample median would land there.
    Distances to the branch are measured in coordinates normalized by
    the branch spans.
    """
    pts = slow_branch.points
    if len(pts) < 4:
        raise ValueError("slow branch too short to serve as a reference")
    bm = np.asarray([q.mean for q in pts])
    bp = np.asarray([q.param for q in pts])
    span_m = float(bm.max() - bm.min()) or 1.0
    span_p = float(bp.max() - bp.min()) or 1.0

    t, m, mp = trace.times, trace.mean, trace.mean_pressure
    u = np.gradient(m, t)
    v = np.abs(np.gradient(mp, t))
    dt = np.gradient(t)
    order = np.argsort(v)
    cum = np.cumsum(dt[order])
    v_typ = float(v[order][np.searchsorted(cum, 0.5 * cum[-1])]) or 1e-300
    slow = v <= pressure_factor * v_typ

    # contiguous segments; a flicker is shorter than 3 samples (fast
    # bursts are brief in time but densely sampled, so duration is not a
    # usable flicker gauge)
    segments: list[tuple[str, float, float]] = []
    i = 0
    while i < t.size:
        j = i
        while j + 1 < t.size and slow[j + 1] == slow[i]:
            j += 1
        seg = ("slow" if slow[i] else "fast", float(t[i]), float(t[j]))
        if j - i + 1 >= 3 or not segments:
            segments.append(seg)
        else:
            prev = segments[-1]
            segments[-1] = (prev[0], prev[1], seg[2])
        i = j + 1
    # merge adjacent segments of the same kind produced by flicker removal
    merged: list[tuple[str, float, float]] = []
    for seg in segments:
        if merged and merged[-1][0] == seg[0]:
            merged[-1] = (seg[0], merged[-1][1], seg[2])
        else:
            merged.append(seg)

    d = np.hypot((m[:, None] - bm[None, :]) / span_m, (mp[:, None] - bp[None, :]) / span_p)
    dist = d.min(axis=1)
    nearest = d.argmin(axis=1)

    # measure on-branch distance away from the burst edges: the few
    # samples entering/leaving a burst are mid-transition by construction
    fast_mask = ~slow
    pad = np.convolve(fast_mask.astype(float), np.ones(5), mode="same") > 0
    slow_idx = np.nonzero(slow & ~pad)[0]
    if slow_idx.size:
        max_slow_distance = float(dist[slow_idx].max())
        signs_ok = np.sign(u[slow_idx]) == np.sign(bp[nearest[slow_idx]])
        # drift below resolution counts as consistent
        tiny = np.abs(u[slow_idx]) < 1e-12
        sign_consistency = float(np.mean(signs_ok | tiny))
    else:
        max_slow_distance = math.inf
        sign_consistency = 0.0

    max_jump = 0.0
    for kind, a, b in merged:
        if kind != "fast":
            continue
        s = (t >= a) & (t <= b)
        if s.sum() >= 2:
            max_jump = max(max_jump, float(abs(m[s][-1] - m[s][0])))

    return SlowFastReport(
        segments=merged,
        max_slow_distance=max_slow_distance,
        sign_consistency=sign_consistency,
        max_fast_jump=max_jump,
        n_slow=sum(1 for s in merged if s[0] == "slow"),
        n_fast=sum(1 for s in merged if s[0] == "fast"),
    )


# ---------------------------------------------------------------------------
# rupture analysis


def _parabolic_min(x: np.ndarray, y: np.ndarray, L: float) -> float:
    j = int(np.argmin(y))
    ym, y0, yp = y[(j - 1) % y.size], y[j], y[(j + 1) % y.size]
    denom = ym - 2.0 * y0 + yp
    shift = 0.5 * (ym - yp) / denom if abs(denom) > 0 else 0.0
    dx = L / y.size
    return float((x[j] + shift * dx) % L)


def _cusp_center(x: np.ndarray, y: np.ndarray, L: float) -> float:
    """Sub-grid center of a 2/3-power cusp.

    A collapse core approaches h = C |x - x_c|^(2/3), so h^(3/2) is
    linear on each wing and the wings meet at x_c.  A parabola through
    the three lowest nodes assumes the wrong geometry there and recovers
    only part of the sub-grid offset.  Falls back to the parabolic
    estimate when the cusp window is too thin.
    """
    j = int(np.argmin(y))
    xr = (x - x[j] + 0.5 * L) % L - 0.5 * L
    order = np.argsort(xr)
    xr, yr = xr[order], y[order]
    h_end = float(yr.min())
    sel = (yr >= 10.0 * h_end) & (yr <= 0.25) & (np.abs(xr) <= 0.1 * L)
    if sel.sum() < 4 or not (xr[sel] < 0).any() or not (xr[sel] > 0).any():
        return _parabolic_min(x, y, L)
    xs, zs = xr[sel], yr[sel] ** 1.5
    sgn = np.sign(xs)
    design = np.vstack([sgn * xs, -sgn]).T
    (a, c), *_ = np.linalg.lstsq(design, zs, rcond=None)
    if a <= 0.0 or abs(c / a) > 0.6 * L / y.size:
        return _parabolic_min(x, y, L)
    return float((x[j] + c / a) % L)


def detect_rupture(trace: SimTrace, n_snapshots: int = 6) -> RuptureReport | None:
    """Fit the collapse clock h_min^5 = slope * (t - t_c) over its last decade.

    Returns None when the trace never entered a collapse.  alpha_fit is
    the log-log slope of h_min against t_c - t on the same window; the
    snapshots come back rescaled by h_min (height) and h_min^(3/2)
    (lateral), wrapped around the rupture point.
    """
    ev = trace.event("rupture")
    hm = trace.h_min
    if ev is None and hm[-1] > 0.1 * hm[0]:
        return None
    h_end = float(hm.min())
    hi = 10.0 * h_end
    # the clock fit runs in the final epoch's own time frame: absolute
    # times quantize inside a collapse (see SimTrace)
    last_epoch = int(trace.epochs[-1])
    first_in_epoch = int(np.searchsorted(trace.epochs, last_epoch))
    # last decade: samples after the final crossing of 10*h_end
    above = np.nonzero(hm > hi)[0]
    start = max(int(above[-1]) + 1 if above.size else 0, first_in_epoch)
    w = slice(start, len(hm))
    tw, hw = trace.fine_times[w], hm[w]
    low_confidence = False
    if tw.size < 8:
        low_confidence = True
        w = slice(max(first_in_epoch, len(hm) - 8), len(hm))
        tw, hw = trace.fine_times[w], hm[w]
    if tw.size < 3:
        return None

    A = np.vstack([tw, np.ones_like(tw)]).T
    coef, *_ = np.linalg.lstsq(A, hw**5, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    if slope >= 0.0:
        return None
    t_c_fine = -intercept / slope
    t_c = float(trace.epoch_offsets[last_epoch]) + t_c_fine

    tau = t_c_fine - tw
    good = tau > 0
    if good.sum() < 3:
        return None
    alpha = float(np.polyfit(np.log(tau[good]), np.log(hw[good]), 1)[0])

    # exponent from the tail half-decade: the wide window bends the
    # log-log slope (the clock error from its top dwarfs tau at its
    # bottom), so the tail is refit with its own singular time
    tail = hw <= np.sqrt(10.0) * h_end
    if tail.sum() >= 4:
        tt, ht = tw[tail], hw[tail]
        A2 = np.vstack([tt, np.ones_like(tt)]).T
        c2, *_ = np.linalg.lstsq(A2, ht**5, rcond=None)
        if c2[0] < 0.0:
            tau2 = -c2[1] / c2[0] - tt
            g2 = tau2 > 0
            if g2.sum() >= 3:
                alpha = float(np.polyfit(np.log(tau2[g2]), np.log(ht[g2]), 1)[0])

    # the sample bracketing the window from above counts toward coverage
    h_top = float(hm[start - 1]) if start > first_in_epoch else float(hw.max())
    decades = float(np.log10(h_top / h_end)) if h_end > 0 else 0.0
    if decades < 1.0:
        low_confidence = True

    x = grid(trace.params.L, trace.params.N)
    final = trace.profiles[-1]
    x_c = _cusp_center(x, final, trace.params.L)

    # snapshots spaced geometrically in h_min through the fit window
    prof_h = trace.profiles.min(axis=1)
    targets = h_end * np.geomspace(1.0, max(hw.max() / h_end, 1.0 + 1e-9), n_snapshots)
    snaps: list[ProfileSnapshot] = []
    used: set[int] = set()
    for tgt in targets:
        k = int(np.argmin(np.abs(prof_h - tgt)))
        if k in used:
            continue
        used.add(k)
        prof = trace.profiles[k]
        hmin_k = float(prof.min())
        xr = (x - x_c + 0.5 * trace.params.L) % trace.params.L - 0.5 * trace.params.L
        order = np.argsort(xr)
        snaps.append(
            ProfileSnapshot(
                time=float(trace.profile_times[k]),
                h_min=hmin_k,
                eta=xr[order] / hmin_k**1.5,
                scaled=prof[order] / hmin_k,
            )
        )
    snaps.sort(key=lambda s: s.h_min, reverse=True)

    return RuptureReport(
        t_c=float(t_c),
        x_c=x_c,
        alpha_fit=float(alpha),
        slope_h5=slope,
        decades=decades,
        snapshots=snaps,
        low_confidence=low_confidence,
    )


# ---------------------------------------------------------------------------
# growth-rate extraction


def growth_rate_fit(
    trace: SimTrace,
    base: SteadyProfile | GridFunction | np.ndarray,
    min_points: int = 8,
    max_residual: float = 0.01,
) -> GrowthFit | None:
    """Slope of log ||h(t) - base||_2 over the widest window that fits clean.

    A window qualifies when the rms residual of the linear fit is below
    max_residual times the total change of the log distance across it;
    among qualifying windows the one spanning the most time wins.
    """
    if isinstance(base, SteadyProfile):
        bv = base.h.values
    elif isinstance(base, GridFunction):
        bv = base.values
    else:
        bv = np.asarray(base, dtype=float)
    if trace.profiles.shape[0] < min_points:
        return None
    L = trace.params.L
    d = np.sqrt(np.mean((trace.profiles - bv[None, :]) ** 2, axis=1) * L)
    keep = d > max(1e-13, 1e-8 * d.max())
    t = trace.profile_times[keep]
    y = np.log(d[keep])
    n = t.size
    if n < min_points:
        return None

    # prefix sums give each candidate window an O(1) least-squares fit
    one = np.concatenate([[0.0], np.cumsum(np.ones(n))])
    st = np.concatenate([[0.0], np.cumsum(t)])
    stt = np.concatenate([[0.0], np.cumsum(t * t)])
    sy = np.concatenate([[0.0], np.cumsum(y)])
    sty = np.concatenate([[0.0], np.cumsum(t * y)])
    syy = np.concatenate([[0.0], np.cumsum(y * y)])

    best: tuple[float, int, int, float, float] | None = None
    for i in range(0, n - min_points + 1):
        for j in range(i + min_points, n + 1):
            m = one[j] - one[i]
            St = st[j] - st[i]
            Stt = stt[j] - stt[i]
            Sy = sy[j] - sy[i]
            Sty = sty[j] - sty[i]
            Syy = syy[j] - syy[i]
            det = m * Stt - St * St
            if det <= 0:
                continue
            slope = (m * Sty - St * Sy) / det
            icept = (Sy - slope * St) / m
            sse = Syy - 2 * slope * Sty - 2 * icept * Sy + slope**2 * Stt + 2 * slope * icept * St + m * icept**2
            change = abs(slope) * (t[j - 1] - t[i])
            if change < 1e-12:
                continue
            rel = math.sqrt(max(sse, 0.0) / m) / change
            if rel <= max_residual:
                span = t[j - 1] - t[i]
                if best is None or span > best[0]:
                    best = (span, i, j, slope, rel)
    if best is None:
        return None
    _, i, j, slope, rel = best
    return GrowthFit(rate=float(slope), t_start=float(t[i]), t_end=float(t[j - 1]), residual=float(rel))
