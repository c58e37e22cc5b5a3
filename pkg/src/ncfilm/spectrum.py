"""Linear stability of steady states.

The linearization of the evolution about a base state H is

    L psi = [gamma + d/dx (H^3 d/dx)] (pi'(H) psi - psi'')
            + d/dx [3 H^2 p_x psi],

where p is the base pressure.  For uniform and constant-pressure bases the
second bracket vanishes identically and the two-factor form is used alone;
the same matrix doubles as the analytic Jacobian for implicit time
stepping.  Eigenvalue curves tracked in L or gamma locate stability
exchanges, real-pair merges, and Hopf points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import GridFunction, ModelParams, derivative_matrix, pi_prime, quad
from .steady2 import SteadyProfile

IM_TOL = 1e-6  # |Im| above this means a genuinely complex eigenvalue
REAL_ZERO_FLOOR = 1e-7  # real crossings entirely below this are kernel noise


def zero_tol(params: ModelParams) -> float:
    """Threshold separating the translational zero mode from real spectrum.

    Spectral discretizations pin the mode near machine zero; second-order
    finite differences leave an O(dx^2) residue.
    """
    if params.scheme == "spectral":
        return 1e-6
    return 10.0 * (params.L / params.N) ** 2


@dataclass(frozen=True)
class Spectrum:
    """Leading eigenvalues (descending real part) with optional modes.

    eigenfunctions holds one complex column per eigenvalue, normalized to
    unit continuum L2 norm with psi(0) real and nonnegative.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray | None
    translational_index: int | None
    dominant: complex | None


@dataclass(frozen=True)
class SpectrumEvent:
    kind: str  # 'real_zero' | 'merge' | 'split' | 'hopf'
    param_value: float
    eigenvalue: complex
    bracket: tuple[float, float]


@dataclass
class EigenCurves:
    param: np.ndarray
    curves: np.ndarray  # shape (n_params, n_track), complex
    events: list[SpectrumEvent] = field(default_factory=list)


def jacobian_matrix(h_values: np.ndarray, params: ModelParams) -> np.ndarray:
    """Dense Jacobian of the evolution right-hand side at an arbitrary field."""
    N, L, scheme = params.N, params.L, params.scheme
    D1 = derivative_matrix(N, L, 1, scheme)
    D2 = derivative_matrix(N, L, 2, scheme)
    h = np.asarray(h_values, dtype=float)
    p = _pi_vals(h, params.pbar) - D2 @ h
    A = np.diag(pi_prime(h)) - D2
    core = ((D1 * (h**3)[None, :]) @ D1 + params.gamma * np.eye(N)) @ A
    flux = D1 * (3.0 * h**2 * (D1 @ p))[None, :]
    return core + flux


def linearized_operator(base: SteadyProfile, params: ModelParams) -> np.ndarray:
    """Dense discretization of the stability operator about a steady base.

    Constant-pressure bases (uniform, second, constant_pressure) drop the
    flux-correction bracket exactly rather than numerically.
    """
    N, L, scheme = params.N, params.L, params.scheme
    D1 = derivative_matrix(N, L, 1, scheme)
    D2 = derivative_matrix(N, L, 2, scheme)
    h = base.h.values
    A = np.diag(pi_prime(h)) - D2
    core = ((D1 * (h**3)[None, :]) @ D1 + params.gamma * np.eye(N)) @ A
    if base.order == "fourth":
        px = D1 @ base.pressure.values
        core = core + D1 * (3.0 * h**2 * px)[None, :]
    return core


def _pi_vals(h, pbar):
    return h**-3 - h**-4 - pbar


def spectrum(
    base: SteadyProfile,
    params: ModelParams,
    n_eigs: int | None = None,
    eigenfunctions: bool = True,
) -> Spectrum:
    """Leading n_eigs eigenvalues of the linearized operator about base.

    The even-grid checkerboard (Nyquist sawtooth) lies in the kernel of
    every real skew-symmetric first-derivative matrix, so the discrete
    operator cannot represent its strong physical damping; the resulting
    artifact eigenpair is excluded from the returned spectrum.
    """
    op = linearized_operator(base, params)
    vals, vecs = np.linalg.eig(op)
    keep = _not_checkerboard(vecs)
    vals, vecs = vals[keep], vecs[:, keep]
    order = np.lexsort((-vals.imag, -vals.real))
    vals = vals[order]
    vecs = vecs[:, order]
    if n_eigs is not None:
        vals = vals[:n_eigs]
        vecs = vecs[:, :n_eigs]
    if not eigenfunctions:
        vecs = None
    if vecs is not None:
        vecs = _normalize_modes(vecs, params.L)

    ztol = zero_tol(params)
    trans = None
    if vecs is not None:
        dh = derivative_matrix(params.N, params.L, 1, params.scheme) @ base.h.values
        ndh = np.linalg.norm(dh)
        if ndh > 1e-12:
            dh = dh / ndh
            candidates = np.nonzero(np.abs(vals) <= 10.0 * ztol)[0]
            best_sim = 0.0
            for i in candidates:
                v = vecs[:, i]
                sim = abs(np.vdot(v, dh)) / np.linalg.norm(v)
                if sim > best_sim:
                    best_sim, trans = sim, int(i)
            if best_sim < 0.99:
                trans = None
    nonzero = vals[np.abs(vals) > ztol]
    dominant = complex(nonzero[0]) if nonzero.size else None
    return Spectrum(vals, vecs, trans, dominant)


def _not_checkerboard(vecs: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Mask of eigenvectors not dominated by the alternating grid mode."""
    N = vecs.shape[0]
    cb = np.where(np.arange(N) % 2 == 0, 1.0, -1.0) / np.sqrt(N)
    frac = np.abs(cb @ vecs) ** 2 / np.sum(np.abs(vecs) ** 2, axis=0)
    return frac < threshold


def _normalize_modes(vecs: np.ndarray, L: float) -> np.ndarray:
    out = np.array(vecs, dtype=complex)
    for i in range(out.shape[1]):
        v = out[:, i]
        nrm = np.sqrt(quad(np.abs(v) ** 2, L))
        v = v / nrm
        anchor = v[0]
        if abs(anchor) < 1e-12 * np.max(np.abs(v)):
            anchor = v[np.argmax(np.abs(v))]
        v = v * (anchor.conjugate() / abs(anchor))
        out[:, i] = v
    return out


# ---------------------------------------------------------------------------
# eigenvalue tracking
# ---------------------------------------------------------------------------


def track_eigenvalues(
    base_family: Callable[[float], SteadyProfile],
    param: str,
    p_range: tuple[float, float],
    step: float,
    params: ModelParams,
    n_track: int = 8,
) -> EigenCurves:
    """Follow the n_track leading eigenvalues across a parameter range.

    base_family maps a parameter value to a converged base state; param
    names which ModelParams field the value replaces ('L' or 'gamma').
    Curves are matched step to step by minimal-distance assignment; a step
    whose matching distance exceeds 10x the running median displacement is
    bisected, down to step/2^8.
    """
    if param not in ("L", "gamma"):
        raise ValueError("param must be 'L' or 'gamma'")

    def eigs_at(value: float) -> np.ndarray:
        pp = params.with_(**{param: float(value)})
        base = base_family(float(value))
        sp = spectrum(base, pp, n_eigs=n_track, eigenfunctions=False)
        ev = np.full(n_track, -np.inf + 0j, dtype=complex)
        ev[: len(sp.eigenvalues)] = sp.eigenvalues[:n_track]
        return ev

    lo, hi = p_range
    values = list(np.arange(lo, hi + 0.5 * step, step))
    out_p = [values[0]]
    out_e = [eigs_at(values[0])]
    displacements: list[float] = []
    min_step = step / 2**8
    queue = values[1:]
    while queue:
        nxt = queue.pop(0)
        prev_e = out_e[-1]
        cand = eigs_at(nxt)
        cost = np.abs(prev_e[:, None] - cand[None, :])
        rows, cols = linear_sum_assignment(cost)
        dist = cost[rows, cols].max()
        med = np.median(displacements) if displacements else np.inf
        if dist > 10.0 * med and (nxt - out_p[-1]) > min_step:
            queue.insert(0, nxt)
            queue.insert(0, 0.5 * (out_p[-1] + nxt))
            continue
        if displacements and dist > 100.0 * med:
            warnings.warn(
                f"eigenvalue matching ambiguous at {param} = {nxt}: curve may split",
                stacklevel=2,
            )
        out_p.append(nxt)
        out_e.append(cand[cols][np.argsort(rows)])
        displacements.append(float(dist))

    curves = np.vstack(out_e)
    track = EigenCurves(np.asarray(out_p), curves)
    events = _detect_events(track)

    # merge/split sit at bracket midpoints; a complex-count bisection
    # sharpens them to min_step, which interpolation cannot do because
    # Im flips discontinuously across the event
    def im_count(value: float) -> int:
        return int(np.sum(np.abs(np.imag(eigs_at(value))) > IM_TOL))

    refined = []
    for evn in events:
        if evn.kind not in ("merge", "split"):
            refined.append(evn)
            continue
        b_lo, b_hi = evn.bracket
        c_lo = im_count(b_lo)
        if im_count(b_hi) == c_lo:
            refined.append(evn)
            continue
        while b_hi - b_lo > min_step:
            mid = 0.5 * (b_lo + b_hi)
            if im_count(mid) == c_lo:
                b_lo = mid
            else:
                b_hi = mid
        refined.append(
            SpectrumEvent(evn.kind, float(0.5 * (b_lo + b_hi)), evn.eigenvalue, (b_lo, b_hi))
        )
    track.events = refined
    return track


def _detect_events(track: EigenCurves) -> list[SpectrumEvent]:
    events = []
    p = track.param
    for j in range(track.curves.shape[1]):
        lam = track.curves[:, j]
        for i in range(len(p) - 1):
            a, b = lam[i], lam[i + 1]
            if not (np.isfinite(a.real) and np.isfinite(b.real)):
                continue
            a_real = abs(a.imag) <= IM_TOL
            b_real = abs(b.imag) <= IM_TOL
            bracket = (float(p[i]), float(p[i + 1]))
            if a_real and b_real and a.real * b.real < 0:
                if max(abs(a.real), abs(b.real)) <= REAL_ZERO_FLOOR:
                    continue  # the translational curve wiggling about zero
                t = a.real / (a.real - b.real)
                events.append(
                    SpectrumEvent("real_zero", float(p[i] + t * (p[i + 1] - p[i])), b, bracket)
                )
            elif a_real and not b_real:
                events.append(SpectrumEvent("merge", float(0.5 * (p[i] + p[i + 1])), b, bracket))
            elif not a_real and b_real:
                events.append(SpectrumEvent("split", float(0.5 * (p[i] + p[i + 1])), a, bracket))
            elif not a_real and not b_real and a.real * b.real < 0:
                t = a.real / (a.real - b.real)
                events.append(
                    SpectrumEvent("hopf", float(p[i] + t * (p[i + 1] - p[i])), b, bracket)
                )
    # conjugate partners double-report merge/split/hopf; keep one per bracket
    seen = set()
    unique = []
    for ev in sorted(events, key=lambda e: (e.kind, e.param_value)):
        key = (ev.kind, round(ev.param_value, 9))
        if key not in seen:
            seen.add(key)
            unique.append(ev)
    return unique


def leading_pair_is_complex(base: SteadyProfile, params: ModelParams) -> bool:
    """Whether the leading nonzero eigenvalue belongs to a complex pair."""
    sp = spectrum(base, params, n_eigs=6, eigenfunctions=False)
    ztol = zero_tol(params)
    for lam in sp.eigenvalues:
        if abs(lam) <= ztol:
            continue
        return abs(lam.imag) > IM_TOL
    return False


def bisect_classifier(
    classifier: Callable[[float], bool], lo: float, hi: float, tol: float = 1e-5
) -> float:
    """Bisect a boolean transition; classifier(lo) and classifier(hi) must differ."""
    flo = classifier(lo)
    if classifier(hi) == flo:
        raise ValueError("classifier does not change across the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classifier(mid) == flo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dominant_complex_real_part(base: SteadyProfile, params: ModelParams) -> float | None:
    """Re of the leading complex-conjugate pair, None when the top of the
    spectrum is purely real."""
    sp = spectrum(base, params, n_eigs=12, eigenfunctions=False)
    ztol = zero_tol(params)
    for lam in sp.eigenvalues:
        if abs(lam) <= ztol:
            continue
        if abs(lam.imag) > IM_TOL:
            return float(lam.real)
    return None


@dataclass
class HopfLocus:
    """Sampled Hopf boundary gamma_c(L) with its apex (gamma_star, L_star).

    The boundary is a single closed arc over L; the two monotone flanks on
    either side of the apex are the two critical-period curves as functions
    of gamma.
    """

    L: np.ndarray
    gamma: np.ndarray
    gamma_star: float
    L_star: float

    def flank_curves(self) -> tuple[np.ndarray, np.ndarray]:
        i = int(np.argmax(self.gamma))
        low = np.column_stack([self.gamma[: i + 1], self.L[: i + 1]])
        high = np.column_stack([self.gamma[i:], self.L[i:]])
        return low, high


def hopf_locus(
    pbar: float,
    L_range: tuple[float, float],
    params: ModelParams | None = None,
    n_L: int = 13,
    gamma_hi: float = 0.12,
    tol: float = 1e-4,
) -> HopfLocus:
    """Bisect the oscillatory-instability boundary of one-period states.

    For each L the dominant complex pair of the gamma-dependent operator
    changes the sign of its real part on the boundary; L values where no
    sign change exists (outside the oscillatory window) are omitted.
    """
    from . import steady2

    if params is None:
        params = ModelParams(pbar=pbar, gamma=0.05, L=float(np.mean(L_range)))
    Ls, gs = [], []
    for L in np.linspace(L_range[0], L_range[1], n_L):
        base = steady2.solve_second_order(float(L), 1, params.with_(L=float(L)))

        def re_pair(g: float) -> float | None:
            return dominant_complex_real_part(base, params.with_(L=float(L), gamma=float(g)))

        # coarse descent from gamma_hi to find a bracket with a sign change
        grid_g = np.geomspace(gamma_hi, 1e-3, 12)
        vals = [re_pair(g) for g in grid_g]
        bracket = None
        for a, b, va, vb in zip(grid_g[:-1], grid_g[1:], vals[:-1], vals[1:]):
            if va is not None and vb is not None and va * vb < 0:
                bracket = (b, a)  # ascending
                break
        if bracket is None:
            continue
        lo, hi = bracket
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            v = re_pair(mid)
            if v is None:
                break
            if v > 0:
                lo = mid
            else:
                hi = mid
        Ls.append(float(L))
        gs.append(0.5 * (lo + hi))
    if not Ls:
        raise RuntimeError("no Hopf boundary found in the requested L range")
    L_arr = np.asarray(Ls)
    g_arr = np.asarray(gs)
    i = int(np.argmax(g_arr))
    return HopfLocus(L_arr, g_arr, float(g_arr[i]), float(L_arr[i]))
