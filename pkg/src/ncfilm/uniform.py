"""Uniform (flat-film) states and their linear theory.

A uniform state is a root of pi(h) = 0.  For 0 < pbar < 27/256 there are
two: a thin one below h = 4/3 where pi' > 0 and a thick one above where
pi' < 0.  Perturbations of wavenumber q about a uniform state H grow like

    lambda(q) = (-H^3 q^2 + gamma) * (pi'(H) + q^2),

which also yields the critical domain lengths where each factor changes
sign for the gravest mode q = 2*pi/L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import ModelParams, pi, pi_prime

PBAR_MAX = 27.0 / 256.0  # fold of the uniform family, attained at h = 4/3
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class UniformState:
    """One root of pi(h) = 0.

    branch is 'minus' for the thin root (h < 4/3) and 'plus' for the thick
    one; stable_k0 is the sign of gamma*pi'(H), the growth rate of the
    spatially uniform mode (for gamma > 0).
    """

    value: float
    branch: str
    pi_prime: float
    stable_k0: int


@dataclass(frozen=True)
class CriticalLengths:
    """Domain lengths where the gravest mode becomes neutral.

    ell_*_gamma come from the mobility factor -H^3 q^2 + gamma and exist for
    gamma > 0; ell_plus_p comes from pi'(H) + q^2 = 0 and exists only for
    the thick state (pi' < 0).  Missing states leave fields as None.
    """

    ell_minus_gamma: float | None
    ell_plus_gamma: float | None
    ell_plus_p: float | None


def uniform_states(pbar: float) -> list[UniformState]:
    """All positive roots of pi(h) = 0, thin branch first.

    pbar > 27/256 gives none; pbar <= 0 gives only the thin root; the fold
    value itself gives the single degenerate root h = 4/3.
    """
    if pbar > PBAR_MAX:
        return []
    if abs(pbar - PBAR_MAX) < 1e-15:
        return [UniformState(4.0 / 3.0, "minus", pi_prime(4.0 / 3.0), 0)]
    states = [_polish(_bracket_root(pbar, 1e-6, 4.0 / 3.0), pbar, "minus")]
    if pbar > 0:
        upper = max(10.0, 2.0 * pbar ** (-1.0 / 3.0))
        states.append(_polish(_bracket_root(pbar, 4.0 / 3.0, upper), pbar, "plus"))
    return states


def _bracket_root(pbar: float, lo: float, hi: float) -> float:
    return brentq(lambda h: pi(h, pbar), lo, hi, xtol=1e-14, rtol=8.9e-16)


def _polish(h: float, pbar: float, branch: str) -> UniformState:
    # a couple of Newton steps to push |pi| to the 1e-12 contract
    for _ in range(5):
        r = pi(h, pbar)
        if abs(r) <= ROOT_TOL:
            break
        h -= r / pi_prime(h)
    pp = pi_prime(h)
    return UniformState(float(h), branch, float(pp), int(np.sign(pp)))


def uniform_asymptotic(pbar: float) -> tuple[float, float]:
    """Small-pbar expansions of the two roots.

    Thin root: 1 + pbar + 4 pbar^2 (error O(pbar^3)); thick root:
    pbar^(-1/3) - 1/3 - (2/9) pbar^(1/3) - (20/81) pbar^(2/3) (error O(pbar)).
    """
    if pbar <= 0:
        raise ValueError("asymptotics require pbar > 0")
    hm = 1.0 + pbar + 4.0 * pbar**2
    t = pbar ** (1.0 / 3.0)
    hc = 1.0 / t - 1.0 / 3.0 - (2.0 / 9.0) * t - (20.0 / 81.0) * t * t
    return hm, hc


def dispersion(k: int, state: UniformState, params: ModelParams) -> float:
    """Growth rate of mode k (integer, q = 2*pi*k/L) about a uniform state."""
    q2 = (2.0 * np.pi * k / params.L) ** 2
    H = state.value
    return (-(H**3) * q2 + params.gamma) * (state.pi_prime + q2)


def critical_lengths(params: ModelParams) -> CriticalLengths:
    """Neutral lengths of the gravest mode for both uniform states."""
    states = {s.branch: s for s in uniform_states(params.pbar)}
    ell_mg = ell_pg = ell_pp = None
    if params.gamma > 0:
        if "minus" in states:
            ell_mg = 2.0 * np.pi * states["minus"].value ** 1.5 / np.sqrt(params.gamma)
        if "plus" in states:
            ell_pg = 2.0 * np.pi * states["plus"].value ** 1.5 / np.sqrt(params.gamma)
    if "plus" in states and states["plus"].pi_prime < 0:
        ell_pp = 2.0 * np.pi / np.sqrt(-states["plus"].pi_prime)
    return CriticalLengths(ell_mg, ell_pg, ell_pp)


def gamma_transcritical_threshold(pbar: float) -> float:
    """gamma at which the two thick-state neutral lengths satisfy
    ell_plus_gamma = 2 * ell_plus_p, where the finite-amplitude branch
    changes between sub- and supercritical onset."""
    states = {s.branch: s for s in uniform_states(pbar)}
    if "plus" not in states:
        raise ValueError("no thick uniform state at this pbar")
    s = states["plus"]
    return -s.pi_prime * s.value**3 / 4.0
