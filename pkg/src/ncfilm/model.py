"""Core model definitions: disjoining pressure, energy functionals, periodic
derivative operators, and pointwise diagnostics.

The evolution studied throughout this package is

    dh/dt = d/dx ( h^3 dp/dx ) + gamma * p,
    p     = pi(h) - h_xx,
    pi(h) = h^-3 - h^-4 - pbar,

posed on a periodic domain of length L.  Everything downstream (steady
solvers, monodromy, spectra, time stepping) builds on the helpers here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

POSITIVITY_FLOOR = 1e-6


class PositivityError(ValueError):
    """A height field reached a non-positive value where positivity is required."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance.

    Carries the final residual so callers can decide whether to retry
    with a better guess or report failure.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters shared by every solver.

    pbar        reference-pressure offset in pi(h)
    gamma       non-conserved (evaporation/condensation) rate; negative
                values flip the sign of the non-conserved flux
    L           domain period, > 0
    N           number of grid points, even, >= 64
    newton_tol  residual tolerance for Newton-type solvers
    max_iter    Newton iteration cap
    scheme      'spectral' or 'fd' derivative discretization
    """

    pbar: float = 0.05
    gamma: float = 0.05
    L: float = 50.0
    N: int = 256
    newton_tol: float = 1e-10
    max_iter: int = 50
    scheme: str = "spectral"

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError(f"L must be > 0, got {self.L}")
        if self.N < 64 or self.N % 2 != 0:
            raise ValueError(f"N must be even and >= 64, got {self.N}")
        if self.newton_tol <= 0:
            raise ValueError(f"newton_tol must be > 0, got {self.newton_tol}")
        if self.scheme not in ("spectral", "fd"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def with_(self, **kw) -> "ModelParams":
        d = self.__dict__.copy()
        d.update(kw)
        return ModelParams(**d)


@dataclass(frozen=True)
class GridFunction:
    """A real field sampled on the uniform periodic grid x_i = i*L/N.

    The right endpoint x = L is identified with x = 0 and not stored.
    """

    values: np.ndarray
    L: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ValueError("GridFunction values must be one-dimensional")
        if self.L <= 0:
            raise ValueError(f"L must be > 0, got {self.L}")

    @property
    def N(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return grid(self.L, self.N)

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True)
class Diagnostics:
    """Integral and pointwise diagnostics of a height field.

    mean is mass/L exactly; the rate fields are the exact time derivatives
    of mass and energy under the evolution, evaluated on the current field.
    """

    mean: float
    mass: float
    mass_rate: float
    energy: float
    energy_rate: float
    p_min: float
    p_max: float


def grid(L: float, N: int) -> np.ndarray:
    return np.arange(N) * (L / N)


def quad(values: np.ndarray, L: float) -> float:
    """Trapezoid rule on the periodic grid (equals dx * sum)."""
    values = np.asarray(values)
    return float(values.sum() * (L / values.size))


def l2_norm(values: np.ndarray, L: float) -> float:
    """Continuum L2 norm, sqrt(integral of v^2)."""
    return float(np.sqrt(quad(np.asarray(values) ** 2, L)))


def pi(h, pbar: float):
    """Disjoining pressure pi(h) = h^-3 - h^-4 - pbar."""
    h = np.asarray(h, dtype=float)
    _require_positive(h)
    out = h**-3 - h**-4 - pbar
    return float(out) if out.ndim == 0 else out


def pi_prime(h):
    """d(pi)/dh = h^-5 (4 - 3h); vanishes at h = 4/3."""
    h = np.asarray(h, dtype=float)
    _require_positive(h)
    out = h**-5 * (4.0 - 3.0 * h)
    return float(out) if out.ndim == 0 else out


def pi_second(h):
    """d2(pi)/dh2 = h^-6 (12h - 20); vanishes at h = 5/3."""
    h = np.asarray(h, dtype=float)
    _require_positive(h)
    out = h**-6 * (12.0 * h - 20.0)
    return float(out) if out.ndim == 0 else out


def pi_third(h):
    """d3(pi)/dh3 = h^-7 (120 - 60h)."""
    h = np.asarray(h, dtype=float)
    _require_positive(h)
    out = h**-7 * (120.0 - 60.0 * h)
    return float(out) if out.ndim == 0 else out


def potential(h, pbar: float):
    """Potential U(h) = -1/(2 h^2) + 1/(3 h^3) - pbar*h, with U'(h) = pi(h)."""
    h = np.asarray(h, dtype=float)
    _require_positive(h)
    out = -0.5 * h**-2 + (1.0 / 3.0) * h**-3 - pbar * h
    return float(out) if out.ndim == 0 else out


def _require_positive(h: np.ndarray):
    if np.any(h <= 0):
        raise PositivityError("height must be strictly positive")


def below_floor(values: np.ndarray) -> bool:
    """Flag (never clip) fields that dip under the positivity floor."""
    return bool(np.min(values) < POSITIVITY_FLOOR)


# ---------------------------------------------------------------------------
# periodic derivative operators
#
# Spectral: exact for resolved modes; the Nyquist mode is zeroed for every
# derivative order so that D2 == D1 @ D1 holds as matrices.  That identity
# is what makes the semi-discrete energy law hold to integrator tolerance.
# FD: standard second-order central stencils with periodic wraparound.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def derivative_matrix(N: int, L: float, order: int, scheme: str = "spectral") -> np.ndarray:
    if order < 1:
        raise ValueError("order must be >= 1")
    if scheme == "spectral":
        D1 = _spectral_d1(N, L)
        D = np.eye(N)
        for _ in range(order):
            D = D1 @ D
    elif scheme == "fd":
        dx = L / N
        if order == 1:
            D = _circulant(N, {1: 0.5 / dx, -1: -0.5 / dx})
        elif order == 2:
            D = _circulant(N, {0: -2.0 / dx**2, 1: 1.0 / dx**2, -1: 1.0 / dx**2})
        else:
            D2 = derivative_matrix(N, L, 2, "fd")
            D = derivative_matrix(N, L, order - 2, "fd") @ D2
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    D.setflags(write=False)
    return D


def _spectral_d1(N: int, L: float) -> np.ndarray:
    k = 2.0 * np.pi * np.fft.rfftfreq(N, d=1.0 / N) / L
    mult = 1j * k
    mult[-1] = 0.0  # kill the Nyquist mode
    spec = np.fft.rfft(np.eye(N), axis=0)
    return np.fft.irfft(mult[:, None] * spec, n=N, axis=0)


def _circulant(N: int, stencil: dict) -> np.ndarray:
    D = np.zeros((N, N))
    idx = np.arange(N)
    for off, c in stencil.items():
        D[idx, (idx + off) % N] = c
    return D


def deriv(values: np.ndarray, L: float, order: int = 1, scheme: str = "spectral") -> np.ndarray:
    """Apply the order-th periodic derivative to sampled values."""
    values = np.asarray(values, dtype=float)
    N = values.size
    if scheme == "spectral":
        k = 2.0 * np.pi * np.fft.rfftfreq(N, d=1.0 / N) / L
        mult = (1j * k) ** order
        mult[-1] = 0.0
        return np.fft.irfft(mult * np.fft.rfft(values), n=N)
    return derivative_matrix(N, L, order, scheme) @ values


# ---------------------------------------------------------------------------
# fields and diagnostics
# ---------------------------------------------------------------------------


def pressure_values(h: np.ndarray, params: ModelParams) -> np.ndarray:
    _require_positive(np.asarray(h))
    return pi(h, params.pbar) - deriv(h, params.L, 2, params.scheme)


def pressure_field(h: GridFunction, params: ModelParams) -> GridFunction:
    """p = pi(h) - h_xx on the grid of h."""
    return GridFunction(pressure_values(h.values, params), h.L)


def diagnostics(h: GridFunction, params: ModelParams) -> Diagnostics:
    """Mass, energy, and their exact rates under the evolution.

    dM/dt = gamma * integral(p)  which reduces to gamma * integral(pi(h))
    because the curvature part integrates to zero on the periodic domain;
    dE/dt = -integral(h^3 p_x^2) + gamma * integral(p^2).
    """
    v = h.values
    _require_positive(v)
    L, scheme = params.L, params.scheme
    p = pressure_values(v, params)
    px = deriv(p, L, 1, scheme)
    mass = quad(v, L)
    energy = quad(0.5 * deriv(v, L, 1, scheme) ** 2 + potential(v, params.pbar), L)
    return Diagnostics(
        mean=mass / L,
        mass=mass,
        mass_rate=params.gamma * quad(p, L),
        energy=energy,
        energy_rate=-quad(v**3 * px**2, L) + params.gamma * quad(p * p, L),
        p_min=float(p.min()),
        p_max=float(p.max()),
    )
