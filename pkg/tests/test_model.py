"""Grid primitives, the pressure law, and the flux-balance identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncfilm.model import (
    GridFunction,
    ModelParams,
    deriv,
    derivative_matrix,
    diagnostics,
    grid,
    l2_norm,
    pi,
    pi_prime,
    potential,
    pressure_values,
    quad,
)

heights = st.floats(min_value=0.2, max_value=8.0, allow_nan=False)
pbars = st.floats(min_value=0.0, max_value=27.0 / 256.0, allow_nan=False)


def random_film(rng, N=128, L=40.0, n_modes=5, base=2.0, amp=0.5):
    """Smooth positive periodic profile with a handful of harmonics."""
    x = grid(L, N)
    h = np.full(N, base)
    for k in range(1, n_modes + 1):
        h += amp / k**2 * (
            rng.standard_normal() * np.cos(2 * np.pi * k * x / L)
            + rng.standard_normal() * np.sin(2 * np.pi * k * x / L)
        )
    return GridFunction(np.maximum(h, 0.3), L)


def test_grid_spacing_and_endpoint():
    x = grid(10.0, 64)
    assert x[0] == 0.0
    assert x.size == 64
    d = np.diff(x)
    assert np.allclose(d, 10.0 / 64)
    # periodic convention: the right endpoint L is the image of x = 0
    assert x[-1] == pytest.approx(10.0 - 10.0 / 64)


def test_quad_constant_and_mode():
    N, L = 128, 7.0
    assert quad(np.ones(N), L) == pytest.approx(L)
    x = grid(L, N)
    assert quad(np.cos(2 * np.pi * x / L), L) == pytest.approx(0.0, abs=1e-14)


def test_l2_norm_of_unit_mode():
    N, L = 256, 13.0
    x = grid(L, N)
    v = np.sqrt(2.0 / L) * np.cos(2 * np.pi * x / L)
    assert l2_norm(v, L) == pytest.approx(1.0, rel=1e-12)


@given(h=heights, pbar=pbars)
def test_pi_is_potential_slope(h, pbar):
    # the sign convention makes the gain-free flow dissipate the energy
    eps = 1e-6 * max(h, 1.0)
    dU = (potential(h + eps, pbar) - potential(h - eps, pbar)) / (2 * eps)
    assert pi(h, pbar) == pytest.approx(dU, rel=5e-5, abs=5e-8)


@given(h=heights)
def test_pi_prime_matches_difference_quotient(h):
    eps = 1e-6 * max(h, 1.0)
    dPi = (pi(h + eps, 0.05) - pi(h - eps, 0.05)) / (2 * eps)
    assert pi_prime(h) == pytest.approx(dPi, rel=5e-5, abs=5e-8)


def test_pi_root_structure_at_default_offset():
    # cubic-side shape: negative at small h once past the h^-4 wall,
    # crossing up through the thin root and down through the thick one
    assert pi(1.0641081184501278, 0.05) == pytest.approx(0.0, abs=1e-12)
    assert pi(2.2246387546429310, 0.05) == pytest.approx(0.0, abs=1e-12)
    assert pi(1.5, 0.05) > 0
    assert pi(3.5, 0.05) < 0


@pytest.mark.parametrize("scheme", ["spectral", "fd"])
@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_deriv_differentiates_low_mode(scheme, order):
    N, L = 128, 11.0
    x = grid(L, N)
    q = 2 * np.pi * 3 / L
    v = np.sin(q * x)
    got = deriv(v, L, order, scheme)
    phase = {0: np.sin, 1: np.cos, 2: lambda y: -np.sin(y), 3: lambda y: -np.cos(y)}
    want = q**order * phase[order % 4](q * x)
    tol = 1e-9 * max(1.0, q**order) if scheme == "spectral" else 5e-2 * q**order
    assert np.max(np.abs(got - want)) < tol


@pytest.mark.parametrize("scheme", ["spectral", "fd"])
def test_derivative_matrix_matches_deriv(scheme, rng):
    # agreement is promised for band-limited input; at the Nyquist mode the
    # matrix and transform forms may differ by convention
    N, L = 64, 9.0
    v = random_film(rng, N=N, L=L, n_modes=8).values
    for order in (1, 2):
        D = derivative_matrix(N, L, order, scheme)
        assert np.allclose(D @ v, deriv(v, L, order, scheme), atol=1e-9)


@pytest.mark.parametrize("scheme", ["spectral", "fd"])
def test_deriv_annihilates_constants(scheme):
    v = np.full(96, 3.7)
    for order in (1, 2, 3, 4):
        assert np.max(np.abs(deriv(v, 17.0, order, scheme))) < 1e-11


def test_pressure_of_flat_state_is_pi():
    params = ModelParams(pbar=0.05, gamma=0.05, L=30.0, N=128)
    h = np.full(128, 1.8)
    p = pressure_values(h, params)
    assert np.allclose(p, pi(1.8, 0.05), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_mass_rate_identity(seed):
    # conserved flux integrates to zero around the period, so the total
    # mass changes only through the non-conserved gain term
    rng = np.random.default_rng(seed)
    params = ModelParams(pbar=0.05, gamma=0.07, L=40.0, N=128)
    h = random_film(rng)
    d = diagnostics(h, params)
    p = pressure_values(h.values, params)
    assert d.mass_rate == pytest.approx(params.gamma * quad(p, h.L), rel=1e-10, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_energy_rate_identity(seed):
    # dissipation through the mobility against production by the gain term
    rng = np.random.default_rng(seed)
    params = ModelParams(pbar=0.05, gamma=0.03, L=35.0, N=128)
    h = random_film(rng, L=params.L)
    d = diagnostics(h, params)
    p = pressure_values(h.values, params)
    px = deriv(p, h.L, 1, params.scheme)
    expected = -quad(h.values**3 * px**2, h.L) + params.gamma * quad(p * p, h.L)
    assert d.energy_rate == pytest.approx(expected, rel=1e-8, abs=1e-10)


def test_energy_value_matches_quadrature(rng):
    params = ModelParams(pbar=0.05, gamma=0.05, L=40.0, N=128)
    h = random_film(rng)
    d = diagnostics(h, params)
    hx = deriv(h.values, h.L, 1, params.scheme)
    expected = quad(0.5 * hx**2 + potential(h.values, params.pbar), h.L)
    assert d.energy == pytest.approx(expected, rel=1e-10)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(L=-1.0)
    with pytest.raises(ValueError):
        ModelParams(N=63)
    with pytest.raises(ValueError):
        ModelParams(N=62)
    with pytest.raises(ValueError):
        ModelParams(scheme="dg")
    p = ModelParams(gamma=-0.01)  # loss-dominated side is admissible
    assert p.gamma == -0.01


def test_with_replaces_fields():
    p = ModelParams()
    q = p.with_(L=60.0, gamma=0.2)
    assert (q.L, q.gamma, q.pbar) == (60.0, 0.2, p.pbar)
    assert p.L == 50.0
