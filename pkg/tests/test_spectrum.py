"""Linear stability operators, eigenvalue extraction, and curve tracking."""

import numpy as np
import pytest

from ncfilm import model, spectrum as sp, steady2, uniform
from ncfilm.model import ModelParams

from oracles import dispersion_rate

PBAR = 0.05


def test_flat_base_spectrum_matches_dispersion_relation():
    # every grid mode of the operator about a flat state must reproduce
    # the closed-form rate; this pins the whole operator assembly
    params = ModelParams(pbar=PBAR, gamma=0.05, L=50.0, N=64)
    for state in uniform.uniform_states(PBAR):
        base = steady2.as_profile(state.value, params)
        spec = sp.spectrum(base, params)
        eigs = np.sort(spec.eigenvalues.real)[::-1]
        rates = sorted(
            (dispersion_rate(k, state.value, params.L, params.gamma)
             for k in range(-params.N // 2 + 1, params.N // 2 + 1)),
            reverse=True,
        )
        for lam, rate in zip(eigs[:10], rates[:10]):
            assert lam == pytest.approx(rate, rel=1e-6, abs=1e-12)


def test_jacobian_matches_linearized_operator_on_steady_base(params128, zero_pressure_50):
    base = steady2.solve_second_order(50.0, 1, params128)
    J = sp.jacobian_matrix(base.h.values, params128)
    Lop = sp.linearized_operator(base, params128)
    assert np.max(np.abs(J - Lop)) < 1e-6


def test_jacobian_against_finite_difference_of_rhs(params128):
    # independent check: directional derivative of the nonlinear rhs
    from ncfilm import evolve

    rng = np.random.default_rng(7)
    base = steady2.solve_second_order(50.0, 1, params128).h.values
    v = rng.standard_normal(base.size)
    v /= np.max(np.abs(v))
    J = sp.jacobian_matrix(base, params128)
    eps = 1e-6
    fd = (evolve.rhs(base + eps * v, params128) - evolve.rhs(base - eps * v, params128)) / (2 * eps)
    assert np.max(np.abs(J @ v - fd)) < 1e-4 * max(1.0, np.max(np.abs(fd)))


def test_translational_mode_is_detected(zero_pressure_50, params256):
    spec = sp.spectrum(zero_pressure_50, params256)
    idx = spec.translational_index
    assert idx is not None
    assert abs(spec.eigenvalues[idx]) < 1e-6
    # the flagged eigenfunction is the base slope up to normalization
    dh = model.deriv(zero_pressure_50.h.values, params256.L, 1)
    mode = spec.eigenfunctions[:, idx].real
    dh = dh / model.l2_norm(dh, params256.L)
    mode = mode / model.l2_norm(mode, params256.L)
    overlap = abs(model.quad(mode * dh, params256.L))
    assert overlap == pytest.approx(1.0, abs=1e-5)


def test_gamma_zero_spectrum_is_real(params256):
    params = params256.with_(gamma=0.0)
    base = steady2.solve_second_order(50.0, 1, params)
    spec = sp.spectrum(base, params)
    assert np.max(np.abs(spec.eigenvalues.imag)) <= 1e-7


def test_balanced_state_keeps_complex_pair(balanced_50, params128):
    spec = sp.spectrum(balanced_50, params128)
    lead = spec.dominant
    assert lead is not None
    assert lead.real == pytest.approx(0.001712, abs=3e-4)
    assert abs(lead.imag) == pytest.approx(0.001324, abs=3e-4)
    assert sp.leading_pair_is_complex(balanced_50, params128)


def test_spectrum_eigen_count_and_sorting(zero_pressure_50, params256):
    spec = sp.spectrum(zero_pressure_50, params256, n_eigs=12)
    assert spec.eigenvalues.size == 12
    re = spec.eigenvalues.real
    assert all(a >= b - 1e-14 for a, b in zip(re, re[1:]))


def test_track_eigenvalues_finds_hopf_of_pattern_state():
    # the one-hump state at L = 29.2 crosses to oscillation as the gain
    # drops through the upper critical value
    params = ModelParams(pbar=PBAR, gamma=0.05, L=29.2, N=128)

    def family(g: float) -> "steady2.SteadyProfile":
        return steady2.solve_second_order(29.2, 1, params.with_(gamma=g))

    track = sp.track_eigenvalues(family, "gamma", (0.035, 0.047), 0.002, params, n_track=4)
    hopfs = [e for e in track.events if e.kind == "hopf"]
    assert len(hopfs) == 1
    assert hopfs[0].param_value == pytest.approx(0.0409, abs=0.001)
    assert track.curves.shape[1] == 4
    assert track.param[0] == pytest.approx(0.035)


def test_bisect_classifier_contract():
    calls = []

    def classifier(x: float) -> bool:
        calls.append(x)
        return x >= 0.3333

    lo, hi = sp.bisect_classifier(classifier, 0.0, 1.0, tol=1e-4)
    assert hi - lo <= 1e-4
    assert lo < 0.3333 <= hi


def test_zero_tol_scales_with_resolution():
    p64 = ModelParams(pbar=PBAR, gamma=0.05, L=50.0, N=64)
    p256 = p64.with_(N=256)
    assert sp.zero_tol(p64) >= sp.zero_tol(p256)
