"""Flat-state roots, their linear growth rates, and the neutral lengths."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncfilm import model, uniform
from ncfilm.model import ModelParams


def quartic_roots(pbar: float) -> list[float]:
    # pi(h) = 0 with h > 0 is equivalent to pbar h^4 - h + 1 = 0
    r = np.roots([pbar, 0.0, 0.0, -1.0, 1.0])
    real = sorted(float(z.real) for z in r if abs(z.imag) < 1e-9 and z.real > 0)
    return real


def test_roots_match_quartic_oracle():
    states = uniform.uniform_states(0.05)
    assert [s.branch for s in states] == ["minus", "plus"]
    oracle = quartic_roots(0.05)
    assert len(oracle) == 2
    for s, r in zip(states, oracle):
        assert s.value == pytest.approx(r, abs=1e-10)
        assert model.pi(s.value, 0.05) == pytest.approx(0.0, abs=uniform.ROOT_TOL)


def test_root_derivative_data():
    thin, thick = uniform.uniform_states(0.05)
    assert thin.pi_prime == pytest.approx(model.pi_prime(thin.value), rel=1e-12)
    assert thick.pi_prime == pytest.approx(model.pi_prime(thick.value), rel=1e-12)
    assert thin.pi_prime > 0 > thick.pi_prime
    assert thin.stable_k0 == 1 and thick.stable_k0 == -1


def test_root_count_by_offset():
    assert uniform.uniform_states(uniform.PBAR_MAX + 1e-6) == []
    fold = uniform.uniform_states(uniform.PBAR_MAX)
    assert len(fold) >= 1
    assert fold[0].value == pytest.approx(4.0 / 3.0, abs=1e-6)
    only_thin = uniform.uniform_states(0.0)
    assert len(only_thin) == 1
    assert only_thin[0].branch == "minus"
    assert only_thin[0].value == pytest.approx(1.0, abs=1e-12)


@given(st.floats(min_value=1e-4, max_value=float(uniform.PBAR_MAX) - 1e-4))
def test_roots_bracket_the_fold_height(pbar):
    states = uniform.uniform_states(pbar)
    assert len(states) == 2
    thin, thick = states
    assert thin.value < 4.0 / 3.0 < thick.value
    for s in states:
        assert abs(model.pi(s.value, pbar)) <= 10 * uniform.ROOT_TOL


def test_asymptotic_roots_small_offset():
    pbar = 1e-3
    thin_a, thick_a = uniform.uniform_asymptotic(pbar)
    thin, thick = (s.value for s in uniform.uniform_states(pbar))
    assert thin_a == pytest.approx(thin, rel=1e-2)
    assert thick_a == pytest.approx(thick, rel=1e-2)


def test_critical_lengths_re_derived():
    # independent reconstruction: mobility neutral length 2 pi H^1.5 / sqrt(gamma),
    # rigidity neutral length 2 pi / sqrt(-pi'(H+))
    for gamma in (0.05, 0.4):
        params = ModelParams(pbar=0.05, gamma=gamma, L=50.0)
        lengths = uniform.critical_lengths(params)
        thin, thick = quartic_roots(0.05)
        assert lengths.ell_minus_gamma == pytest.approx(
            2.0 * np.pi * thin**1.5 / np.sqrt(gamma), rel=1e-12
        )
        assert lengths.ell_plus_gamma == pytest.approx(
            2.0 * np.pi * thick**1.5 / np.sqrt(gamma), rel=1e-12
        )
        assert lengths.ell_plus_p == pytest.approx(
            2.0 * np.pi / np.sqrt(-model.pi_prime(thick)), rel=1e-12
        )


def test_critical_lengths_without_gain():
    lengths = uniform.critical_lengths(ModelParams(pbar=0.05, gamma=0.0, L=50.0))
    assert lengths.ell_minus_gamma is None
    assert lengths.ell_plus_gamma is None
    assert lengths.ell_plus_p is not None


def test_dispersion_formula_and_neutral_modes():
    params = ModelParams(pbar=0.05, gamma=0.05, L=50.0)
    thin, thick = uniform.uniform_states(0.05)
    for state in (thin, thick):
        q2 = (2.0 * np.pi / params.L) ** 2
        expected = (-(state.value**3) * q2 + params.gamma) * (state.pi_prime + q2)
        assert uniform.dispersion(1, state, params) == pytest.approx(expected, rel=1e-14)

    # the gravest mode is exactly neutral at each critical length
    lengths = uniform.critical_lengths(params)
    at_mg = params.with_(L=lengths.ell_minus_gamma)
    assert abs(uniform.dispersion(1, thin, at_mg)) < 1e-14
    at_pp = ModelParams(pbar=0.05, gamma=0.0, L=uniform.critical_lengths(
        ModelParams(pbar=0.05, gamma=0.0, L=50.0)).ell_plus_p)
    assert abs(uniform.dispersion(1, thick, at_pp)) < 1e-14


def test_transcritical_gain_identity():
    gbar = uniform.gamma_transcritical_threshold(0.05)
    lengths = uniform.critical_lengths(ModelParams(pbar=0.05, gamma=gbar, L=50.0))
    assert lengths.ell_plus_gamma == pytest.approx(2.0 * lengths.ell_plus_p, rel=1e-12)


def test_transcritical_needs_thick_state():
    with pytest.raises(ValueError):
        uniform.gamma_transcritical_threshold(0.2)
