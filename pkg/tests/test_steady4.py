"""States with genuinely varying pressure and their continuation."""

import numpy as np
import pytest

from ncfilm import model, steady2, steady4, uniform
from ncfilm.model import ConvergenceError, ModelParams

PBAR = 0.05


def full_residuals(prof):
    """Max-norm residuals of both governing relations, recomputed here."""
    p = prof.params
    h = prof.h.values
    P = prof.pressure.values
    flux = model.deriv(h**3 * model.deriv(P, p.L, 1, p.scheme), p.L, 1, p.scheme)
    r1 = flux + p.gamma * P
    r2 = P - (model.pi(h, p.pbar) - model.deriv(h, p.L, 2, p.scheme))
    return np.max(np.abs(r1)), np.max(np.abs(r2))


def test_balanced_state_satisfies_both_equations(balanced_50):
    r1, r2 = full_residuals(balanced_50)
    assert r1 < 1e-7
    assert r2 < 1e-8
    assert balanced_50.order == "fourth"


def test_balanced_state_pressure_integrates_to_zero(balanced_50):
    # stationarity forces the net non-conserved flux to vanish
    p = balanced_50.params
    assert abs(model.quad(balanced_50.pressure.values, p.L)) < 1e-9


def test_balanced_state_straddles_the_thick_level(balanced_50):
    thin, thick = (s.value for s in uniform.uniform_states(PBAR))
    h = balanced_50.h.values
    assert h.min() < thick < h.max()
    assert balanced_50.mean > thin
    p = balanced_50.pressure.values
    assert p.min() < 0 < p.max()


def test_thick_family_exists_below_its_neutral_length():
    params = ModelParams(pbar=PBAR, gamma=0.4, L=32.0, N=128)
    prof = steady4.fourth_state_at(32.0, params, branch="plus")
    assert prof.order == "fourth"
    thin, thick = (s.value for s in uniform.uniform_states(PBAR))
    assert abs(prof.mean - thick) < 0.5
    r1, r2 = full_residuals(prof)
    assert r1 < 1e-6 and r2 < 1e-7


def test_two_hump_family():
    params = ModelParams(pbar=PBAR, gamma=0.4, L=24.0, N=128)
    prof = steady4.fourth_state_at(24.0, params, branch="minus", k=2)
    h = prof.h.values
    assert np.max(np.abs(h - np.roll(h, params.N // 2))) < 1e-6


def test_gamma_zero_is_rejected():
    params = ModelParams(pbar=PBAR, gamma=0.0, L=40.0, N=64)
    seed = steady2.solve_second_order(40.0, 1, params)
    with pytest.raises(ValueError):
        steady4.solve_fourth_order(seed, params)


def test_target_outside_family_is_refused():
    params = ModelParams(pbar=PBAR, gamma=0.05, L=20.0, N=128)
    with pytest.raises(ConvergenceError):
        steady4.fourth_state_at(20.0, params, branch="minus")


def test_seed_from_uniform_is_small_deviation():
    params = ModelParams(pbar=PBAR, gamma=0.05, L=40.0, N=128)
    state = uniform.uniform_states(PBAR)[0]
    seed = steady4.seed_fourth_from_uniform(state, 1, params, amplitude=5e-3)
    assert np.max(np.abs(seed.h.values - state.value)) < 0.1
    r1, r2 = full_residuals(seed)
    assert r1 < 1e-6 and r2 < 1e-7


def test_continue_branch_in_length():
    # seeded near the thick-state end the family walks down in L and
    # terminates where its pressure dies on the constant-pressure states
    params = ModelParams(pbar=PBAR, gamma=0.4, L=32.5, N=128)
    seed = steady4.fourth_state_at(32.5, params, branch="minus")
    br = steady4.continue_branch(seed, "L", (30.0, 32.9))
    assert br.parameter == "L"
    assert len(br.points) >= 4
    ps = [p.param for p in br.points]
    assert min(ps) < 31.0
    assert max(p.p_norm for p in br.points) > 1e-3
    assert not br.truncated
    assert any(a.kind == "secondary_bif" for a in br.annotations)


def test_continue_branch_in_gain():
    params = ModelParams(pbar=PBAR, gamma=0.05, L=40.0, N=128)
    seed = steady4.fourth_state_at(40.0, params, branch="minus")
    br = steady4.continue_branch(seed, "gamma", (0.04, 0.1))
    assert br.parameter == "gamma"
    assert len(br.points) >= 3
    pts = sorted(br.points, key=lambda p: p.param)
    assert pts[-1].param > 0.09
    assert all(p.p_norm > 0 for p in pts)
    assert not br.truncated


def test_continue_branch_rejects_unknown_parameter(balanced_50):
    with pytest.raises(ValueError):
        steady4.continue_branch(balanced_50, "pbar", (0.01, 0.09))
