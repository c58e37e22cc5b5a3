"""Zero- and constant-pressure steady states and their phase-plane backbone."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncfilm import model, steady2, uniform
from ncfilm.model import ModelParams

from oracles import ode_period

PBAR = 0.05


def thin_thick():
    return tuple(s.value for s in uniform.uniform_states(PBAR))


def test_conjugate_height_equal_potential():
    thin, thick = thin_thick()
    for h_min in (1.2, 1.5, 2.0):
        conj = steady2.conjugate_height(h_min, PBAR)
        assert conj > thick
        assert model.potential(conj, PBAR) == pytest.approx(
            model.potential(h_min, PBAR), abs=1e-11
        )


def test_homoclinic_height_hits_saddle_level():
    thin, thick = thin_thick()
    peak = steady2.homoclinic_height(PBAR)
    assert peak > thick
    assert model.potential(peak, PBAR) == pytest.approx(
        model.potential(thin, PBAR), abs=1e-11
    )


@pytest.mark.parametrize("h_min", [1.3, 1.6, 2.0])
def test_period_against_ode_shooting(h_min):
    ell = steady2.period(h_min, PBAR)
    assert ell == pytest.approx(ode_period(h_min, PBAR), rel=1e-6)


def test_period_grows_toward_homoclinic():
    thin, thick = thin_thick()
    samples = np.linspace(thin + 0.05, thick - 0.05, 8)
    periods = [steady2.period(float(h), PBAR) for h in samples]
    # loops hugging the center beat at the harmonic frequency; the
    # divergence toward the saddle is logarithmic, so it shows up as a
    # steady climb rather than a blowup at this distance
    q0 = np.sqrt(-model.pi_prime(thick))
    assert periods[-1] == pytest.approx(2.0 * np.pi / q0, rel=1e-2)
    assert all(a > b for a, b in zip(periods, periods[1:]))
    assert periods[0] > 1.15 * periods[-1]


def test_orbit_for_period_round_trip():
    # the quadrature resolves periods up to ~104.6 at this offset before
    # the saddle passage runs out of floating-point room; inversion
    # accuracy decays with the logarithmic flattening near that edge
    for ell, rel in ((30.0, 1e-9), (45.0, 1e-9), (70.0, 1e-8), (100.0, 1e-5)):
        orb = steady2.orbit_for_period(ell, PBAR)
        assert orb.period == pytest.approx(ell, rel=rel)
        assert steady2.period(orb.h_min, PBAR) == pytest.approx(ell, rel=rel)


def test_orbit_mean_matches_profile_mean():
    params = ModelParams(pbar=PBAR, gamma=0.0, L=50.0, N=256)
    prof = steady2.solve_second_order(50.0, 1, params)
    orb = steady2.orbit_for_period(50.0, PBAR)
    assert prof.mean == pytest.approx(steady2.orbit_mean(orb.h_min, PBAR), rel=1e-8)


def test_solve_second_order_zero_pressure_residual():
    params = ModelParams(pbar=PBAR, gamma=0.05, L=50.0, N=256)
    prof = steady2.solve_second_order(50.0, 1, params)
    assert prof.order == "second"
    assert prof.k_periods == 1
    h = prof.h.values
    res = model.deriv(h, 50.0, 2) - model.pi(h, PBAR)
    assert np.max(np.abs(res)) < 1e-9
    assert np.max(np.abs(prof.pressure.values)) < 1e-9
    assert prof.p0 == 0.0


def test_solve_second_order_multi_period():
    params = ModelParams(pbar=PBAR, gamma=0.0, L=60.0, N=256)
    prof = steady2.solve_second_order(60.0, 2, params)
    assert prof.k_periods == 2
    h = prof.h.values
    # two exact copies of the half-domain profile
    assert np.max(np.abs(h - np.roll(h, params.N // 2))) < 1e-8
    single = steady2.solve_second_order(30.0, 1, params.with_(L=30.0, N=128))
    assert h.min() == pytest.approx(single.h.values.min(), abs=1e-8)


def test_solve_second_order_needs_room():
    from ncfilm.model import ConvergenceError

    lengths = uniform.critical_lengths(ModelParams(pbar=PBAR, gamma=0.0, L=50.0))
    short = lengths.ell_plus_p - 0.5
    with pytest.raises(ConvergenceError):
        steady2.solve_second_order(short, 1, ModelParams(pbar=PBAR, gamma=0.0, L=short))


def test_constant_pressure_profile_offsets_the_level():
    params = ModelParams(pbar=PBAR, gamma=0.05, L=40.0, N=256)
    br = steady2.constant_pressure_branch(40.0, PBAR, (-0.002, 0.002))
    assert br.parameter == "P0"
    assert len(br.points) > 5
    ps = [p.param for p in br.points]
    assert min(ps) >= -0.002 - 1e-9 and max(ps) <= 0.002 + 1e-9
    # pressure really is constant on these states: p_min == p_max == P0
    for pt in br.points:
        assert pt.p_max - pt.p_min < 1e-9
        assert pt.p_min == pytest.approx(pt.param, abs=1e-9)


def test_mean_branch_is_ordered_and_consistent():
    br = steady2.mean_branch((29.0, 60.0), 1, PBAR, n_points=12)
    assert br.parameter == "L"
    params = [p.param for p in br.points]
    assert params == sorted(params)
    for pt in br.points[::4]:
        orb = steady2.orbit_for_period(pt.param, PBAR)
        assert pt.mean == pytest.approx(steady2.orbit_mean(orb.h_min, PBAR), rel=1e-8)
        assert pt.h_min == pytest.approx(orb.h_min, rel=1e-6)


def test_mean_branch_k_copies_shift_onset():
    br2 = steady2.mean_branch((2 * 28.4 + 0.4, 80.0), 2, PBAR, n_points=6)
    for pt in br2.points:
        orb = steady2.orbit_for_period(pt.param / 2.0, PBAR)
        assert pt.mean == pytest.approx(steady2.orbit_mean(orb.h_min, PBAR), rel=1e-8)


def test_parabolic_bound_tracks_profile_mean():
    # the closed-form droplet bound sits under the true mean and tightens
    # as the domain grows
    params = ModelParams(pbar=PBAR, gamma=0.0, L=60.0, N=512)
    prof = steady2.solve_second_order(60.0, 1, params)
    _, bound = steady2.parabolic_approximation(60.0, PBAR)
    thin, _ = thin_thick()
    assert prof.mean > bound > thin
    gap_60 = prof.mean - bound
    params2 = params.with_(L=100.0, N=1024)
    prof2 = steady2.solve_second_order(100.0, 1, params2)
    _, bound2 = steady2.parabolic_approximation(100.0, PBAR)
    assert prof2.mean - bound2 < gap_60


def test_as_profile_accepts_flat_level():
    params = ModelParams(pbar=PBAR, gamma=0.05, L=50.0, N=64)
    prof = steady2.as_profile(2.2246387546429327, params)
    assert prof.order == "uniform"
    assert np.allclose(prof.h.values, 2.2246387546429327)


@settings(deadline=None, max_examples=20)
@given(st.floats(min_value=1.15, max_value=2.1))
def test_conjugate_is_involution_free_bracket(h_min):
    # conjugate height always lands beyond the thick root, never below
    conj = steady2.conjugate_height(h_min, PBAR)
    thin, thick = thin_thick()
    assert conj >= thick - 1e-9
    assert steady2.period(h_min, PBAR) > 0
