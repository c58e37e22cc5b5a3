"""Fundamental-matrix analysis along steady profiles."""

import numpy as np
import pytest

from ncfilm import floquet, steady2, uniform
from ncfilm.model import ModelParams

PBAR = 0.05


@pytest.fixture(scope="module")
def hump_base():
    params = ModelParams(pbar=PBAR, gamma=0.05, L=40.0, N=128)
    return steady2.solve_second_order(40.0, 1, params)


def test_flat_base_pressure_block_is_a_rotation():
    # constant coefficients make the block an oscillator with
    # q^2 = gamma / H^3; trace and determinant follow in closed form
    params = ModelParams(pbar=PBAR, gamma=0.05, L=40.0, N=64)
    for s in uniform.uniform_states(PBAR):
        base = steady2.as_profile(s.value, params)
        m = floquet.monodromy2(base, params)
        q = np.sqrt(params.gamma / s.value**3)
        assert np.trace(m.B2) == pytest.approx(2.0 * np.cos(q * params.L), abs=1e-8)
        assert np.linalg.det(m.B2) == pytest.approx(1.0, abs=1e-8)


def test_hump_base_blocks_are_volume_preserving(hump_base):
    m2 = floquet.monodromy2(hump_base)
    assert np.linalg.det(m2.B2) == pytest.approx(1.0, abs=1e-8)
    m4 = floquet.monodromy4(hump_base)
    assert np.linalg.det(m4.B4) == pytest.approx(1.0, abs=1e-8)
    # the 2x2 block read from the 4x4 corner agrees with the direct one
    assert np.max(np.abs(m4.B2 - m2.B2)) < 1e-8


def test_multipliers_come_in_reciprocal_pairs(hump_base):
    # the variational system is volume preserving with a reversible
    # structure: every multiplier has a reciprocal partner somewhere
    m4 = floquet.monodromy4(hump_base)
    rho = np.asarray(m4.multipliers4)
    for r in rho:
        assert min(abs(r * s - 1.0) for s in rho) < 1e-6


def test_monodromy_needs_zero_pressure_base(balanced_50):
    with pytest.raises(ValueError):
        floquet.monodromy2(balanced_50)


def test_closure_entries_present_only_on_full_integration(hump_base):
    m2 = floquet.monodromy2(hump_base)
    assert m2.B4 is None and m2.product is None
    m4 = floquet.monodromy4(hump_base)
    assert m4.product == pytest.approx(m4.H3L * m4.H4L)


def test_secondary_scan_narrow_window():
    hits = floquet.secondary_bifurcation_scan(
        PBAR, 0.4, 1, (30.4, 31.5), resolution=0.25
    )
    assert len(hits) == 1
    hit = hits[0]
    assert hit.L == pytest.approx(30.95, abs=0.1)
    assert hit.rho_gap <= floquet.TOL_RHO
    assert hit.located_by in ("sign_change", "abs_minimum")


def test_secondary_scan_empty_window():
    hits = floquet.secondary_bifurcation_scan(
        PBAR, 0.4, 1, (34.0, 36.0), resolution=0.5
    )
    assert hits == []
