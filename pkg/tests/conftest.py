"""Shared fixtures: parameter sets and a few expensive steady states.

Session scope keeps the slow Newton walks to one evaluation per run;
everything downstream treats the returned objects as read-only.
"""

from __future__ import annotations

import numpy as np
import pytest

from ncfilm import steady2, steady4
from ncfilm.model import ModelParams


@pytest.fixture(scope="session")
def params128() -> ModelParams:
    return ModelParams(pbar=0.05, gamma=0.05, L=50.0, N=128, scheme="spectral")


@pytest.fixture(scope="session")
def params256() -> ModelParams:
    return ModelParams(pbar=0.05, gamma=0.05, L=50.0, N=256, scheme="spectral")


@pytest.fixture(scope="session")
def zero_pressure_50(params256):
    return steady2.solve_second_order(50.0, 1, params256)


@pytest.fixture(scope="session")
def balanced_50(params128):
    return steady4.fourth_state_at(50.0, params128, branch="minus")


@pytest.fixture(scope="session")
def balanced_40():
    params = ModelParams(pbar=0.05, gamma=0.05, L=40.0, N=128, scheme="spectral")
    return steady4.fourth_state_at(40.0, params, branch="minus")


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20260816)
