from __future__ import annotations

import math

import numpy as np
import pytest

from ionize3d.alpha_model import FourierAlpha
from ionize3d.charge_solver import solve_charge
from ionize3d.free_dynamics import BoundState, forcing_series
from ionize3d.grid import TimeGrid
from ionize3d.laplace_modes import initial_coupling

ALPHA_NORMALIZED = -1.0 / (4 * math.pi)
CANONICAL_A0 = ALPHA_NORMALIZED - 0.1


def canonical_drive(omega: float = 10.0) -> FourierAlpha:
    return FourierAlpha(omega, {0: CANONICAL_A0, 1: 0.05, -1: 0.05})


def run(alpha: FourierAlpha, h: float, t_end: float, method: str = "fft"):
    state = BoundState(initial_coupling(alpha))
    grid = TimeGrid.span(h, t_end)
    return state, solve_charge(alpha, forcing_series(state, grid), grid, method)


@pytest.fixture(scope="session")
def normalized_state():
    return BoundState(ALPHA_NORMALIZED)


@pytest.fixture(scope="session")
def stationary_run():
    """Constant coupling at the normalized value, T = 20."""
    return run(FourierAlpha.constant(ALPHA_NORMALIZED), 1e-3, 20.0)


@pytest.fixture(scope="session")
def canonical_run():
    """Generic driven system, h = 1e-3, T = 200."""
    alpha = canonical_drive()
    state, traj = run(alpha, 1e-3, 200.0)
    return alpha, state, traj


@pytest.fixture(scope="session")
def positive_run():
    """Drive with alpha(t) >= 0 everywhere, started from the reference bound state."""
    alpha = FourierAlpha(10.0, {0: 0.1, 1: 0.05, -1: 0.05})
    state, traj = run(alpha, 1e-3, 200.0)
    return alpha, state, traj


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
