from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from ionize3d.alpha_model import FourierAlpha
from ionize3d.charge_solver import (
    C_KERNEL,
    TailDominates,
    abel_weights,
    apriori_bound,
    charge_rhs,
    convergence_study,
    laplace_of_trajectory,
    laplace_samples,
    power_weights,
    solve_charge,
)
from ionize3d.free_dynamics import BoundState, charge_rhs_exact, forcing_series, rhs_series
from ionize3d.grid import TimeGrid

from conftest import ALPHA_NORMALIZED, canonical_drive, run


@pytest.mark.parametrize("beta", [-0.5, 0.0, 0.5, 1.5])
def test_power_weights_integrate_linear_functions_exactly(beta):
    h, n = 0.01, 50
    w = power_weights(h, n, beta)
    t = h * np.arange(n)
    for g, exact in (
        (np.ones(n), lambda T: T ** (beta + 1) / (beta + 1)),
        (t, lambda T: T ** (beta + 2) / ((beta + 1) * (beta + 2))),
    ):
        # int_0^T (T - s)^beta g(s) ds for g = 1 and g = s
        approx = w.apply(g.astype(complex)).real
        assert np.allclose(approx[1:], exact(t[1:]), rtol=1e-12, atol=1e-14)


def test_weight_row_matches_apply():
    w = abel_weights(TimeGrid(0.1, 20))
    phi = np.exp(1j * np.arange(20) * 0.3)
    for j in (1, 7, 19):
        assert w.row(j) @ phi[: j + 1] == pytest.approx(w.apply(phi)[j], abs=1e-13)


def test_rhs_from_split_forcing_matches_closed_form(normalized_state):
    grid = TimeGrid.span(1e-3, 5.0)
    R = charge_rhs(forcing_series(normalized_state, grid))
    exact = charge_rhs_exact(normalized_state, grid.times)
    assert np.max(np.abs(R - exact)) / normalized_state.charge < 1e-5


def test_stationary_solution(stationary_run):
    state, traj = stationary_run
    exact = state.charge * np.exp(-1j * state.energy * traj.times)
    assert np.max(np.abs(traj.q - exact)) / state.charge < 1e-5


def test_fft_and_direct_marches_agree():
    alpha = canonical_drive()
    _, a = run(alpha, 1e-2, 5.0, "fft")
    _, b = run(alpha, 1e-2, 5.0, "direct")
    assert np.max(np.abs(a.q - b.q)) < 1e-12


def test_prefix_of_longer_run_is_bitwise_identical():
    alpha = canonical_drive()
    _, long = run(alpha, 1e-2, 10.0)
    _, short = run(alpha, 1e-2, 3.0)
    assert np.array_equal(long.q[: short.q.size], short.q)


def test_zero_forcing_gives_zero_charge():
    grid = TimeGrid.span(1e-3, 2.0)
    traj = solve_charge(canonical_drive(), rhs_series(np.zeros(grid.count), grid), grid)
    assert np.max(np.abs(traj.q)) == 0.0


def test_residual_reported(canonical_run):
    _, _, traj = canonical_run
    assert traj.residual_norm < 1e-10


def test_apriori_bound_holds(canonical_run):
    alpha, state, traj = canonical_run
    bound = apriori_bound(alpha, state)
    assert bound.rate > 0
    assert bound.holds(traj)
    assert bound.constant >= abs(traj.q[0])


def test_manufactured_solution_second_order():
    alpha = FourierAlpha(4.0, {0: -0.2, 1: 0.1, -1: 0.1})
    T = 1.0

    def exact_rhs(t):
        if t == 0:
            return 1.0 + 0j
        f = lambda s: alpha(s) * math.exp(-s)
        re, _ = integrate.quad(f, 0, t, weight="alg", wvar=(0, -0.5), epsabs=1e-14, epsrel=1e-13)
        return math.exp(-t) + C_KERNEL * re

    def forcing(grid):
        return rhs_series(np.array([exact_rhs(t) for t in grid.times]), grid)

    grids = [TimeGrid.span(h, T) for h in (4e-3, 2e-3, 1e-3)]
    rep = convergence_study(alpha, forcing, grids, reference=lambda t: np.exp(-t))
    assert rep.monotone
    assert rep.observed_order >= 1.9


def test_laplace_samples_of_smooth_function():
    h = 1e-3
    t = np.arange(0, 60 + h / 2, h)
    p = 0.7 + 0.3j
    val = laplace_samples(h, np.exp(-t), p)
    assert val == pytest.approx(1 / (1 + p), rel=1e-9)


def test_laplace_samples_of_sqrt_singularity():
    h = 1e-3
    t = np.arange(0, 80 + h / 2, h)
    p = 1.0
    val = laplace_samples(h, np.sqrt(t) * np.exp(-t), p)
    assert val == pytest.approx(math.gamma(1.5) / (1 + p) ** 1.5, rel=1e-7)


def test_laplace_of_trajectory_tail_guard(stationary_run):
    _, traj = stationary_run
    # |q| does not decay, so a slowly damped transform is tail dominated
    with pytest.raises(TailDominates):
        laplace_of_trajectory(traj, 0.01)
    val = laplace_of_trajectory(traj, 2.0)
    state = BoundState(ALPHA_NORMALIZED)
    assert val.value == pytest.approx(state.charge / (2.0 + 1j * state.energy), rel=1e-5)
