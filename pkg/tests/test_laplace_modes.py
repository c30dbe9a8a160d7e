from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from ionize3d.alpha_model import FourierAlpha, NegativeMeanResonant, classify_resonance
from ionize3d.free_dynamics import BoundState
from ionize3d.laplace_modes import (
    ModeTruncation,
    NumericallySingular,
    branch_fit,
    compare_decompositions,
    g_prime,
    initial_coupling,
    mode_data,
    near_resonance,
    positivity_check,
    probe_point,
    scan_imaginary_axis,
    solve_auxiliary,
    solve_modes,
    sqrt_branch,
)

from conftest import ALPHA_NORMALIZED, CANONICAL_A0


def test_sqrt_branch_on_negative_real_axis():
    # the negative real axis maps to the positive imaginary axis, including -0.0 imaginary parts
    assert sqrt_branch(complex(-4.0, -0.0)) == pytest.approx(2j)
    assert sqrt_branch(-4.0 + 0j) == pytest.approx(2j)
    assert sqrt_branch(1j).real > 0


def test_constant_drive_matches_stationary_transform():
    alpha = FourierAlpha.constant(ALPHA_NORMALIZED, omega=2.0)
    state = BoundState(ALPHA_NORMALIZED)
    for p in (0.5, 1.0 + 0.7j, 2.0 - 3.0j):
        sol = solve_modes(alpha, ModeTruncation(8), p)
        assert sol.q0 == pytest.approx(oracles.SQRT_8PI / (p + 1j * state.energy), rel=1e-12)


def test_mode_rows_are_shifted_copies():
    alpha = FourierAlpha(3.0, {0: CANONICAL_A0, 1: 0.05, -1: 0.05})
    trunc = ModeTruncation(6)
    p = 0.4 + 0.2j
    data = mode_data(alpha, trunc, p)
    shifted = mode_data(alpha, trunc, p + 3j)
    # row n at p + i omega equals row n + 1 at p
    assert data.diag[trunc.position(1)] == pytest.approx(shifted.diag[trunc.position(0)], rel=1e-14)
    assert data.rhs[trunc.position(1)] == pytest.approx(shifted.rhs[trunc.position(0)], rel=1e-14)


def test_truncation_convergence():
    alpha = FourierAlpha(10.0, {0: CANONICAL_A0, 1: 0.05, -1: 0.05})
    p = 0.8 + 0.3j
    vals = [solve_modes(alpha, ModeTruncation(M), p).q0 for M in (8, 16, 32, 64)]
    diffs = [abs(vals[i + 1] - vals[i]) for i in range(3)]
    assert diffs[-1] < 1e-10 * abs(vals[-1])
    sol = solve_modes(alpha, ModeTruncation(16), p)
    assert abs(sol.q0 - vals[-1]) <= sol.tail_bound + 1e-13


def test_singular_point_raises():
    alpha = FourierAlpha.constant(ALPHA_NORMALIZED, omega=2.0)
    # the bound-state pole at p = i kappa^2 = i
    with pytest.raises(NumericallySingular):
        solve_modes(alpha, ModeTruncation(4), 1j, cond_limit=1e10)


def test_auxiliary_split_reconstructs_solution():
    alpha = FourierAlpha(3.0, {0: CANONICAL_A0, 1: 0.05, -1: 0.05, 2: 0.02, -2: 0.02})
    trunc = ModeTruncation(20)
    p = 0.3 + 0.1j
    full = solve_modes(alpha, trunc, p).q_modes
    aux = solve_auxiliary(alpha, trunc, p, 0)
    assert np.max(np.abs(aux.reconstruct() - full)) < 1e-12 * np.max(np.abs(full))
    two = solve_auxiliary(alpha, trunc, p, 0, resonant_index=2)
    assert np.max(np.abs(two.reconstruct() - full)) < 1e-12 * np.max(np.abs(full))


def test_branch_fit_recovers_sqrt_coefficient():
    alpha = FourierAlpha(3.0, {0: CANONICAL_A0, 1: 0.05, -1: 0.05})
    fit = branch_fit(alpha, ModeTruncation(64), 0)
    assert fit.relative_residual < 1e-8
    assert fit.arc_residual < 1e-8
    assert abs(fit.d) > 0
    assert fit.g_prime_gap < 1e-6


def test_g_prime_constant_drive_closed_form():
    # uncoupled modes: q_0 = K / ((A - s)(B + s)) with s = sqrt(-i p), so the
    # sqrt(p) coefficient is sqrt(-i) K (B - A) / (A B)**2
    a = ALPHA_NORMALIZED
    alpha = FourierAlpha.constant(CANONICAL_A0, omega=5.0)
    K = 4j * math.pi * math.sqrt(2 * abs(a))
    A, B = 4 * math.pi * a, 4 * math.pi * CANONICAL_A0
    expected = complex(np.sqrt(-1j)) * K * (B - A) / (A * B) ** 2
    assert g_prime(alpha, ModeTruncation(4), a) == pytest.approx(expected, rel=1e-12)
    fit = branch_fit(alpha, ModeTruncation(4), 0, a_init=a)
    assert fit.d == pytest.approx(expected, rel=1e-6)


def test_resonant_drive_has_no_pole():
    e = (4 * math.pi * CANONICAL_A0) ** 2
    alpha = FourierAlpha(e, {0: CANONICAL_A0, 1: 0.05, -1: 0.05})
    rc = classify_resonance(alpha)
    assert isinstance(rc, NegativeMeanResonant) and rc.N == 1
    probe = probe_point(alpha, ModeTruncation(64), 0.0, rc.N)
    assert probe.variation < 10


def test_positive_mean_scan_is_well_conditioned():
    alpha = FourierAlpha(10.0, {0: 0.1, 1: 0.05, -1: 0.05})
    scan = scan_imaginary_axis(alpha, ModeTruncation(32), np.linspace(0, 10, 41, endpoint=False), 1e-6)
    assert scan.max_condition < 1e6
    assert scan.flagged.size == 0


def test_positivity_of_nonnegative_drive():
    rep = positivity_check(FourierAlpha(1.0, {0: 0.1, 1: 0.05, -1: 0.05}))
    assert rep.nonnegative and rep.min_sampled_alpha >= 0
    rep = positivity_check(FourierAlpha(1.0, {0: 0.02, 1: 0.05, -1: 0.05}))
    assert not rep.nonnegative and rep.witness is not None


@pytest.mark.parametrize("detune", [3e-3, -3e-3])
def test_near_resonant_decompositions_agree(detune):
    # (4 pi alpha_0)^2 = omega (1 + detune), just either side of N = 1
    a0 = -math.sqrt(1.0 + detune) / (4 * math.pi)
    alpha = FourierAlpha(1.0, {0: a0, 1: 0.02, -1: 0.02})
    assert near_resonance(alpha) == 1
    chk = compare_decompositions(alpha, ModeTruncation(32))
    assert chk.paired == (chk.single[0], chk.single[0] + 1)
    assert np.max(chk.gaps) < 1e-12
    assert chk.agree


def test_near_resonance_ignores_detuned_drive():
    assert near_resonance(FourierAlpha(10.0, {0: CANONICAL_A0, 1: 0.05, -1: 0.05})) is None
    assert near_resonance(FourierAlpha(1.0, {0: 0.1})) is None


def test_branch_fit_matches_g_prime_for_zero_mean_drive():
    alpha = FourierAlpha(3.0, {1: 0.05, -1: 0.05})
    fit = branch_fit(alpha, ModeTruncation(64), 0)
    assert fit.g_prime is not None
    assert fit.g_prime_gap < 1e-6
