from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from ionize3d.free_dynamics import (
    BoundState,
    GaussianState,
    bound_state_eval,
    charge_rhs_exact,
    f_tilde,
    forcing_amplitude,
    forcing_general,
    forcing_regular_part,
    forcing_singular_terms,
    free_evolved_bound_state,
    overlap_Z1,
)

K1 = BoundState(-1 / (4 * math.pi))
K08 = BoundState(-0.8 / (4 * math.pi))


def test_bound_state_constants():
    assert K1.kappa == pytest.approx(1.0, rel=1e-15)
    assert K1.energy == pytest.approx(-1.0, rel=1e-15)
    assert K1.charge == pytest.approx(oracles.SQRT_8PI, rel=1e-15)
    assert K08.norm_by_quadrature() == pytest.approx(1.0, abs=1e-10)


def test_bound_state_rejects_nonnegative_coupling():
    with pytest.raises(ValueError):
        BoundState(0.0)


@pytest.mark.parametrize(
    "state,t,forcing,rhs,overlap",
    [
        (K1, 0.5, oracles.FORCING_K1_T0p5, oracles.RHS_K1_T0p5, oracles.OVERLAP_K1_T0p5),
        (K1, 2.0, oracles.FORCING_K1_T2, oracles.RHS_K1_T2, oracles.OVERLAP_K1_T2),
        (K08, 0.5, oracles.FORCING_K08_T0p5, oracles.RHS_K08_T0p5, oracles.OVERLAP_K08_T0p5),
        (K08, 2.0, oracles.FORCING_K08_T2, oracles.RHS_K08_T2, oracles.OVERLAP_K08_T2),
    ],
)
def test_closed_forms_match_momentum_integrals(state, t, forcing, rhs, overlap):
    assert forcing_amplitude(state, t) == pytest.approx(forcing, rel=1e-12)
    assert charge_rhs_exact(state, t) == pytest.approx(rhs, rel=1e-12)
    assert overlap_Z1(state, t) == pytest.approx(overlap, rel=1e-12)
    assert overlap_Z1(state, t, method="quadrature") == pytest.approx(overlap, rel=1e-9)


def test_singular_split_reassembles_forcing():
    t = np.array([1e-4, 0.01, 0.3, 4.0])
    terms = forcing_singular_terms(K08)
    rebuilt = forcing_regular_part(K08, t) + sum(c * t**b for b, c in terms.items())
    assert np.allclose(rebuilt, forcing_amplitude(K08, t), rtol=1e-12, atol=1e-13)
    # the regular part is O(t) at the origin
    assert abs(forcing_regular_part(K08, 1e-8) - forcing_regular_part(K08, 0.0)) < 1e-6


def test_overlap_at_zero_is_norm():
    assert overlap_Z1(K1, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert overlap_Z1(K1, 0.0, method="quadrature") == pytest.approx(1.0, abs=1e-10)


def test_free_evolution_small_and_large_r():
    r = np.array([0.2, 1.0, 3.0])
    assert np.allclose(free_evolved_bound_state(K1, 0.0, r), bound_state_eval(K1, r))
    # near the origin 4 pi r Psi tends to the forcing-free charge 0 (no singular part)
    psi = free_evolved_bound_state(K1, 1.0, np.array([1e-4, 1e-5]))
    assert np.allclose(psi, forcing_amplitude(K1, 1.0), rtol=1e-3)


def test_free_evolution_large_time_broadcast():
    t = np.array([[1.0], [50.0]])
    r = np.array([0.5, 2.0, 8.0])
    out = free_evolved_bound_state(K1, t, r)
    assert out.shape == (2, 3)
    assert np.all(np.isfinite(out))


@pytest.mark.parametrize("p,expected", [(0.5, oracles.RHS_LAPLACE_K1_P0p5), (1.0, oracles.RHS_LAPLACE_K1_P1), (2.0, oracles.RHS_LAPLACE_K1_P2)])
def test_rhs_laplace_transform(p, expected):
    # the transform of the right-hand side is c times that of the Abel integral; f_tilde is its closed form
    assert f_tilde(p, K1.alpha) == pytest.approx(expected, rel=1e-12)


def test_f_tilde_removable_point_is_finite():
    # s = sqrt(-i p) equal to 4 pi a is a removable point of the unfactored quotient
    p = 1j * (4 * math.pi * K1.alpha) ** 2
    assert np.isfinite(f_tilde(p + 1e-12, K1.alpha))
    with pytest.raises(ZeroDivisionError):
        f_tilde(0.0, K1.alpha)


def test_gaussian_closed_form_and_general_forcing():
    g = GaussianState(1.0)
    assert g.evolved(0.7, 1.3) == pytest.approx(oracles.GAUSS_S1_T0p7_R1p3, rel=1e-12)
    for t in (0.0, 0.4, 3.0):
        assert forcing_general(g.momentum_profile, t, g.k_max) == pytest.approx(complex(g.evolved(t, 0.0)), rel=1e-8)
