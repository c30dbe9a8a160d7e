"""Free propagation of the bound state and the related amplitudes.

Everything here is expressed through ``erfcx(z) = exp(z**2) erfc(z)`` at
``z = kappa * sqrt(i t)`` (first quadrant), where ``kappa = 4 pi |alpha|`` is
the inverse localization length of the bound state. The free Hamiltonian is
``H0 = -Laplacian``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import erfcx

from .grid import TimeGrid
from .laplace_modes import sqrt_branch

SQRT_I = complex(math.sqrt(0.5), math.sqrt(0.5))
SQRT_PI = math.sqrt(math.pi)


class QuadratureError(RuntimeError):
    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class BoundState:
    """Normalized bound state of the point interaction with coupling ``alpha < 0``."""

    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha < 0:
            raise ValueError(f"bound state needs alpha < 0, got {self.alpha}")

    @property
    def kappa(self) -> float:
        return 4.0 * math.pi * abs(self.alpha)

    @property
    def energy(self) -> float:
        return -self.kappa**2

    @property
    def charge(self) -> float:
        return bound_state_charge(self)

    def norm_by_quadrature(self) -> float:
        val, _ = integrate.quad(
            lambda r: 4 * math.pi * r * r * bound_state_eval(self, r) ** 2, 0, np.inf, epsabs=1e-14
        )
        return val


def bound_state_eval(state: BoundState, r):
    """``sqrt(2|alpha|) exp(4 pi alpha r) / r``; undefined at ``r = 0``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("bound state amplitude is singular at r = 0; use the charge instead")
    out = math.sqrt(2 * abs(state.alpha)) * np.exp(-state.kappa * r) / r
    return out if out.ndim else float(out)


def bound_state_charge(state: BoundState) -> float:
    """Coefficient of ``1/(4 pi |x|)`` in the bound state."""
    return 4.0 * math.pi * math.sqrt(2 * abs(state.alpha))


def free_kernel(t, r):
    """Free propagator kernel ``(4 pi i t)**(-3/2) exp(i r**2 / (4 t))``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("free kernel needs t > 0")
    r = np.asarray(r, dtype=float)
    pref = (4 * math.pi * t) ** -1.5 * SQRT_I**-3
    return pref * np.exp(1j * r * r / (4 * t))


def _z(state: BoundState, t):
    return state.kappa * np.sqrt(t) * SQRT_I


def forcing_amplitude(state: BoundState, t):
    """``(exp(-i H0 t) phi_alpha)(0)`` for ``t > 0``.

    Behaves like ``sqrt(2|alpha| / (pi i t))`` as ``t -> 0`` and decays like
    ``t**(-3/2)`` at large ``t``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("forcing amplitude needs t > 0")
    amp = math.sqrt(2 * abs(state.alpha))
    out = amp * (1.0 / (SQRT_PI * SQRT_I * np.sqrt(t)) - state.kappa * erfcx(_z(state, t)))
    return out if out.ndim else complex(out)


def forcing_singular_terms(state: BoundState) -> dict[float, complex]:
    """Coefficients of ``t**-1/2`` and ``t**1/2`` in the small-``t`` expansion of the forcing."""
    amp = math.sqrt(2 * abs(state.alpha))
    k = state.kappa
    return {
        -0.5: amp / (SQRT_PI * SQRT_I),
        0.5: amp * k * k * 2.0 / SQRT_PI * SQRT_I,
    }


def forcing_regular_part(state: BoundState, t):
    """Forcing minus its ``t**-1/2`` and ``t**1/2`` terms; finite at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    amp = math.sqrt(2 * abs(state.alpha))
    b_half = forcing_singular_terms(state)[0.5]
    return -amp * state.kappa * erfcx(_z(state, t)) - b_half * np.sqrt(t)


def charge_rhs_exact(state: BoundState, t):
    """Closed form of ``4 sqrt(pi i) int_0^t f(tau) / sqrt(t - tau) dtau`` for bound-state data.

    Equals ``q_phi * erfcx(kappa sqrt(i t))``, so it starts at the bound-state charge.
    """
    t = np.asarray(t, dtype=float)
    return bound_state_charge(state) * erfcx(_z(state, t))


@dataclass(frozen=True)
class ComplexAmplitudeSeries:
    """Samples on a uniform grid.

    For ``kind == "forcing"``, ``values`` hold the regular part only and
    ``singular`` maps an exponent ``beta`` to the coefficient of ``t**beta``
    that was removed. For ``kind == "rhs"`` the values are the right-hand
    side of the charge equation itself.
    """

    grid: TimeGrid
    values: np.ndarray
    kind: str = "forcing"
    singular: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.count,):
            raise ValueError("values do not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series values must be finite")

    def full_values(self) -> np.ndarray:
        """Regular part plus singular terms; ``inf`` where a negative power hits ``t = 0``."""
        t = self.grid.times
        out = self.values.astype(complex)
        with np.errstate(divide="ignore"):
            for beta, c in self.singular.items():
                out = out + c * np.where(t > 0, t**beta, np.inf if beta < 0 else 0.0)
        return out


def forcing_series(state: BoundState, grid: TimeGrid) -> ComplexAmplitudeSeries:
    return ComplexAmplitudeSeries(
        grid, forcing_regular_part(state, grid.times), "forcing", forcing_singular_terms(state)
    )


def rhs_series(values: np.ndarray, grid: TimeGrid) -> ComplexAmplitudeSeries:
    return ComplexAmplitudeSeries(grid, np.asarray(values, dtype=complex), "rhs")


def free_evolved_bound_state(state: BoundState, t, r):
    """``(exp(-i H0 t) phi_alpha)(r)`` for ``t >= 0`` and ``r > 0``; broadcasts over ``t`` and ``r``."""
    t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
    if np.any(t < 0) or np.any(r <= 0):
        raise ValueError("free evolution of the bound state needs t >= 0 and r > 0")
    k = state.kappa
    out = np.empty(t.shape, dtype=complex)
    at_zero = t == 0
    out[at_zero] = bound_state_eval(state, r[at_zero]) if np.any(at_zero) else 0
    tt, rr = t[~at_zero], r[~at_zero]
    w = rr / (2 * np.sqrt(tt)) / SQRT_I
    z = k * np.sqrt(tt) * SQRT_I
    phase = np.exp(1j * (rr * rr / (4 * tt) - k * k * tt))
    minus = w - z
    # e^{-kr} erfc(w - z), split so that no exponential overflows
    lower = np.where(
        minus.real >= 0,
        erfcx(minus) * phase,
        2 * np.exp(-k * rr) - erfcx(-minus) * phase,
    )
    upper = erfcx(w + z) * phase
    v = np.exp(1j * k * k * tt) / (4 * math.pi * rr) * (np.exp(-k * rr) - 0.5 * (lower + upper))
    out[~at_zero] = bound_state_charge(state) * v
    return out if out.ndim else complex(out)


def overlap_Z1(state: BoundState, t, method: str = "closed"):
    """Autocorrelation ``(phi, exp(-i H0 t) phi)`` of the freely evolving bound state.

    ``method="quadrature"`` integrates the radial momentum integral along
    the ray ``k = exp(-i pi/4) u``, where it is non-oscillatory.
    """
    if method == "closed":
        t = np.asarray(t, dtype=float)
        z = _z(state, t)
        out = (1 + 2 * z * z) * erfcx(z) - 2 * z / SQRT_PI
        return out if out.ndim else complex(out)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if np.ndim(t):
        return np.array([overlap_Z1(state, float(s), method) for s in np.ravel(t)]).reshape(np.shape(t))
    t = float(t)
    b2 = state.kappa**2
    pref = 16 * abs(state.alpha)
    if t == 0:
        val, _ = integrate.quad(lambda k: k * k / (k * k + b2) ** 2, 0, np.inf)
        return complex(pref * val)
    ray = 1 / SQRT_I

    def integrand(u):
        k2 = -1j * u * u
        return pref * k2 * math.exp(-u * u * t) / (k2 + b2) ** 2 * ray

    re, e1 = integrate.quad(lambda u: integrand(u).real, 0, np.inf, epsabs=1e-14, epsrel=1e-12)
    im, e2 = integrate.quad(lambda u: integrand(u).imag, 0, np.inf, epsabs=1e-14, epsrel=1e-12)
    if max(e1, e2) > 1e-8:
        raise QuadratureError("Z1 quadrature did not converge", max(e1, e2))
    return complex(re, im)


def f_tilde(p, alpha0_init: float):
    """Laplace transform of the charge-equation right-hand side for bound-state data.

    Uses the factored form ``4 pi i sqrt(2|a|) / (s (4 pi a - s))`` with
    ``s = sqrt(-i p)``; it equals the unfactored quotient everywhere the
    latter is defined and stays finite where its numerator and denominator
    vanish together.
    """
    if alpha0_init >= 0:
        raise ValueError("f_tilde needs a negative initial coupling")
    p = np.asarray(p, dtype=complex)
    if np.any(p == 0):
        raise ZeroDivisionError("f_tilde has a branch point at p = 0")
    s = np.asarray(sqrt_branch(-1j * p))
    a4 = 4 * math.pi * alpha0_init
    out = 4j * math.pi * math.sqrt(2 * abs(alpha0_init)) / (s * (a4 - s))
    return out if out.ndim else complex(out)


def z2_tilde(p, alpha0_init: float):
    """Laplace-domain factor linking the charge to the survival amplitude."""
    p = np.asarray(p, dtype=complex)
    s = np.asarray(sqrt_branch(-1j * p))
    a4 = 4 * math.pi * alpha0_init
    out = -4 * math.sqrt(2 * math.pi * abs(alpha0_init)) / (a4 - s)
    return out if out.ndim else complex(out)


# --- general radial initial data ------------------------------------------------


def forcing_general(
    psi_hat: Callable[[np.ndarray], np.ndarray],
    t: float,
    k_max: float,
    limit: int = 400,
):
    """``(exp(-i H0 t) Psi)(0)`` from a radial momentum profile ``psi_hat(k)``.

    Computes ``(2 pi**2)**-1 int_0^k_max k**2 psi_hat(k) exp(-i k**2 t) dk`` with
    the substitution ``u = k**2`` and a Fourier-weighted quadrature. ``k_max``
    must lie where ``psi_hat`` is negligible.
    """
    if t < 0:
        raise ValueError("forcing needs t >= 0")
    umax = k_max * k_max
    g = lambda u: math.sqrt(u) * float(np.real(psi_hat(math.sqrt(u)))) / (4 * math.pi**2)
    if t == 0:
        val, err = integrate.quad(g, 0, umax, limit=limit)
        if err > 1e-8 * max(1.0, abs(val)):
            raise QuadratureError("forcing quadrature did not converge", err)
        return complex(val)
    c, e1 = integrate.quad(g, 0, umax, weight="cos", wvar=t, limit=limit)
    s, e2 = integrate.quad(g, 0, umax, weight="sin", wvar=t, limit=limit)
    err = max(e1, e2)
    if err > 1e-8 * max(1.0, abs(c), abs(s)):
        raise QuadratureError("forcing quadrature did not converge", err)
    return complex(c, -s)


@dataclass(frozen=True)
class GaussianState:
    """``Psi(x) = norm * exp(-|x|**2 / (2 sigma**2))``, normalized by default."""

    sigma: float

    @property
    def norm(self) -> float:
        return (math.pi * self.sigma**2) ** -0.75

    def momentum_profile(self, k):
        return self.norm * (2 * math.pi * self.sigma**2) ** 1.5 * np.exp(-0.5 * self.sigma**2 * np.asarray(k) ** 2)

    def evolved(self, t: float, r):
        width = self.sigma**2 + 2j * t
        return self.norm * (self.sigma**2 / width) ** 1.5 * np.exp(-np.asarray(r) ** 2 / (2 * width))

    @property
    def k_max(self) -> float:
        return 12.0 / self.sigma
