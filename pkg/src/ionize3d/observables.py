"""Survival amplitude, wavefunction, ball probability and power-law fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft, optimize
from scipy.integrate import cumulative_trapezoid
from scipy.special import erf, erfc

from .charge_solver import ChargeTrajectory, _convolve, fft_workers, padded_length, power_weights
from .free_dynamics import (
    BoundState,
    bound_state_eval,
    forcing_regular_part,
    forcing_singular_terms,
    free_evolved_bound_state,
    overlap_Z1,
)

SQRT_PI = math.sqrt(math.pi)
# (4 pi i)**(-3/2) with the principal branch
KERNEL_PREFACTOR = (4 * math.pi) ** -1.5 * complex(math.cos(-0.75 * math.pi), math.sin(-0.75 * math.pi))


class ObservableError(RuntimeError):
    pass


class WindowTooNoisy(ObservableError):
    pass


# --- survival ------------------------------------------------------------------


@dataclass(frozen=True)
class SurvivalSeries:
    times: np.ndarray
    theta: np.ndarray
    z1: np.ndarray
    charge_part: np.ndarray

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.theta)


def _require_bound_state_run(traj: ChargeTrajectory) -> None:
    if traj.forcing_kind != "forcing":
        raise ObservableError("observables need a trajectory driven by the bound-state forcing")


def survival(traj: ChargeTrajectory, state: BoundState, tol: float = 1e-3) -> SurvivalSeries:
    """``theta(t) = Z1(t) + i int_0^t q(tau) f(t - tau) dtau``.

    ``f`` is the forcing amplitude itself: ``(exp(-i H0 s) phi)(0)`` is what
    the bound state sees of the free kernel. Its ``s**-1/2`` and ``s**1/2``
    terms go through product weights, the bounded rest through the trapezoid
    rule.
    """
    _require_bound_state_run(traj)
    grid = traj.grid
    t = grid.times
    q = traj.q
    sing = forcing_singular_terms(state)
    conv = np.zeros(grid.count, dtype=complex)
    for beta, coef in sing.items():
        conv += coef * power_weights(grid.h, padded_length(grid.count) + 1, beta).apply(q)
    reg = forcing_regular_part(state, t)
    trap = _convolve(q, reg, grid.count)
    # trapezoid end corrections: half weight at tau = 0 and tau = t
    trap = trap - 0.5 * (q[0] * reg + q * reg[0])
    conv += grid.h * trap
    conv[0] = 0.0
    z1 = overlap_Z1(state, t)
    theta = z1 + 1j * conv
    if np.max(np.abs(theta)) > 1 + 10 * tol:
        raise ObservableError(f"|theta| reached {np.max(np.abs(theta)):.6f} > 1")
    return SurvivalSeries(t, theta, z1, 1j * conv)


# --- wavefunction --------------------------------------------------------------


_SERIES_RADIUS = 0.2
# Maclaurin coefficients of erf; 12 terms reach round-off for |z| <= 0.2
_ERF_SERIES = [2 / math.sqrt(math.pi) * (-1) ** n / (math.factorial(n) * (2 * n + 1)) for n in range(12)]


def _erf(z: np.ndarray) -> np.ndarray:
    """Complex ``erf``; a power series near the origin, where it is much cheaper than scipy's."""
    out = np.empty(z.shape, dtype=complex)
    near = np.abs(z) <= _SERIES_RADIUS
    zn = z[near]
    z2 = zn * zn
    acc = np.full(zn.shape, _ERF_SERIES[-1], dtype=complex)
    for c in _ERF_SERIES[-2::-1]:
        acc = acc * z2 + c
    out[near] = zn * acc
    out[~near] = erf(z[~near])
    return out


def _erfc_differences(z: np.ndarray) -> np.ndarray:
    """``erfc(z[m+1]) - erfc(z[m])`` picking the form without cancellation."""
    out = np.empty(z.size - 1, dtype=complex)
    big = np.abs(z[:-1]) >= 1.0
    ib = np.flatnonzero(big)
    isml = np.flatnonzero(~big)
    out[ib] = erfc(z[ib + 1]) - erfc(z[ib])
    out[isml] = _erf(z[isml]) - _erf(z[isml + 1])
    return out


def kernel_cell_moments(r: float, h: float, cells: int) -> tuple[np.ndarray, np.ndarray]:
    """``int s**k K(s) ds`` over ``[m h, (m+1) h]`` for ``k = 0, 1``, ``K`` the free kernel at radius ``r``.

    Uses ``int s**-3/2 exp(i a / s) ds = (sqrt(pi)/b) erfc(b / sqrt(s))`` with
    ``a = r**2/4``, ``b = sqrt(-i a)``.
    """
    if r <= 0:
        raise ValueError("kernel moments need r > 0")
    s = h * np.arange(cells + 1, dtype=float)
    b = 0.5 * r * complex(math.sqrt(0.5), -math.sqrt(0.5))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = b / np.sqrt(s)
        phase = np.exp(1j * r * r / (4 * s))
    z[0] = complex(np.inf, -np.inf)
    d_erfc = np.empty(cells, dtype=complex)
    d_erfc[0] = erfc(z[1])
    if cells > 1:
        d_erfc[1:] = _erfc_differences(z[1:])
    m0 = (SQRT_PI / b) * d_erfc
    root = 2 * np.sqrt(s) * phase
    root[0] = 0.0
    m1 = np.diff(root) - 2 * SQRT_PI * b * d_erfc
    return KERNEL_PREFACTOR * m0, KERNEL_PREFACTOR * m1


class _ProfileBuilder:
    """Evaluates ``Psi_t(r)`` for many radii, sharing the transforms of the charge."""

    def __init__(self, traj: ChargeTrajectory, state: BoundState, stride: int = 1):
        _require_bound_state_run(traj)
        self.traj, self.state, self.stride = traj, state, stride
        n = traj.q.size
        self.n = n
        if n > 1:
            self.size = fft.next_fast_len(2 * (n - 1), real=False)
            qa = traj.q[1:]
            qb = traj.q[:-1]
            self.Qa = fft.fft(qa, self.size, workers=fft_workers())
            self.Qb = fft.fft(qb, self.size, workers=fft_workers())

    def __call__(self, r: float) -> tuple[np.ndarray, np.ndarray]:
        n, h = self.n, self.traj.grid.h
        times = self.traj.grid.times
        conv = np.zeros(n, dtype=complex)
        if n > 1:
            m0, m1 = kernel_cell_moments(r, h, n - 1)
            s = h * np.arange(n)
            a = (s[1:] * m0 - m1) / h
            b = (m1 - s[:-1] * m0) / h
            # Psi_j = sum_{k=1}^{j} a[j-k] q_k + sum_{k=0}^{j-1} b[j-1-k] q_k
            w = fft_workers()
            spec = self.Qa * fft.fft(a, self.size, workers=w) + self.Qb * fft.fft(b, self.size, workers=w)
            conv[1:] = fft.ifft(spec, workers=w)[: n - 1]
        keep = slice(None, None, self.stride)
        free = free_evolved_bound_state(self.state, times[keep], r)
        return times[keep], free + 1j * conv[keep]


def radial_profile(traj: ChargeTrajectory, state: BoundState, r: float, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """``Psi_t(r)`` at every ``stride``-th grid time.

    ``Psi_t = exp(-i H0 t) phi + i int_0^t q(t - s) K(s, r) ds`` with ``q``
    linear on every grid cell and ``K`` integrated exactly over each cell,
    so the ``s -> 0`` endpoint needs no special care. ``stride`` only thins
    the output.
    """
    return _ProfileBuilder(traj, state, stride)(r)


def wavefunction_at(traj: ChargeTrajectory, state: BoundState, r: float, t: float) -> complex:
    j = traj.grid.index(t)
    if j == 0:
        return complex(bound_state_eval(state, r))
    _, psi = radial_profile(traj.prefix(j + 1), state, r)
    return complex(psi[j])


# --- ball probability ------------------------------------------------------------


@dataclass(frozen=True)
class BallSeries:
    radius: float
    times: np.ndarray
    prob: np.ndarray
    time_average: np.ndarray
    quadrature_nodes: int
    quadrature_error: float
    stride: int


def ball_probability_initial(state: BoundState, R: float) -> float:
    """``int_{|x| <= R} |phi|**2 = 1 - exp(-2 kappa R)``."""
    return 1.0 - math.exp(-2 * state.kappa * R)


def _ball_from_profiles(R: float, nodes: int, profile) -> np.ndarray:
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * R * (x + 1)
    w = 0.5 * R * w
    total = 0.0
    for rk, wk in zip(r, w):
        # 4 pi r**2 |Psi|**2 = 4 pi |r Psi|**2 stays bounded at r = 0
        total = total + wk * 4 * math.pi * np.abs(rk * profile(rk)) ** 2
    return total


def ball_series(
    traj: ChargeTrajectory,
    state: BoundState,
    R: float,
    stride: int = 10,
    nodes: int = 48,
) -> BallSeries:
    """``||F(|x| <= R) Psi_t||**2`` on every ``stride``-th grid time and its running Cesaro mean.

    The radial integral uses Gauss-Legendre in ``r``; a second pass with
    fewer nodes gives the reported quadrature error.
    """
    if not R > 0:
        raise ValueError("ball radius must be positive")
    cache: dict[float, np.ndarray] = {}
    times = None
    build = _ProfileBuilder(traj, state, stride)

    def profile(r):
        nonlocal times
        if r not in cache:
            times, cache[r] = build(float(r))
        return cache[r]

    prob = _ball_from_profiles(R, nodes, profile)
    coarse = _ball_from_profiles(R, (2 * nodes) // 3, profile)
    err = float(np.max(np.abs(prob - coarse)))
    avg = np.empty_like(prob)
    avg[0] = prob[0]
    avg[1:] = cumulative_trapezoid(prob, times)[0:] / times[1:]
    return BallSeries(R, times, prob, avg, nodes, err, stride)


def ball_probability(traj: ChargeTrajectory, state: BoundState, R: float, t: float, nodes: int = 48) -> float:
    j = traj.grid.index(t)
    if j == 0:
        return ball_probability_initial(state, R)
    sub = traj.prefix(j + 1)
    val = _ball_from_profiles(R, nodes, lambda r: radial_profile(sub, state, float(r))[1][-1:])
    return float(val[0])


# --- decay fits -------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFitReport:
    window: tuple
    exponent: float
    amplitude: float
    r_squared: float
    samples: int
    residual_trend: float
    remainder_rate: float | None = None
    exponential_share: float | None = None
    envelope: str = "raw"


def period_envelope(t: np.ndarray, values: np.ndarray, period: float, window) -> tuple[np.ndarray, np.ndarray]:
    """Root-mean-square of ``values`` over consecutive full periods inside ``window``.

    Removes the periodic modulation that a drive imprints on a decaying
    amplitude; each sample sits at the center of its period.
    """
    t1, t2 = window
    starts = np.arange(t1, t2 - period + 1e-12, period)
    tc, env = [], []
    for s in starts:
        m = (t >= s) & (t < s + period)
        if m.sum() < 2:
            continue
        tc.append(s + 0.5 * period)
        env.append(math.sqrt(float(np.mean(np.abs(values[m]) ** 2))))
    return np.array(tc), np.array(env)


def decay_fit(
    t: np.ndarray,
    values: np.ndarray,
    window=None,
    period: float | None = None,
    min_samples: int = 30,
    min_r2: float = 0.9,
) -> DecayFitReport:
    """Least-squares line through ``(log t, log value)`` on the window.

    With ``period`` the fit runs on the per-period RMS envelope. A second
    fit of ``A t**p + C exp(-B t)`` estimates the exponential remainder.
    """
    t = np.asarray(t, dtype=float)
    values = np.abs(np.asarray(values))
    if window is None:
        window = (0.25 * t[-1], 0.9 * t[-1])
    t1, t2 = window
    if period is not None:
        x, y = period_envelope(t, values, period, window)
        kind = "period-rms"
    else:
        m = (t >= t1) & (t <= t2)
        x, y = t[m], values[m]
        kind = "raw"
    if x.size < min_samples:
        raise ValueError(f"only {x.size} samples in window {window}; need {min_samples}")
    if np.any(y <= 0):
        raise ValueError("decay fit needs strictly positive samples")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    resid = ly - pred
    trend = float(np.polyfit(lx, resid, 2)[0]) if x.size > 3 else 0.0
    rate, share = _composite_fit(x, y, coef)
    report = DecayFitReport(
        (t1, t2), float(coef[0]), float(math.exp(coef[1])), r2, int(x.size), trend, rate, share, kind
    )
    if r2 < min_r2:
        raise WindowTooNoisy(f"r^2 = {r2:.3f} below {min_r2} on window {window}")
    return report


def _composite_fit(x, y, coef):
    def model(tt, la, p, lc, B):
        return np.exp(la) * tt**p + np.exp(lc) * np.exp(-B * tt)

    def resid(par):
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.log(model(x, *par)) - np.log(y)
        return np.where(np.isfinite(out), out, 1e6)

    start = [coef[1], coef[0], math.log(y[0]) - 2, 1.0 / max(x[0], 1e-12)]
    try:
        sol = optimize.least_squares(resid, start, bounds=([-np.inf, -10, -np.inf, 0], [np.inf, 2, np.inf, np.inf]))
    except (ValueError, FloatingPointError):
        return None, None
    if not sol.success:
        return None, None
    la, p, lc, B = sol.x
    head = model(x[:1], *sol.x)[0]
    share = float(math.exp(lc - B * x[0]) / head) if head > 0 else None
    return float(B), share
