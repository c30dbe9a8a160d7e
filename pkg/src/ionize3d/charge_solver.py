"""Product-trapezoid solver for the charge equation

    q(t) + c int_0^t alpha(tau) q(tau) (t - tau)**-1/2 dtau = R(t),   c = 4 sqrt(pi i),

with ``R = c * (Abel transform of the forcing)``. The history sum is a
Toeplitz convolution; the default march evaluates it with a
divide-and-conquer FFT scheme over power-of-two blocks, so the cost is
``O(N log**2 N)`` and a value at ``t_j`` never depends on the grid length.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import fft, integrate
from scipy.special import beta as beta_fn

from .alpha_model import FourierAlpha
from .free_dynamics import BoundState, ComplexAmplitudeSeries, forcing_amplitude
from .grid import TimeGrid

C_KERNEL = 4.0 * math.sqrt(math.pi) * complex(math.sqrt(0.5), math.sqrt(0.5))

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W

__all__ = [
    "TimeGrid",
    "ProductWeights",
    "abel_weights",
    "power_weights",
    "ChargeTrajectory",
    "solve_charge",
    "charge_rhs",
    "StepIllConditioned",
]


def fft_workers() -> int:
    return int(os.environ.get("IONIZE3D_THREADS", "1"))


class StepIllConditioned(RuntimeError):
    pass


class TailDominates(RuntimeError):
    pass


@dataclass(frozen=True)
class ProductWeights:
    """Weights for ``int_0^{t_j} phi(tau) (t_j - tau)**beta dtau`` with ``phi`` piecewise linear.

    The integral is ``edge[j-1] * phi_0 + sum_{k=1}^{j} inner[j-k] * phi_k``.
    """

    h: float
    beta: float
    inner: np.ndarray
    edge: np.ndarray

    @property
    def count(self) -> int:
        return self.inner.size + 1

    def row(self, j: int) -> np.ndarray:
        out = np.zeros(j + 1)
        if j == 0:
            return out
        out[0] = self.edge[j - 1]
        out[1:] += self.inner[j - 1 :: -1][:j]
        return out

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """All ``j`` at once; entry ``j`` depends only on ``phi[:j+1]``, bit for bit."""
        phi = np.asarray(phi)
        n = phi.size
        if n > self.count:
            raise ValueError("weight table shorter than the series")
        out = np.zeros(n, dtype=np.result_type(phi, float))
        if n < 2:
            return out
        body = np.zeros(n, dtype=out.dtype)
        body[1:] = phi[1:]
        conv = causal_convolve(body, self.inner, n)
        out[1:] = conv[1:n] + self.edge[: n - 1] * phi[0]
        return out


def _moments(count: int, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """``I0[m] = int_0^1 (m+x)**beta dx`` and ``I1[m] = int_0^1 x (m+x)**beta dx``."""
    I0 = np.empty(count)
    I1 = np.empty(count)
    I0[0] = 1.0 / (beta + 1.0)
    I1[0] = 1.0 / (beta + 2.0)
    if count > 1:
        # smooth on [m, m+1] for m >= 1, so 16-point Gauss-Legendre is at round-off
        s = (np.arange(1, count, dtype=float)[:, None] + _GL_X[None, :]) ** beta
        I0[1:] = (s * _GL_W).sum(axis=1)
        I1[1:] = (s * (_GL_W * _GL_X)).sum(axis=1)
    return I0, I1


@functools.lru_cache(maxsize=8)
def power_weights(h: float, count: int, beta: float) -> ProductWeights:
    """Product-trapezoid weights for the kernel ``(t - tau)**beta``, ``beta > -1``.

    Cached; the returned arrays are shared and read-only.
    """
    if not beta > -1:
        raise ValueError("kernel exponent must exceed -1")
    m = max(count - 1, 1)
    I0, I1 = _moments(m, beta)
    inner = np.empty(m)
    inner[0] = I0[0] - I1[0]
    inner[1:] = I0[1:] - I1[1:] + I1[:-1]
    scale = h ** (1.0 + beta)
    inner, edge = scale * inner, scale * I1
    inner.flags.writeable = False
    edge.flags.writeable = False
    return ProductWeights(h, beta, inner, edge)


def padded_length(count: int) -> int:
    return 1 << max(int(math.ceil(math.log2(max(count, 2)))), 1)


def abel_weights(grid: TimeGrid) -> ProductWeights:
    """Abel weights tabulated to the padded power of two, so block FFTs never see a truncated table."""
    return power_weights(grid.h, padded_length(grid.count) + 1, -0.5)


def _convolve(x: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    """First ``n`` terms of the linear convolution of ``x`` and ``w``."""
    size = fft.next_fast_len(x.size + w.size, real=False)
    X = fft.fft(x, size, workers=fft_workers())
    W = fft.fft(w, size, workers=fft_workers())
    out = fft.ifft(X * W, workers=fft_workers())[:n]
    if not (np.iscomplexobj(x) or np.iscomplexobj(w)):
        out = out.real
    return out


def causal_convolve(x: np.ndarray, w: np.ndarray, n: int, base: int = 64) -> np.ndarray:
    """``y_j = sum_{k<=j} w[j-k] x[k]`` for ``j < n`` on a power-of-two block tree.

    Blocks are aligned to absolute indices, so ``y_j`` is the same floating
    point number for every ``n > j``; a single FFT of length ``~2n`` is not.
    """
    P = max(base, 1 << max(int(math.ceil(math.log2(max(n, 1)))), 0))
    xs = np.zeros(P, dtype=np.result_type(x, w, complex))
    xs[:n] = x[:n]
    wp = np.zeros(P, dtype=float)
    m = min(P, w.size)
    wp[:m] = w[:m]
    idx = np.arange(base)
    lag = idx[:, None] - idx[None, :]
    toeplitz = np.where(lag >= 0, wp[np.clip(lag, 0, None)], 0.0)
    y = np.zeros(P, dtype=xs.dtype)
    workers = fft_workers()

    def solve(lo, hi):
        if lo >= n:
            return
        if hi - lo <= base:
            y[lo:hi] += toeplitz @ xs[lo:hi]
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        L = mid - lo
        if mid < n:
            X = fft.fft(xs[lo:mid], 2 * L, workers=workers)
            W = fft.fft(wp[: 2 * L], workers=workers)
            y[mid:hi] += fft.ifft(X * W, workers=workers)[L:]
        solve(mid, hi)

    solve(0, P)
    y = y[:n]
    return y if np.iscomplexobj(x) else y.real


# --- right-hand side ------------------------------------------------------------


def charge_rhs(series: ComplexAmplitudeSeries) -> np.ndarray:
    """``R(t_j)`` on the series grid.

    Singular terms ``a t**beta`` are integrated exactly against the kernel:
    ``int_0^t tau**beta (t - tau)**-1/2 dtau = B(beta + 1, 1/2) t**(beta + 1/2)``.
    """
    if series.kind == "rhs":
        return series.values.astype(complex)
    if series.kind != "forcing":
        raise ValueError(f"cannot build a right-hand side from kind {series.kind!r}")
    grid = series.grid
    t = grid.times
    out = abel_weights(grid).apply(series.values.astype(complex))
    for beta, coef in series.singular.items():
        out = out + coef * beta_fn(beta + 1.0, 0.5) * t ** (beta + 0.5)
    return C_KERNEL * out


# --- trajectories -----------------------------------------------------------------


@dataclass(frozen=True)
class ChargeTrajectory:
    grid: TimeGrid
    q: np.ndarray
    scheme: str
    order: float
    forcing_kind: str
    residual_norm: float
    alpha: FourierAlpha | None = None
    rhs: np.ndarray | None = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def prefix(self, count: int) -> "ChargeTrajectory":
        return ChargeTrajectory(
            self.grid.prefix(count), self.q[:count], self.scheme, self.order, self.forcing_kind,
            self.residual_norm, self.alpha, None if self.rhs is None else self.rhs[:count],
        )


def _march_direct(R, a, w: ProductWeights):
    n = R.size
    q = np.zeros(n, dtype=complex)
    u = np.zeros(n, dtype=complex)
    q[0] = R[0]
    u[0] = a[0] * q[0]
    inner = w.inner
    for j in range(1, n):
        hist = w.edge[j - 1] * u[0] + np.dot(inner[j - 1 : 0 : -1], u[1:j])
        q[j] = (R[j] - C_KERNEL * hist) / (1.0 + C_KERNEL * inner[0] * a[j])
        u[j] = a[j] * q[j]
    return q


def _march_fft(R, a, w_full: np.ndarray, edge: np.ndarray, base: int):
    """Online march; ``w_full`` holds inner weights up to the padded power of two."""
    n = R.size
    P = w_full.size
    q = np.zeros(n, dtype=complex)
    v = np.zeros(P, dtype=complex)
    acc = np.zeros(P, dtype=complex)
    q[0] = R[0]
    u0 = a[0] * q[0]
    acc[1:n] = edge[: n - 1] * u0
    diag = 1.0 + C_KERNEL * w_full[0] * a
    workers = fft_workers()

    def leaf(lo, hi):
        for j in range(max(lo, 1), min(hi, n)):
            k0 = max(lo, 1)
            if j > k0:
                acc[j] += np.dot(w_full[j - k0 : 0 : -1], v[k0:j])
            q[j] = (R[j] - C_KERNEL * acc[j]) / diag[j]
            v[j] = a[j] * q[j]

    def solve(lo, hi):
        if lo >= n:
            return
        if hi - lo <= base:
            leaf(lo, hi)
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        L = mid - lo
        if mid < n:
            X = fft.fft(v[lo:mid], 2 * L, workers=workers)
            W = fft.fft(w_full[: 2 * L], workers=workers)
            y = fft.ifft(X * W, workers=workers)
            acc[mid:hi] += y[L:]
        solve(mid, hi)

    solve(0, P)
    return q


def solve_charge(
    alpha: FourierAlpha,
    forcing: ComplexAmplitudeSeries,
    grid: TimeGrid | None = None,
    method: str = "fft",
    base: int = 64,
    tol: float = 1e-9,
) -> ChargeTrajectory:
    """March the product-trapezoid discretization on the forcing grid."""
    grid = forcing.grid if grid is None else grid
    if grid != forcing.grid:
        raise ValueError("forcing must be sampled on the solver grid")
    R = charge_rhs(forcing)
    a = np.asarray(alpha(grid.times), dtype=float)
    n = grid.count
    if method == "direct":
        w = abel_weights(grid)
        diag = 1.0 + C_KERNEL * w.inner[0] * a
    elif method == "fft":
        w = abel_weights(grid)
        diag = 1.0 + C_KERNEL * w.inner[0] * a
    else:
        raise ValueError(f"unknown method {method!r}")
    bad = np.abs(diag[1:]) < 1e-12
    if np.any(bad):
        j = 1 + int(np.argmax(bad))
        raise StepIllConditioned(f"step {j}: |1 + c w_jj alpha(t_j)| = {abs(diag[j]):.3g}")
    if method == "direct":
        q = _march_direct(R, a, w)
    else:
        q = _march_fft(R, a, w.inner, w.edge, base)
    defect = discrete_defect(q, R, a, grid)
    scale = 1.0 + float(np.max(np.abs(R)))
    if defect > tol * scale:
        raise RuntimeError(f"discrete residual {defect:.3g} exceeds tolerance")
    return ChargeTrajectory(grid, q, f"product-trapezoid/{method}", 2.0, forcing.kind, defect, alpha, R)


def discrete_defect(q, R, a, grid: TimeGrid) -> float:
    """``max_j |q_j + c sum_k w_jk alpha_k q_k - R_j|`` evaluated independently of the march."""
    w = abel_weights(grid)
    lhs = q + C_KERNEL * w.apply(a * q)
    return float(np.max(np.abs(lhs - R)))


# --- a-priori bound ---------------------------------------------------------------


@dataclass(frozen=True)
class AprioriBound:
    rate: float
    constant: float

    def log_bound(self, t) -> np.ndarray:
        return math.log(self.constant) + self.rate * np.asarray(t)

    def holds(self, traj: ChargeTrajectory, slack: float = 1e-9) -> bool:
        mags = np.abs(traj.q)
        with np.errstate(divide="ignore"):
            lm = np.log(mags)
        return bool(np.all(lm <= self.log_bound(traj.times) + slack))


def apriori_bound(alpha: FourierAlpha, state: BoundState) -> AprioriBound:
    """Exponential envelope for ``|q|`` from the comparison equation.

    ``eta' = rate eta + 16 pi**2 sup|alpha| |f(t)|`` with ``eta(0) = |q(0)|``
    gives ``|q(t)| <= C exp(rate t)`` with
    ``C = |q(0)| + 16 pi**2 sup|alpha| int_0^inf exp(-rate s) |f(s)| ds``.
    """
    sup = alpha.sup_abs()
    rate = 16 * math.pi**2 * sup**2
    q0 = state.charge
    if sup == 0:
        return AprioriBound(0.0, q0)
    g = lambda s: math.exp(-rate * s) * abs(forcing_amplitude(state, s))
    head, _ = integrate.quad(g, 0, 1, limit=200)
    tail, _ = integrate.quad(g, 1, np.inf, limit=200)
    return AprioriBound(rate, q0 + 16 * math.pi**2 * sup * (head + tail))


# --- convergence ------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    steps: np.ndarray
    errors: np.ndarray
    orders: np.ndarray
    defects: np.ndarray
    monotone: bool

    @property
    def observed_order(self) -> float:
        return float(np.min(self.orders))


def convergence_study(
    alpha: FourierAlpha,
    forcing_generator: Callable[[TimeGrid], ComplexAmplitudeSeries],
    grids: Sequence[TimeGrid],
    reference: Callable[[np.ndarray], np.ndarray] | None = None,
    method: str = "fft",
) -> ConvergenceReport:
    """Observed order from successive grids with step ratio 2.

    With ``reference`` the error is the max deviation on each grid; without
    it the endpoint differences of successive grids are used.
    """
    if len(grids) < 3:
        raise ValueError("convergence study needs at least 3 grids")
    trajs = [solve_charge(alpha, forcing_generator(g), g, method) for g in grids]
    steps = np.array([g.h for g in grids])
    ratios = steps[:-1] / steps[1:]
    if reference is not None:
        errors = np.array([np.max(np.abs(tr.q - reference(tr.times))) for tr in trajs])
        orders = np.log(errors[:-1] / errors[1:]) / np.log(ratios)
    else:
        ends = np.array([tr.q[-1] for tr in trajs])
        errors = np.abs(np.diff(ends))
        orders = np.log(errors[:-1] / errors[1:]) / np.log(ratios[1:])
    monotone = bool(np.all(np.diff(errors) < 0))
    defects = np.array([tr.residual_norm for tr in trajs])
    return ConvergenceReport(steps, errors, orders, defects, monotone)


# --- Laplace transform of samples -----------------------------------------------


@dataclass(frozen=True)
class LaplaceValue:
    value: complex
    tail_bound: float


def laplace_samples(h: float, values: np.ndarray, p: complex, extrapolate: bool = True) -> complex:
    """Trapezoid value of ``int_0^{T} exp(-p t) v(t) dt``.

    Samples of functions with a ``sqrt(t)`` term at the origin carry trapezoid
    errors ``e1 h**1.5 + e2 h**2 + ...``; with ``extrapolate`` the rules at
    strides 1, 2, 4 are combined to cancel both leading terms.
    """
    def trap(stride):
        v = values[::stride]
        if (values.size - 1) % stride:
            return None
        hh = h * stride
        e = np.exp(-p * hh * np.arange(v.size)) * v
        return hh * (e.sum() - 0.5 * (e[0] + e[-1]))

    t1 = trap(1)
    if not extrapolate:
        return complex(t1)
    t2, t4 = trap(2), trap(4)
    if t2 is None or t4 is None or values.size < 9:
        return complex(t1)
    # solve T(s h) = I + e1 (s h)**1.5 + e2 (s h)**2 for I at s = 1, 2, 4
    A = np.array([[1.0, 1.0, 1.0], [1.0, 2**1.5, 4.0], [1.0, 4**1.5, 16.0]])
    coef = np.linalg.solve(A, np.array([t1, t2, t4]))
    return complex(coef[0])


def laplace_of_trajectory(traj: ChargeTrajectory, p: complex, extrapolate: bool = True) -> LaplaceValue:
    """Laplace transform of ``q`` truncated at ``T_end``, with a bound on the dropped tail.

    The tail bound takes ``|q|`` after ``T_end`` to stay below its maximum
    over the last quarter of the run.
    """
    if not p.real > 0:
        raise ValueError("Laplace evaluation needs Re p > 0")
    val = laplace_samples(traj.grid.h, traj.q, p, extrapolate)
    T = traj.grid.t_end
    last = np.abs(traj.q[int(0.75 * traj.grid.count) :])
    tail = float(np.max(last) * math.exp(-p.real * T) / p.real)
    if tail > 0.1 * abs(val):
        raise TailDominates(f"tail bound {tail:.3g} exceeds 10% of |L[q]({p})| = {abs(val):.3g}")
    return LaplaceValue(val, tail)
