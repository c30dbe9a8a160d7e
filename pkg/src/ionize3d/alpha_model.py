"""Periodic coupling alpha(t) stored as a finite Fourier series.

Conventions: ``alpha(t) = sum_n alpha_n exp(-i n omega t)`` with the reality
condition ``alpha_n = conj(alpha_{-n})``. Units are hbar = 1, 2m = 1, so
``alpha`` is an inverse length and ``omega`` an inverse time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

NORMALIZED_ALPHA0 = -1.0 / (4.0 * math.pi)


class AlphaModelError(ValueError):
    pass


class RealityViolation(AlphaModelError):
    pass


class NonNegativeAlphaZeroAtStart(AlphaModelError):
    pass


@dataclass(frozen=True)
class FourierAlpha:
    """Periodic coupling with finitely supported Fourier coefficients.

    ``coeffs`` maps an integer index ``n`` to the complex coefficient
    ``alpha_n``. Missing indices are zero. Negative-index partners must be
    supplied explicitly and must satisfy the reality condition.
    """

    omega: float
    coeffs: Mapping[int, complex]
    reality_tol: float = 1e-12

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise AlphaModelError(f"omega must be positive, got {self.omega}")
        clean = {int(n): complex(c) for n, c in self.coeffs.items() if complex(c) != 0}
        scale = 1.0 + sum(abs(c) for c in clean.values())
        for n, c in clean.items():
            partner = clean.get(-n, 0j)
            if abs(c - partner.conjugate()) > self.reality_tol * scale:
                raise RealityViolation(
                    f"alpha_{n} = {c} but conj(alpha_{-n}) = {partner.conjugate()}"
                )
        if 0 in clean:
            clean[0] = complex(clean[0].real, 0.0)
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    @classmethod
    def from_pairs(cls, omega: float, pairs, **kwargs) -> "FourierAlpha":
        """Build from ``(n, re, im)`` triples as used in config files."""
        return cls(omega, {int(n): complex(re, im) for n, re, im in pairs}, **kwargs)

    @classmethod
    def constant(cls, value: float, omega: float = 1.0) -> "FourierAlpha":
        return cls(omega, {0: value})

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    @property
    def support_radius(self) -> int:
        return max((abs(n) for n in self.coeffs), default=0)

    @property
    def ell1_norm(self) -> float:
        return float(sum(abs(c) for c in self.coeffs.values()))

    @property
    def mean(self) -> float:
        return self.coeffs.get(0, 0j).real

    @property
    def value_at_zero(self) -> float:
        return float(sum(self.coeffs.values()).real)

    @property
    def is_constant(self) -> bool:
        return self.support_radius == 0

    def coeff(self, n: int) -> complex:
        return self.coeffs.get(n, 0j)

    def dense(self, radius: int | None = None) -> np.ndarray:
        """Coefficients ``alpha_{-K..K}`` as an array of length ``2K + 1``."""
        k = self.support_radius if radius is None else radius
        out = np.zeros(2 * k + 1, dtype=complex)
        for n, c in self.coeffs.items():
            if abs(n) <= k:
                out[n + k] = c
        return out

    def positive_tail(self) -> np.ndarray:
        """The sequence ``(alpha_1, alpha_2, ...)`` up to the support radius."""
        return np.array([self.coeff(n) for n in range(1, self.support_radius + 1)], dtype=complex)

    def __call__(self, t):
        return eval_alpha(self, t)

    def scaled(self, factor: complex) -> "FourierAlpha":
        return FourierAlpha(self.omega, {n: factor * c for n, c in self.coeffs.items()})

    def sup_abs(self, samples: int = 4096) -> float:
        """``sup |alpha(t)|`` sampled over one period."""
        t = np.linspace(0.0, self.period, samples, endpoint=False)
        return float(np.max(np.abs(eval_alpha(self, t))))


def eval_alpha(model: FourierAlpha, t):
    """Real value of ``alpha(t)``; pairs ``n, -n`` are summed as ``2 Re``."""
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, model.coeff(0).real)
    for n, c in model.coeffs.items():
        if n > 0:
            phase = n * model.omega * t
            # alpha_n e^{-in wt} + conj(alpha_n) e^{in wt}
            out = out + 2.0 * (c.real * np.cos(phase) + c.imag * np.sin(phase))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Normalization:
    model: FourierAlpha
    scale: float


def normalize(model: FourierAlpha) -> Normalization:
    """Rescale lengths so that ``alpha(0) = -1/(4 pi)``.

    With lengths scaled by ``s``, couplings scale as ``1/s`` and energies
    (hence ``omega``) as ``1/s**2``. The returned ``scale`` is ``s``.
    """
    a0 = model.value_at_zero
    if a0 >= 0:
        raise NonNegativeAlphaZeroAtStart(f"alpha(0) = {a0} must be negative")
    s = a0 / NORMALIZED_ALPHA0
    coeffs = {n: c / s for n, c in model.coeffs.items()}
    return Normalization(FourierAlpha(model.omega / s**2, coeffs), s)


# --- resonance classification -------------------------------------------------


@dataclass(frozen=True)
class NegativeMean:
    n_bar: int
    p_bar: complex

    name = "NegativeMean"


@dataclass(frozen=True)
class NegativeMeanResonant:
    N: int

    name = "NegativeMeanResonant"


@dataclass(frozen=True)
class ZeroMean:
    name = "ZeroMean"


@dataclass(frozen=True)
class PositiveMean:
    name = "PositiveMean"


ResonanceClass = Union[NegativeMean, NegativeMeanResonant, ZeroMean, PositiveMean]


def classify_resonance(
    model: FourierAlpha, tol: float = 1e-9, resonant: int | None = None
) -> ResonanceClass:
    """Locate the imaginary-axis singularity of the mode system.

    ``resonant`` forces the resonant class with the given ``N`` (for drives
    specified as exact rationals where the float test is ambiguous).
    """
    a0 = model.mean
    if abs(a0) <= tol:
        return ZeroMean()
    if a0 > 0:
        return PositiveMean()
    if resonant is not None:
        return NegativeMeanResonant(int(resonant))
    e = (4.0 * math.pi * a0) ** 2
    x = e / model.omega
    n_near = round(x)
    if n_near >= 1 and abs(e - n_near * model.omega) <= tol * model.omega:
        return NegativeMeanResonant(int(n_near))
    n_bar = math.floor(x)
    return NegativeMean(int(n_bar), complex(0.0, e - model.omega * n_bar))


# --- genericity -----------------------------------------------------------------


@dataclass(frozen=True)
class GenericityReport:
    residuals: np.ndarray
    verdict: str
    threshold: float
    rank_tol: float
    ill_conditioned: bool = False
    plateau: float | None = None
    accepted: list = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return float(self.residuals[-1])


def genericity_residuals(
    model: FourierAlpha,
    n_max: int = 200,
    threshold: float = 1e-8,
    rank_tol: float = 1e-10,
    plateau_window: int = 20,
    plateau_decrement: float = 1e-10,
) -> GenericityReport:
    """Distance from ``e_1`` to the span of the shifted tails ``(alpha_{1+n}, alpha_{2+n}, ...)``, ``n >= 0``.

    Shifts are orthogonalized one at a time; a shift whose new direction is
    below ``rank_tol * ||alpha_tilde||`` is treated as numerically dependent
    and flagged. The tolerance is relative to the sequence norm, so the
    residuals are invariant under rescaling of the coefficients.
    """
    tail = model.positive_tail()
    scale = float(np.linalg.norm(tail))
    if scale == 0.0:
        return GenericityReport(np.ones(n_max + 1), "NonGeneric", threshold, rank_tol, plateau=1.0)

    length = tail.size + n_max + 1
    res = np.zeros(length, dtype=complex)
    res[0] = 1.0
    basis: list[np.ndarray] = []
    residuals = np.empty(n_max + 1)
    ill = False
    accepted = []
    for n in range(n_max + 1):
        v = np.zeros(length, dtype=complex)
        chunk = tail[n:]
        v[: chunk.size] = chunk
        vnorm = np.linalg.norm(v)
        w = v.copy()
        for _ in range(2):
            for qb in basis:
                w -= qb * np.vdot(qb, w)
        wnorm = np.linalg.norm(w)
        if wnorm > rank_tol * scale:
            qb = w / wnorm
            basis.append(qb)
            accepted.append(n)
            res -= qb * np.vdot(qb, res)
        elif vnorm > rank_tol * scale:
            ill = True
        residuals[n] = min(1.0, float(np.linalg.norm(res)))

    final = residuals[-1]
    if final < threshold:
        verdict, plateau = "Generic", None
    else:
        dec = -np.diff(residuals[-(plateau_window + 1):])
        if residuals.size > plateau_window and np.all(dec < plateau_decrement):
            verdict, plateau = "NonGeneric", float(final)
        else:
            verdict, plateau = "Inconclusive", None
    return GenericityReport(residuals, verdict, threshold, rank_tol, ill, plateau, accepted)


def geometric_alpha(lam: float, n_cut: int, omega: float = 1.0, amplitude: float = 1.0):
    """``alpha_n = amplitude * lam**|n|`` truncated at ``|n| <= n_cut``.

    Returns the model and the l1 norm of the discarded tail.
    """
    coeffs = {n: amplitude * lam ** abs(n) for n in range(-n_cut, n_cut + 1)}
    tail = 2.0 * abs(amplitude) * lam ** (n_cut + 1) / (1.0 - lam)
    return FourierAlpha(omega, coeffs), tail
