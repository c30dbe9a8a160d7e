"""Truncated Laplace-domain mode system for the charge.

With ``q_n(p) = L[q](p + i omega n)`` the Laplace-transformed charge equation
becomes, row by row,

    D_n q_n + 4 pi sum_{k != n} alpha_{k-n} q_k = N_n,

    D_n = 4 pi alpha_0 + sqrt(omega n - i p),
    N_n = 4 pi i sqrt(2|a|) / (4 pi a - sqrt(omega n - i p)),

where ``a < 0`` is the coupling of the initial bound state. Dividing row
``n`` by ``D_n`` gives the form ``(I - L(p)) q = g(p)``; all three signs of
``alpha_0`` share this layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alpha_model import NORMALIZED_ALPHA0, FourierAlpha

FOUR_PI = 4.0 * math.pi


class ModeSystemError(RuntimeError):
    pass


class SingularRow(ModeSystemError):
    def __init__(self, n: int, value: complex):
        super().__init__(f"row {n} has a vanishing denominator ({abs(value):.3g})")
        self.n = n


class NumericallySingular(ModeSystemError):
    def __init__(self, p: complex, condition: float):
        super().__init__(f"mode system at p = {p} is numerically singular (cond {condition:.3g})")
        self.condition = condition


class PoorFit(ModeSystemError):
    pass


def sqrt_branch(z):
    """Square root with the cut on the negative real axis and ``arg z`` in ``(-pi, pi]``.

    Unlike ``numpy.sqrt`` this maps ``-1 - 0j`` to ``+i``: a negative zero
    imaginary part is treated as zero.
    """
    z = np.asarray(z, dtype=complex) + 0j
    out = np.sqrt(z)
    return out if out.ndim else complex(out)


def mean_case(alpha: FourierAlpha, tol: float = 1e-9) -> str:
    a0 = alpha.mean
    if abs(a0) <= tol:
        return "II"
    return "I" if a0 < 0 else "III"


def initial_coupling(alpha: FourierAlpha) -> float:
    """Coupling of the initial bound state: ``alpha(0)`` when negative.

    A drive with ``alpha(0) >= 0`` has no bound state at ``t = 0``; such runs
    start from the normalized reference state ``alpha = -1/(4 pi)``.
    """
    a = alpha.value_at_zero
    return a if a < 0 else NORMALIZED_ALPHA0


@dataclass(frozen=True)
class ModeTruncation:
    M: int
    case: str = "auto"

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError(f"truncation half-width must be positive, got {self.M}")
        if self.case not in ("auto", "I", "II", "III"):
            raise ValueError(f"unknown case tag {self.case!r}")

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def position(self, n: int) -> int:
        if abs(n) > self.M:
            raise IndexError(f"mode {n} outside truncation [-{self.M}, {self.M}]")
        return n + self.M

    def check(self, alpha: FourierAlpha) -> None:
        if self.M < alpha.support_radius:
            raise ValueError(
                f"truncation M = {self.M} is below the drive support radius {alpha.support_radius}"
            )
        if self.case != "auto" and self.case != mean_case(alpha):
            raise ValueError(f"case hint {self.case} contradicts alpha_0 = {alpha.mean}")


@dataclass(frozen=True)
class ModeData:
    """Unscaled rows ``D_n q_n + 4 pi sum alpha_{k-n} q_k = N_n`` on ``[-M, M]``."""

    p: complex
    indices: np.ndarray
    diag: np.ndarray
    coupling: np.ndarray
    rhs: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return self.coupling + np.diag(self.diag)


def mode_data(alpha: FourierAlpha, trunc: ModeTruncation, p: complex, a_init: float | None = None) -> ModeData:
    trunc.check(alpha)
    a = initial_coupling(alpha) if a_init is None else a_init
    n = trunc.indices
    roots = sqrt_branch(alpha.omega * n - 1j * p)
    diag = FOUR_PI * alpha.mean + roots
    rhs = FOUR_PI * 1j * math.sqrt(2 * abs(a)) / (FOUR_PI * a - roots)
    size = n.size
    coupling = np.zeros((size, size), dtype=complex)
    for k, c in alpha.coeffs.items():
        if k == 0:
            continue
        # entry (n, n + k) carries 4 pi alpha_k
        coupling += FOUR_PI * c * np.eye(size, k=k)
    return ModeData(complex(p), n, diag, coupling, rhs)


def assemble_system(alpha: FourierAlpha, trunc: ModeTruncation, p: complex, a_init: float | None = None):
    """``(I - L(p), g(p))`` truncated to ``[-M, M]``."""
    data = mode_data(alpha, trunc, p, a_init)
    scale = max(1.0, float(np.max(np.abs(data.diag))))
    small = np.abs(data.diag) < 1e-14 * scale
    if np.any(small):
        n = int(data.indices[np.argmax(small)])
        raise SingularRow(n, data.diag[n + trunc.M])
    inv = 1.0 / data.diag
    return inv[:, None] * data.matrix, inv * data.rhs


@dataclass(frozen=True)
class ModeSolution:
    p: complex
    indices: np.ndarray
    q_modes: np.ndarray
    residual: float
    condition: float
    condition_unscaled: float
    tail_bound: float

    def q(self, n: int) -> complex:
        return complex(self.q_modes[n + (self.indices.size - 1) // 2])

    @property
    def q0(self) -> complex:
        return self.q(0)


def _tail_estimate(alpha: FourierAlpha, trunc: ModeTruncation, data: ModeData, scaled: np.ndarray, a: float) -> float:
    """First-order effect on the retained modes of the modes cut off at ``|n| > M``.

    Outside modes are approximated by their forcing ``N_n / D_n``; their
    coupling into the window is pushed through the truncated resolvent.
    """
    K = alpha.support_radius
    if K == 0:
        return 0.0
    M = trunc.M
    outer = np.concatenate([np.arange(-M - K, -M), np.arange(M + 1, M + K + 1)])
    roots = sqrt_branch(alpha.omega * outer - 1j * data.p)
    g_out = FOUR_PI * 1j * math.sqrt(2 * abs(a)) / (FOUR_PI * a - roots) / (FOUR_PI * alpha.mean + roots)
    delta = np.zeros(data.indices.size, dtype=complex)
    for m, gm in zip(outer, g_out):
        for k, c in alpha.coeffs.items():
            n = m - k
            if k != 0 and abs(n) <= M:
                delta[n + M] += FOUR_PI * c * gm / data.diag[n + M]
    sigma_min = np.linalg.svd(scaled, compute_uv=False)[-1]
    return float(2.0 * np.linalg.norm(delta) / sigma_min)


def solve_modes(
    alpha: FourierAlpha,
    trunc: ModeTruncation,
    p: complex,
    a_init: float | None = None,
    cond_limit: float = 1e13,
    tail: bool = True,
) -> ModeSolution:
    """Dense solve of the truncated system at one point ``p``.

    The unscaled rows are solved, so a small ``D_n`` near a branch or pole
    point costs no accuracy; the reported ``condition`` is that of the
    scaled form ``I - L(p)``.
    """
    a = initial_coupling(alpha) if a_init is None else a_init
    data = mode_data(alpha, trunc, p, a)
    mat = data.matrix
    cond_u = float(np.linalg.cond(mat))
    if not np.isfinite(cond_u) or cond_u > cond_limit:
        raise NumericallySingular(data.p, cond_u)
    q = np.linalg.solve(mat, data.rhs)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = mat / data.diag[:, None]
        g = data.rhs / data.diag
    if np.all(np.isfinite(scaled)):
        cond_s = float(np.linalg.cond(scaled))
        residual = float(np.max(np.abs(scaled @ q - g)))
        bound = _tail_estimate(alpha, trunc, data, scaled, a) if tail else float("nan")
    else:
        cond_s, residual, bound = float("inf"), float(np.max(np.abs(mat @ q - data.rhs))), float("nan")
    return ModeSolution(data.p, data.indices, q, residual, cond_s, cond_u, bound)


# --- imaginary-axis scans ------------------------------------------------------


@dataclass(frozen=True)
class ScanReport:
    s: np.ndarray
    eps: float
    norms: np.ndarray
    conditions: np.ndarray
    flagged: np.ndarray

    @property
    def max_condition(self) -> float:
        return float(np.max(self.conditions))


def scan_imaginary_axis(
    alpha: FourierAlpha,
    trunc: ModeTruncation,
    s_grid,
    eps: float,
    growth: float = 10.0,
) -> ScanReport:
    """Solve at ``p = i s + eps`` along ``s_grid``; flag local norm peaks above ``growth`` times the median."""
    if not eps > 0:
        raise ValueError("scan offset must be positive")
    s_grid = np.asarray(s_grid, dtype=float)
    norms = np.empty(s_grid.size)
    conds = np.empty(s_grid.size)
    for i, s in enumerate(s_grid):
        sol = solve_modes(alpha, trunc, 1j * s + eps, tail=False, cond_limit=np.inf)
        norms[i] = np.linalg.norm(sol.q_modes)
        conds[i] = sol.condition
    med = np.median(norms)
    flagged = np.flatnonzero(norms > growth * med)
    return ScanReport(s_grid, eps, norms, conds, flagged)


@dataclass(frozen=True)
class EpsilonProbe:
    s: float
    n: int
    eps: np.ndarray
    values: np.ndarray

    @property
    def variation(self) -> float:
        mags = np.abs(self.values)
        return float(np.max(mags) / np.min(mags))


def probe_point(
    alpha: FourierAlpha,
    trunc: ModeTruncation,
    s: float,
    n: int = 0,
    eps_ladder=(1e-3, 1e-4, 1e-5, 1e-6),
) -> EpsilonProbe:
    """``q_n(i s + eps)`` along a ladder of offsets; a pole shows as ``|q| ~ 1/eps``."""
    eps = np.asarray(eps_ladder, dtype=float)
    vals = np.array([solve_modes(alpha, trunc, 1j * s + e, tail=False, cond_limit=np.inf).q(n) for e in eps])
    return EpsilonProbe(s, n, eps, vals)


# --- auxiliary decomposition ----------------------------------------------------


@dataclass(frozen=True)
class AuxiliarySolution:
    """Split ``q_n = r_n + sum_m t^(m)_n q_m`` over the excluded indices ``m``.

    ``particular`` is ``r`` and ``homogeneous[m]`` is ``t^(m)``, both indexed
    on the full window with zeros at the excluded positions. ``reduced`` and
    ``reduced_rhs`` are the small system for the excluded modes.
    """

    p: complex
    indices: np.ndarray
    excluded: tuple
    particular: np.ndarray
    homogeneous: dict
    reduced: np.ndarray
    reduced_rhs: np.ndarray
    F: complex
    G: complex

    @property
    def excluded_modes(self) -> np.ndarray:
        return np.linalg.solve(self.reduced, self.reduced_rhs)

    def reconstruct(self) -> np.ndarray:
        qx = self.excluded_modes
        out = self.particular.copy()
        for j, m in enumerate(self.excluded):
            out = out + self.homogeneous[m] * qx[j]
            out[m + (self.indices.size - 1) // 2] = qx[j]
        return out

    # names used for the single-index split
    @property
    def t(self) -> np.ndarray:
        return self.homogeneous[self.excluded[0]]

    @property
    def r(self) -> np.ndarray:
        return self.particular


def solve_auxiliary(
    alpha: FourierAlpha,
    trunc: ModeTruncation,
    p: complex,
    singular_index: int = 0,
    resonant_index: int | None = None,
    a_init: float | None = None,
) -> AuxiliarySolution:
    """Remove the rows of the singular (and, if given, resonant) modes and solve for the rest.

    ``F`` and ``G`` refer to the first excluded index ``s``:
    ``F = 4 pi sum_{k != s} alpha_{k-s} t_k`` and
    ``G = -4 pi sum_{k != s} alpha_{k-s} r_k``.
    """
    data = mode_data(alpha, trunc, p, a_init)
    excluded = (singular_index,) if resonant_index is None else (singular_index, resonant_index)
    pos = [trunc.position(m) for m in excluded]
    keep = np.setdiff1d(np.arange(data.indices.size), pos)
    mat = data.matrix
    sub = mat[np.ix_(keep, keep)]
    cols = [-mat[keep, j] for j in pos]
    rhs = np.column_stack([data.rhs[keep]] + cols)
    sol = np.linalg.solve(sub, rhs)

    def embed(v):
        out = np.zeros(data.indices.size, dtype=complex)
        out[keep] = v
        return out

    particular = embed(sol[:, 0])
    homogeneous = {m: embed(sol[:, 1 + j]) for j, m in enumerate(excluded)}
    reduced = np.empty((len(excluded), len(excluded)), dtype=complex)
    reduced_rhs = np.empty(len(excluded), dtype=complex)
    for i, ji in enumerate(pos):
        row = mat[ji]
        reduced_rhs[i] = data.rhs[ji] - row[keep] @ sol[:, 0]
        for j, jj in enumerate(pos):
            reduced[i, j] = row[jj] + row[keep] @ sol[:, 1 + j]
    s_pos = pos[0]
    F = complex(mat[s_pos, keep] @ sol[:, 1])
    G = complex(-(mat[s_pos, keep] @ sol[:, 0]))
    return AuxiliarySolution(data.p, data.indices, excluded, particular, homogeneous, reduced, reduced_rhs, F, G)


# relative distance |(4 pi alpha_0)^2 - N omega| / omega treated as near-resonant
NEAR_RESONANCE = 1e-2


def near_resonance(alpha: FourierAlpha, tol: float = NEAR_RESONANCE) -> int | None:
    """The ``N >= 1`` with ``(4 pi alpha_0)**2`` within ``tol omega`` of ``N omega``, else None."""
    if alpha.mean >= 0:
        return None
    x = (FOUR_PI * alpha.mean) ** 2 / alpha.omega
    N = round(x)
    return int(N) if N >= 1 and abs(x - N) <= tol else None


@dataclass(frozen=True)
class DecompositionCheck:
    eps: np.ndarray
    single: tuple
    paired: tuple
    gaps: np.ndarray
    extrapolation_error: float

    @property
    def agree(self) -> bool:
        return bool(np.max(self.gaps) <= max(self.extrapolation_error, 1e-8))


def compare_decompositions(
    alpha: FourierAlpha,
    trunc: ModeTruncation,
    eps_ladder=(1e-3, 1e-4, 1e-5, 1e-6),
    a_init: float | None = None,
) -> DecompositionCheck:
    """Solve along ``p = eps`` with the split at ``n_bar`` alone and at ``(n_bar, n_bar + 1)``.

    Near a resonance the row that turns singular at ``p = 0`` is one of these
    two, so the paired split is the resonant-style decomposition. Gaps are
    relative max-norm differences of the reconstructed mode vectors; the
    extrapolation error is the change of ``q_0`` between the two smallest
    offsets, relative to ``|q_0|``.
    """
    x = (FOUR_PI * alpha.mean) ** 2 / alpha.omega
    n_bar = int(math.floor(x))
    single, paired = (n_bar,), (n_bar, n_bar + 1)
    eps = np.sort(np.asarray(eps_ladder, dtype=float))[::-1]
    gaps = np.empty(eps.size)
    q0 = np.empty(eps.size, dtype=complex)
    mid = (trunc.indices.size - 1) // 2
    for i, e in enumerate(eps):
        a = solve_auxiliary(alpha, trunc, e, n_bar, a_init=a_init).reconstruct()
        b = solve_auxiliary(alpha, trunc, e, n_bar, n_bar + 1, a_init=a_init).reconstruct()
        gaps[i] = np.max(np.abs(a - b)) / np.max(np.abs(a))
        q0[i] = a[mid]
    extrap = float(abs(q0[-1] - q0[-2]) / abs(q0[-1])) if eps.size > 1 else 0.0
    return DecompositionCheck(eps, single, paired, gaps, extrap)


def g_prime(alpha: FourierAlpha, trunc: ModeTruncation, a_init: float | None = None, p: complex = 0.0) -> complex:
    """Coefficient of ``sqrt(p)`` in ``q_0`` obtained from the split at index 0.

    With ``B = 4 pi alpha_0 + F``, ``b = 4 pi |a|`` and
    ``kappa = 4 pi i sqrt(2|a|)``, the reduced row reads
    ``(B + s) q_0 = G - kappa / (b + s)`` with ``s = sqrt(-i p)``; its part
    odd in ``s`` is ``sqrt(p)`` times

        sqrt(-i) (kappa (B + b) - (b**2 + i p) G) / ((b**2 + i p)(B**2 + i p)).
    """
    a = initial_coupling(alpha) if a_init is None else a_init
    # rows n < 0 sit on the cut at p = 0; take the boundary value from Re p > 0
    p_eval = p if p != 0 else 1e-300
    aux = solve_auxiliary(alpha, trunc, p_eval, 0, a_init=a)
    B = FOUR_PI * alpha.mean + aux.F
    b = FOUR_PI * abs(a)
    kappa = FOUR_PI * 1j * math.sqrt(2 * abs(a))
    e = b * b + 1j * p
    return complex(sqrt_branch(-1j) * (kappa * (B + b) - e * aux.G) / (e * (B * B + 1j * p)))


# --- branch fits -----------------------------------------------------------------


@dataclass(frozen=True)
class BranchFit:
    n: int
    c: complex
    d: complex
    residual: float
    window: tuple
    coefficients: np.ndarray
    g_prime: complex | None = None
    inverse_sqrt_coeff: complex | None = None
    arc_residual: float | None = None

    @property
    def relative_residual(self) -> float:
        return self.residual / (abs(self.c) + abs(self.d))

    @property
    def g_prime_gap(self) -> float | None:
        if self.g_prime is None:
            return None
        return abs(self.d - self.g_prime) / abs(self.d)


def branch_fit(
    alpha: FourierAlpha,
    trunc: ModeTruncation,
    n: int = 0,
    p_window=(1e-6, 1e-2),
    points: int = 32,
    order: int = 4,
    inverse_sqrt: bool = False,
    a_init: float | None = None,
    tol: float = 1e-4,
) -> BranchFit:
    """Least-squares fit ``q_n(p) ~ sum_j c_j p**(j/2)`` on real ``p`` in ``p_window``.

    ``c`` and ``d`` are the ``p**0`` and ``p**(1/2)`` coefficients; the fit
    uses ``j = 0 .. 2 order + 1`` (plus ``j = -1`` when ``inverse_sqrt``)
    in the scaled variable ``sqrt(p / p_max)``. The fitted expansion is then
    checked off the real axis on the arc ``|p| = sqrt(p_min p_max)``,
    ``|arg p| <= pi/3``, using the principal square root.
    """
    lo, hi = p_window
    p = np.geomspace(lo, hi, points)
    vals = np.array([solve_modes(alpha, trunc, pk, a_init, tail=False, cond_limit=np.inf).q(n) for pk in p])
    x = np.sqrt(p / hi)
    powers = list(range(-1 if inverse_sqrt else 0, 2 * order + 2))
    basis = np.column_stack([x**j for j in powers])
    coef, *_ = np.linalg.lstsq(basis, vals, rcond=None)
    residual = float(np.max(np.abs(basis @ coef - vals)))
    phys = np.array([cj / math.sqrt(hi) ** j for cj, j in zip(coef, powers)])
    c = complex(phys[powers.index(0)])
    d = complex(phys[powers.index(1)])
    inv = complex(phys[0]) if inverse_sqrt else None
    gp = None
    if n == 0 and mean_case(alpha) in ("I", "II") and not inverse_sqrt:
        gp = g_prime(alpha, trunc, a_init)
    arc = math.sqrt(lo * hi) * np.exp(1j * np.linspace(-np.pi / 3, np.pi / 3, 7))
    arc_vals = np.array([solve_modes(alpha, trunc, pk, a_init, tail=False, cond_limit=np.inf).q(n) for pk in arc])
    arc_basis = np.column_stack([np.sqrt(arc / hi) ** j for j in powers])
    arc_residual = float(np.max(np.abs(arc_basis @ coef - arc_vals)) / (abs(c) + abs(d)))
    fit = BranchFit(n, c, d, residual, (lo, hi), phys, gp, inv, arc_residual)
    if residual > tol * (abs(c) + abs(d)):
        raise PoorFit(f"branch fit residual {residual:.3g} exceeds tolerance for mode {n}")
    return fit


# --- positivity of the drive quadratic form ------------------------------------


@dataclass(frozen=True)
class PositivityReport:
    min_sampled_alpha: float
    forms: np.ndarray
    min_eigenvalue: float
    witness: np.ndarray | None
    nonnegative: bool


def drive_form(alpha: FourierAlpha, T: np.ndarray) -> float:
    """``sum_{n,k} conj(T_n) alpha_{k-n} T_k`` for ``T`` on ``n = 1 .. len(T)``."""
    L = T.size
    H = toeplitz_form(alpha, L)
    return float(np.real(np.vdot(T, H @ T)))


def toeplitz_form(alpha: FourierAlpha, L: int) -> np.ndarray:
    H = np.zeros((L, L), dtype=complex)
    for k, c in alpha.coeffs.items():
        if abs(k) < L:
            H += c * np.eye(L, k=k)
    return H


def positivity_check(alpha: FourierAlpha, vectors: int = 100, length: int = 32, seed: int = 0) -> PositivityReport:
    """Sign of the quadratic form ``(T, alpha T)`` over one period, for ``T`` on positive modes.

    Equals the time average of ``alpha(t) |T(t)|**2`` with
    ``T(t) = sum_n T_n exp(-i n omega t)``. A negative smallest eigenvalue of
    the Toeplitz matrix yields the witness vector.
    """
    rng = np.random.default_rng(seed)
    forms = np.empty(vectors)
    for i in range(vectors):
        T = rng.standard_normal(length) + 1j * rng.standard_normal(length)
        forms[i] = drive_form(alpha, T)
    w, v = np.linalg.eigh(toeplitz_form(alpha, length))
    witness = v[:, 0] if w[0] < 0 else None
    min_alpha = float(np.min(alpha(np.linspace(0, alpha.period, 4096, endpoint=False))))
    scale = max(alpha.ell1_norm, 1e-300)
    nonneg = bool(np.all(forms >= -1e-12 * scale * length) and w[0] >= -1e-12 * scale)
    return PositivityReport(min_alpha, forms, float(w[0]), witness, nonneg)
