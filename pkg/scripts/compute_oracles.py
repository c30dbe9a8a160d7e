"""Regenerate the frozen reference values in tests/oracles.py.

Every number is computed with mpmath from momentum-space integrals or
elementary closed forms; nothing here imports the package under test.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 30
ROT = mp.exp(-1j * mp.pi / 4)  # k = ROT u turns exp(-i k^2 t) into exp(-u^2 t)


def phi_hat(k, kappa):
    return mp.sqrt(kappa / (2 * mp.pi)) * 4 * mp.pi / (k * k + kappa * kappa)


def forcing(t, kappa):
    """Free evolution of the bound state at the origin, by the rotated momentum integral."""
    g = lambda u: (ROT * u) ** 2 * phi_hat(ROT * u, kappa) * mp.exp(-u * u * t) * ROT
    return mp.quad(g, [0, mp.inf]) / (2 * mp.pi**2)


def dawson(x):
    return x * mp.hyp1f1(1, 1.5, -x * x)


def rhs(t, kappa):
    """Abel transform of the forcing; the time integral of exp(-u^2 s) / sqrt(t - s) is 2 F(u sqrt t) / u."""
    c = 4 * mp.sqrt(mp.pi * 1j)
    g = lambda u: (ROT * u) ** 2 * phi_hat(ROT * u, kappa) * ROT * 2 * dawson(u * mp.sqrt(t)) / u
    return c * mp.quad(g, [0, 1, 10, mp.inf]) / (2 * mp.pi**2)


def overlap(t, kappa):
    g = lambda u: (ROT * u) ** 2 * phi_hat(ROT * u, kappa) ** 2 * mp.exp(-u * u * t) * ROT
    return mp.quad(g, [0, mp.inf]) / (2 * mp.pi**2)


def rhs_laplace(p, kappa):
    q_phi = 4 * mp.pi * mp.sqrt(kappa / (2 * mp.pi))
    z = lambda t: kappa * mp.sqrt(1j * t)
    R = lambda t: q_phi * mp.exp(z(t) ** 2) * mp.erfc(z(t))
    return mp.quad(lambda t: R(t) * mp.exp(-p * t), [0, 1, 10, mp.inf])


def gaussian_evolved(sigma, t, r):
    """exp(-i H0 t) of (pi sigma^2)^{-3/4} exp(-x^2 / (2 sigma^2)) at radius r, by the radial Fourier integral."""
    amp = (mp.pi * sigma**2) ** mp.mpf(-0.75) * (2 * mp.pi * sigma**2) ** mp.mpf(1.5)
    g = lambda k: k * mp.sin(k * r) * amp * mp.exp(-k * k * sigma**2 / 2 - 1j * k * k * t)
    return mp.quad(g, [0, mp.inf]) / (2 * mp.pi**2 * r)


def show(name, z):
    z = mp.mpc(z)
    print(f"{name} = complex({float(z.real)!r}, {float(z.imag)!r})")


if __name__ == "__main__":
    for kappa, tag in ((1, "K1"), (mp.mpf("0.8"), "K08")):
        for t in ("0.5", "2"):
            show(f"FORCING_{tag}_T{t.replace('.', 'p')}", forcing(mp.mpf(t), kappa))
            show(f"RHS_{tag}_T{t.replace('.', 'p')}", rhs(mp.mpf(t), kappa))
            show(f"OVERLAP_{tag}_T{t.replace('.', 'p')}", overlap(mp.mpf(t), kappa))
    for p in ("0.5", "1", "2"):
        show(f"RHS_LAPLACE_K1_P{p.replace('.', 'p')}", rhs_laplace(mp.mpf(p), 1))
    show("GAUSS_S1_T0p7_R1p3", gaussian_evolved(mp.mpf(1), mp.mpf("0.7"), mp.mpf("1.3")))
