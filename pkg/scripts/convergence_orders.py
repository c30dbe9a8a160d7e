"""Observed order of the product-trapezoid charge solver on manufactured solutions.

Prints the order between successive halvings of the step for several smooth
solutions. The orders approach 2 from below with a deficit shrinking like
sqrt(h), the signature of the h**2.5 term that product integration against
(t - s)**-1/2 adds to the h**2 interpolation error.
"""

from __future__ import annotations

import argparse
import math

import numpy as np
from scipy import integrate

from ionize3d.alpha_model import FourierAlpha
from ionize3d.charge_solver import C_KERNEL, convergence_study
from ionize3d.free_dynamics import rhs_series
from ionize3d.grid import TimeGrid

SOLUTIONS = {
    "exp(-t)": lambda t: np.exp(-t),
    "cos(t)": np.cos,
    "1/(1+t)": lambda t: 1 / (1 + t),
    "exp(t)": np.exp,
}


def manufactured(alpha: FourierAlpha, u):
    def rhs(t: float) -> complex:
        if t == 0:
            return complex(u(0.0))
        val, _ = integrate.quad(
            lambda s: alpha(s) * u(s), 0, t, weight="alg", wvar=(0, -0.5), epsabs=1e-15, epsrel=1e-13
        )
        return u(t) + C_KERNEL * val

    return lambda g: rhs_series(np.array([rhs(t) for t in g.times]), g)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-end", type=float, default=1.0)
    parser.add_argument("--coarsest", type=float, default=8e-3)
    parser.add_argument("--levels", type=int, default=5)
    args = parser.parse_args()
    alpha = FourierAlpha(4.0, {0: -0.2, 1: 0.1, -1: 0.1})
    steps = [args.coarsest / 2**k for k in range(args.levels)]
    grids = [TimeGrid.span(h, args.t_end) for h in steps]
    print("h: " + " ".join(f"{h:.2e}" for h in steps))
    for name, u in SOLUTIONS.items():
        rep = convergence_study(alpha, manufactured(alpha, u), grids, reference=lambda t, u=u: u(t) + 0j)
        orders = " ".join(f"{o:.4f}" for o in rep.orders)
        print(f"{name:8s} orders {orders}  finest error {rep.errors[-1]:.2e}")
    print(f"sqrt(2) deficit ratio expected for an h**2.5 correction: {math.sqrt(2):.3f}")


if __name__ == "__main__":
    main()
