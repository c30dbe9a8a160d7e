"""Compare the mode-system value q_0(p) with the Laplace transform of a time-domain run.

Also reports how q_0(p) settles as the truncation half-width M grows.
"""

from __future__ import annotations

import argparse

import numpy as np

from ionize3d.alpha_model import FourierAlpha
from ionize3d.charge_solver import laplace_of_trajectory, solve_charge
from ionize3d.free_dynamics import BoundState, forcing_series
from ionize3d.grid import TimeGrid
from ionize3d.laplace_modes import ModeTruncation, initial_coupling, solve_modes


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--omega", type=float, default=10.0)
    parser.add_argument("--a0", type=float, default=-1 / (4 * np.pi) - 0.1)
    parser.add_argument("--a1", type=float, default=0.05)
    parser.add_argument("--h", type=float, default=1e-3)
    parser.add_argument("--t-end", type=float, default=200.0)
    args = parser.parse_args()
    alpha = FourierAlpha(args.omega, {0: args.a0, 1: args.a1, -1: args.a1})
    state = BoundState(initial_coupling(alpha))
    grid = TimeGrid.span(args.h, args.t_end)
    traj = solve_charge(alpha, forcing_series(state, grid), grid)
    for p in (0.3, 0.5 + 1j, 1.0 - 0.5j, 1.5):
        lt = laplace_of_trajectory(traj, p)
        line = [f"p = {p!s:>10}", f"time {lt.value:.10f}"]
        for M in (8, 32, 64):
            sol = solve_modes(alpha, ModeTruncation(M), p)
            line.append(f"M={M}: gap {abs(sol.q0 - lt.value) / abs(sol.q0):.2e} tail {sol.tail_bound:.1e}")
        print("  ".join(line))


if __name__ == "__main__":
    main()
