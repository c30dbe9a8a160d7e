"""Charge dynamics and ionization observables for a periodically driven point interaction in 3D."""

from __future__ import annotations

__version__ = "0.1.0"

from .alpha_model import FourierAlpha, classify_resonance, genericity_residuals, geometric_alpha
from .charge_solver import ChargeTrajectory, apriori_bound, laplace_of_trajectory, solve_charge
from .config import ExperimentConfig, load_config
from .free_dynamics import BoundState, forcing_series
from .grid import TimeGrid
from .laplace_modes import ModeTruncation, branch_fit, scan_imaginary_axis, solve_modes
from .observables import ball_series, decay_fit, survival

__all__ = [
    "BoundState",
    "ChargeTrajectory",
    "ExperimentConfig",
    "FourierAlpha",
    "ModeTruncation",
    "TimeGrid",
    "apriori_bound",
    "ball_series",
    "branch_fit",
    "classify_resonance",
    "decay_fit",
    "forcing_series",
    "genericity_residuals",
    "geometric_alpha",
    "laplace_of_trajectory",
    "load_config",
    "scan_imaginary_axis",
    "solve_charge",
    "solve_modes",
    "survival",
]
