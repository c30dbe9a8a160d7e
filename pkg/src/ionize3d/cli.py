"""Command-line front end: ``ionize3d <subcommand> --config <file> [--out <dir>] [--set key=value]...``.

Units throughout: hbar = 1, 2m = 1 (H0 = -Laplacian); alpha is an inverse
length, time and 1/omega share the unit of length squared.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .alpha_model import (
    FourierAlpha,
    NegativeMean,
    NegativeMeanResonant,
    classify_resonance,
    genericity_residuals,
)
from .charge_solver import (
    ChargeTrajectory,
    TimeGrid,
    apriori_bound,
    laplace_of_trajectory,
    solve_charge,
)
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config, with_output
from .free_dynamics import BoundState, forcing_series
from .laplace_modes import (
    ModeTruncation,
    branch_fit,
    compare_decompositions,
    initial_coupling,
    mean_case,
    near_resonance,
    probe_point,
    scan_imaginary_axis,
    solve_modes,
)
from .observables import ball_series, decay_fit, survival

UNITS = "hbar = 1, 2m = 1 (H0 = -Laplacian); alpha in inverse length; t in length**2"

SUBCOMMANDS = {
    "classify": ("classify",),
    "genericity": ("classify", "genericity"),
    "solve": ("classify", "solve"),
    "survival": ("classify", "genericity", "solve", "survival"),
    "modes": ("classify", "solve", "modes"),
    "branchfit": ("classify", "genericity", "branchfit"),
    "decayfit": ("classify", "genericity", "solve", "survival", "decayfit"),
    "full": ("classify", "genericity", "solve", "survival", "modes", "branchfit", "decayfit"),
}

DECAY_RANGE = (-1.7, -1.3)


@dataclass
class RunReport:
    config: dict
    stages: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.errors and all(self.flags.values())

    def to_dict(self) -> dict:
        return {
            "version": __version__,
            "units": UNITS,
            "config": self.config,
            "stages": _jsonable(self.stages),
            "acceptance": dict(self.flags),
            "errors": dict(self.errors),
            "timing": dict(self.timing),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# --- serialization -----------------------------------------------------------------


def emit_series(path: str | Path, columns: dict) -> Path:
    """Write a CSV with a header row and 17 significant digits; column order as given."""
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    rows = len(arrays[0]) if arrays else 0
    if any(len(a) != rows for a in arrays):
        raise ValueError(f"{path}: columns have different lengths")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for i in range(rows):
                writer.writerow([format(float(a[i]), ".17g") for a in arrays])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_series(path: str | Path) -> dict:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


def emit_report(path: str | Path, report: RunReport) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


# --- pipeline ----------------------------------------------------------------------


class _Pipeline:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.alpha: FourierAlpha = config.drive.model()
        self.state = BoundState(initial_coupling(self.alpha))
        self.report = RunReport(config.to_dict())
        self.traj: ChargeTrajectory | None = None
        self.theta = None
        self.balls = []
        self.generic: bool | None = None

    @property
    def ionizing_scope(self) -> bool:
        """Decay flags apply to driven systems that are generic or have alpha(t) >= 0."""
        if self.alpha.is_constant:
            return False
        nonneg = float(np.min(self.alpha(np.linspace(0, self.alpha.period, 2048)))) >= 0
        return bool(self.generic) or nonneg

    def classify(self):
        rc = classify_resonance(self.alpha, resonant=self.config.drive.resonant)
        out = {"class": rc.name, "case": mean_case(self.alpha), "alpha_at_zero": self.alpha.value_at_zero,
               "initial_coupling": self.state.alpha}
        if isinstance(rc, NegativeMean):
            out.update(n_bar=rc.n_bar, p_bar=rc.p_bar)
        if isinstance(rc, NegativeMeanResonant):
            out.update(N=rc.N)
        self.resonance = rc
        return out

    def genericity(self):
        rep = genericity_residuals(self.alpha)
        self.generic = rep.verdict == "Generic"
        return {"verdict": rep.verdict, "final_residual": rep.final_residual, "plateau": rep.plateau,
                "ill_conditioned": rep.ill_conditioned, "threshold": rep.threshold}

    def solve(self):
        g = self.config.grid
        grid = TimeGrid.span(g.h, g.t_end)
        self.traj = solve_charge(self.alpha, forcing_series(self.state, grid), grid, g.method)
        mags = np.abs(self.traj.q)
        bound = apriori_bound(self.alpha, self.state)
        self.report.flags["apriori_bound"] = bound.holds(self.traj)
        out = {"count": grid.count, "residual_norm": self.traj.residual_norm, "q_end": self.traj.q[-1],
               "bound_rate": bound.rate, "bound_constant": bound.constant}
        if self.alpha.is_constant and self.alpha.mean < 0:
            drift = float(np.max(np.abs(mags - mags[0])) / mags[0])
            out["stationary_drift"] = drift
            self.report.flags["stationary"] = drift < 1e-3
        return out

    def survival(self):
        sv = survival(self.traj, self.state)
        self.theta = sv
        late = sv.times >= 1.0
        out = {"theta_end": sv.theta[-1], "max_abs_theta": float(np.max(sv.modulus)),
               "z1_constant": float(np.max(np.abs(sv.z1[late]) * sv.times[late] ** 1.5))}
        if "stationary" in self.report.flags:
            drift = float(np.max(np.abs(sv.modulus - 1.0)))
            out["theta_drift"] = drift
            self.report.flags["stationary"] = self.report.flags["stationary"] and drift < 1e-3
        obs = self.config.observables
        balls = {}
        for R in obs.radii:
            bs = ball_series(self.traj, self.state, R, obs.ball_stride, obs.ball_nodes)
            self.balls.append(bs)
            i0 = int(np.searchsorted(bs.times, obs.cesaro_start))
            avg = bs.time_average
            entry = {"final": float(bs.prob[-1]), "cesaro_start": float(avg[i0]), "cesaro_end": float(avg[-1]),
                     "quadrature_error": bs.quadrature_error}
            if self.ionizing_scope:
                ok = bool(np.all(np.diff(avg[i0:]) < 0) and avg[-1] < 0.25 * avg[i0])
                self.report.flags[f"scattering_R{R:g}"] = ok
            balls[f"{R:g}"] = entry
        out["ball"] = balls
        return out

    def modes(self):
        mc = self.config.modes
        trunc = ModeTruncation(mc.M, self.config.case)
        rng = np.random.default_rng(self.config.seed)
        gaps = []
        points = []
        T = self.traj.grid.t_end
        for _ in range(mc.duality_points):
            p = complex(rng.uniform(*mc.duality_re), rng.uniform(*mc.duality_im))
            if p.real * T < 10:
                continue
            q0 = solve_modes(self.alpha, trunc, p).q0
            lq = laplace_of_trajectory(self.traj, p).value
            gaps.append(abs(q0 - lq) / abs(q0))
            points.append(p)
        out = {"duality_points": points, "duality_gaps": gaps}
        if gaps:
            self.report.flags["laplace_duality"] = max(gaps) <= 1e-2
        s = np.linspace(0.0, self.alpha.omega, mc.s_points, endpoint=False)
        scan = scan_imaginary_axis(self.alpha, trunc, s, min(mc.eps_ladder))
        out.update(scan_max_condition=scan.max_condition, scan_flagged=scan.s[scan.flagged])
        if mean_case(self.alpha) == "III":
            self.report.flags["case_iii_regularity"] = scan.max_condition < 1e6
        return out

    def branchfit(self):
        if self.alpha.is_constant:
            return {"skipped": "constant coupling: modes decouple and the bound state persists"}
        mc = self.config.modes
        trunc = ModeTruncation(mc.M, self.config.case)
        out = {}
        rc = self.resonance
        if isinstance(rc, NegativeMeanResonant):
            pr = probe_point(self.alpha, trunc, 0.0, rc.N, mc.eps_ladder)
            out.update(n=rc.N, probe_abs=np.abs(pr.values), variation=pr.variation)
            self.report.flags["branch_no_pole"] = pr.variation < 10
            return out
        fit = branch_fit(self.alpha, trunc, 0, mc.fit_window, order=mc.fit_order)
        out.update(n=0, c=fit.c, d=fit.d, relative_residual=fit.relative_residual, arc_residual=fit.arc_residual)
        ok = fit.relative_residual <= 1e-4 and fit.arc_residual <= 1e-4 and abs(fit.d) > 0
        if fit.g_prime is not None:
            out.update(g_prime=fit.g_prime, g_prime_gap=fit.g_prime_gap)
            ok = ok and fit.g_prime_gap <= 1e-3
        if self.generic is not False:
            self.report.flags["branch_structure"] = ok
        if near_resonance(self.alpha) is not None:
            chk = compare_decompositions(self.alpha, trunc, mc.eps_ladder)
            out["near_resonant"] = {"paired": chk.paired, "gaps": chk.gaps,
                                    "extrapolation_error": chk.extrapolation_error, "agree": chk.agree}
        return out

    def decayfit(self):
        if self.alpha.is_constant:
            return {"skipped": "constant coupling: no ionization to fit"}
        window = tuple(self.config.observables.decay_window)
        period = self.alpha.period if not self.alpha.is_constant else None
        t = self.traj.times
        out = {}
        for name, series in (("q", self.traj.q), ("theta", self.theta.theta)):
            rep = decay_fit(t, series, window, period=period, min_r2=0.0)
            out[name] = {"exponent": rep.exponent, "amplitude": rep.amplitude, "r_squared": rep.r_squared,
                         "samples": rep.samples, "remainder_rate": rep.remainder_rate,
                         "exponential_share": rep.exponential_share, "envelope": rep.envelope,
                         "asymptotic_window": rep.exponential_share is not None and rep.exponential_share < 0.05}
            if self.ionizing_scope:
                ok = DECAY_RANGE[0] <= rep.exponent <= DECAY_RANGE[1] and rep.r_squared >= 0.95
                self.report.flags[f"decay_exponent_{name}"] = ok
        return out

    def write(self, out_dir: Path):
        formats = self.config.output.formats
        stride = max(1, self.config.output.series_stride)
        if "csv" in formats and self.traj is not None:
            q = self.traj.q[::stride]
            cols = {"t": self.traj.times[::stride], "re_q": q.real, "im_q": q.imag, "abs_q": np.abs(q)}
            if self.theta is not None:
                th = self.theta.theta[::stride]
                cols.update(re_theta=th.real, im_theta=th.imag, abs_theta=np.abs(th))
            emit_series(out_dir / "series.csv", cols)
            for bs in self.balls:
                emit_series(out_dir / f"ball_R{bs.radius:g}.csv",
                            {"t": bs.times, "prob": bs.prob, "cesaro_mean": bs.time_average})
        if "json" in formats:
            emit_report(out_dir / "report.json", self.report)


def run_pipeline(config: ExperimentConfig, stages=SUBCOMMANDS["full"], out_dir: str | Path | None = None) -> RunReport:
    """Run the named stages in order; a failing stage is recorded and its dependents skipped."""
    pipe = _Pipeline(config)
    needs = {"survival": "solve", "modes": "solve", "decayfit": "survival"}
    for stage in stages:
        dep = needs.get(stage)
        if dep is not None and dep in pipe.report.errors:
            pipe.report.errors[stage] = f"skipped: {dep} failed"
            continue
        start = time.perf_counter()
        try:
            pipe.report.stages[stage] = getattr(pipe, stage)()
        except Exception as exc:  # recorded per stage, partial artifacts retained
            pipe.report.errors[stage] = f"{type(exc).__name__}: {exc}"
        pipe.report.timing[stage] = round(time.perf_counter() - start, 3)
    out = Path(out_dir if out_dir is not None else config.output.directory)
    pipe.write(out)
    return pipe.report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ionize3d", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ionize3d {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry by dotted path; may repeat")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = apply_overrides(load_config(args.config), args.set)
    except ConfigError as exc:
        print(f"ionize3d: {exc}", file=sys.stderr)
        return 2
    if args.out:
        config = with_output(config, args.out)
    report = run_pipeline(config, SUBCOMMANDS[args.command])
    for name, ok in report.flags.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    for stage, msg in report.errors.items():
        print(f"stage {stage} failed: {msg}", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
