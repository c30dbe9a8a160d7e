"""Experiment configuration: JSON documents mapped onto frozen dataclasses."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any

from .alpha_model import FourierAlpha


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DriveConfig:
    omega: float = 10.0
    # (n, re, im) triples; both n and -n must be listed
    coefficients: tuple = ((0, -0.17957747154594767, 0.0), (1, 0.05, 0.0), (-1, 0.05, 0.0))
    resonant: int | None = None

    def model(self) -> FourierAlpha:
        return FourierAlpha.from_pairs(self.omega, self.coefficients)


@dataclass(frozen=True)
class GridConfig:
    h: float = 1e-3
    t_end: float = 200.0
    method: str = "fft"


@dataclass(frozen=True)
class ModeConfig:
    M: int = 64
    eps_ladder: tuple = (1e-3, 1e-4, 1e-5, 1e-6)
    s_points: int = 200
    fit_window: tuple = (1e-6, 1e-2)
    fit_order: int = 4
    duality_points: int = 10
    duality_re: tuple = (0.3, 1.5)
    duality_im: tuple = (-1.0, 1.0)


@dataclass(frozen=True)
class ObservableConfig:
    radii: tuple = (2.0,)
    decay_window: tuple = (50.0, 180.0)
    ball_stride: int = 20
    ball_nodes: int = 48
    cesaro_start: float = 20.0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs/default"
    formats: tuple = ("csv", "json")
    series_stride: int = 10


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "default"
    case: str = "auto"
    seed: int = 0
    drive: DriveConfig = field(default_factory=DriveConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    modes: ModeConfig = field(default_factory=ModeConfig)
    observables: ObservableConfig = field(default_factory=ObservableConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "ExperimentConfig":
        try:
            alpha = self.drive.model()
        except ValueError as exc:
            raise ConfigError(f"drive: {exc}") from exc
        if not self.grid.h > 0:
            raise ConfigError(f"grid.h must be positive, got {self.grid.h}")
        if not self.grid.t_end > self.grid.h:
            raise ConfigError("grid.t_end must exceed grid.h")
        if self.modes.M < alpha.support_radius:
            raise ConfigError(f"modes.M = {self.modes.M} is below the drive support radius {alpha.support_radius}")
        if self.case not in ("auto", "I", "II", "III"):
            raise ConfigError(f"case must be auto, I, II or III, got {self.case!r}")
        return self

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _tupled(value):
    if isinstance(value, list):
        return tuple(_tupled(v) for v in value)
    return value


def _build(cls, data: dict):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        if is_dataclass(default):
            if not isinstance(value, dict):
                raise ConfigError(f"{name} must be an object")
            kwargs[name] = _build(type(default), value)
        else:
            kwargs[name] = _tupled(value)
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data).validate()


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply ``key.sub=value`` assignments; values are parsed as JSON when possible."""
    data = config.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config section {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = _parse_value(text)
    return config_from_dict(data)


def with_output(config: ExperimentConfig, directory: str) -> ExperimentConfig:
    return replace(config, output=replace(config.output, directory=directory))
