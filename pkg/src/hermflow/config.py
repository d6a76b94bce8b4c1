"""Run configuration: nested YAML sections mapped onto dataclasses.

Unknown keys anywhere in the tree are rejected.  ``RunConfig.to_dict`` is
the canonical echo written into every artifact.
"""
from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    n: int = 1
    res: int = 64
    periods: list[float] | None = None


@dataclass
class MetricConfig:
    kind: str = "flat"            # flat | perturbed | conformal
    scale: float = 1.0
    seed: int | None = None       # defaults to the run seed
    eps: float = 0.05
    modes: int = 2
    axes: list[int] | None = None
    u_file: str | None = None     # conformal factor snapshot
    u_amplitude: float = 0.1      # seeded conformal factor when no file is given


@dataclass
class ForcingConfig:
    kind: str = "zero"            # zero | linear | expression
    lam: float = 1.0
    h_file: str | None = None
    h_amplitude: float = 0.0      # seeded band-limited h when no file is given
    expression: str | None = None


@dataclass
class InitialConfig:
    kind: str = "random"          # zero | constant | cosine | random | file
    amplitude: float = 0.1
    modes: int = 2
    file: str | None = None


@dataclass
class FlowConfig:
    t_end: float = 0.05
    cfl: float = 0.4
    snapshot_every: float = 0.01
    dt_max: float | None = None
    initial: InitialConfig = field(default_factory=InitialConfig)


@dataclass
class EstimatesConfig:
    delta: float = 0.05
    barrier_A: float = 10.0
    barrier_alpha: float = 1.0


@dataclass
class GeometryConfig:
    """The identity suite carries its own grid and metric family."""
    n: int = 2
    res: int = 32
    eps: float = 0.05
    modes: int = 2
    axes: list[int] | None = field(default_factory=lambda: [0, 1, 2])
    metrics: int = 20
    threshold: float = 1e-6
    doubling: bool = True
    shrink: float = 10.0
    floor: float = 1e-11


@dataclass
class EllipticConfig:
    normalization: str = "none"
    tol: float = 1e-10
    max_iter: int = 200
    manufactured_amplitude: float = 0.1
    lam: float = 1.0
    starts: int = 2


@dataclass
class SmoothingConfig:
    levels: list[float] = field(default_factory=lambda: [8, 16, 32, 64])
    t_end: float = 0.1
    snapshot_every: float = 0.01
    amplitudes: list[float] = field(default_factory=lambda: [0.3, 0.3])
    phases: list[float] = field(default_factory=lambda: [0.0, math.pi / 2])
    wavenumbers: list[int] = field(default_factory=lambda: [1, 1])
    tau_factor: float = 2.0
    lam: float = 1.0
    c_factor: float = 1.0
    ratio_limit: float = 10.0
    cauchy_factor: float = 1.5
    data_bound: float = 1.0
    write_trajectories: bool = False


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "out"
    threads: int = 1
    grid: GridConfig = field(default_factory=GridConfig)
    metric: MetricConfig = field(default_factory=MetricConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    estimates: EstimatesConfig = field(default_factory=EstimatesConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    elliptic: EllipticConfig = field(default_factory=EllipticConfig)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def artifact_dict(self) -> dict:
        """The echo embedded in artifacts; the output location is left out so
        that the same run written to two directories hashes identically."""
        d = self.to_dict()
        d.pop("out")
        return d


def _coerce(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or (origin is not None and type(None) in args):
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a section, got {type(value).__name__}")
        return _build(tp, value, path)
    if origin is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        return [_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    return value


def _build(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        where = path or "top level"
        raise ConfigError(f"unknown key(s) at {where}: {', '.join(map(str, unknown))}")
    kwargs = {k: _coerce(hints[k], v, f"{path}.{k}" if path else k) for k, v in data.items()}
    return cls(**kwargs)


def from_dict(data: dict | None) -> RunConfig:
    cfg = _build(RunConfig, data or {})
    validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return from_dict({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    return from_dict(data)


def validate(cfg: RunConfig) -> None:
    g = cfg.grid
    if g.n not in (1, 2):
        raise ConfigError("grid.n must be 1 or 2")
    if g.res < 8 or g.res % 2:
        raise ConfigError("grid.res must be even and at least 8")
    if g.periods is not None and len(g.periods) != 2 * g.n:
        raise ConfigError(f"grid.periods needs {2 * g.n} entries")
    if cfg.metric.kind not in ("flat", "perturbed", "conformal"):
        raise ConfigError(f"metric.kind {cfg.metric.kind!r} not recognised")
    if cfg.forcing.kind not in ("zero", "linear", "expression"):
        raise ConfigError(f"forcing.kind {cfg.forcing.kind!r} not recognised")
    if cfg.forcing.kind == "expression" and not cfg.forcing.expression:
        raise ConfigError("forcing.expression is required for kind 'expression'")
    if cfg.flow.initial.kind not in ("zero", "constant", "cosine", "random", "file"):
        raise ConfigError(f"flow.initial.kind {cfg.flow.initial.kind!r} not recognised")
    if cfg.flow.t_end <= 0:
        raise ConfigError("flow.t_end must be positive")
    if cfg.flow.snapshot_every <= 0 or cfg.flow.cfl <= 0:
        raise ConfigError("flow.snapshot_every and flow.cfl must be positive")
    if cfg.elliptic.normalization not in ("none", "mean-zero", "symmetric-sup"):
        raise ConfigError("elliptic.normalization must be none, mean-zero or symmetric-sup")
    s = cfg.smoothing
    if len(s.levels) < 3:
        raise ConfigError("smoothing.levels needs at least 3 levels")
    if list(s.levels) != sorted(set(s.levels)):
        raise ConfigError("smoothing.levels must be strictly increasing")
    if not (len(s.amplitudes) == len(s.phases) == len(s.wavenumbers)):
        raise ConfigError("smoothing.amplitudes, phases and wavenumbers must have equal length")
    if s.t_end <= 0:
        raise ConfigError("smoothing.t_end must be positive")
    gc = cfg.geometry
    if gc.n not in (1, 2) or gc.res < 8 or gc.res % 2:
        raise ConfigError("geometry.n must be 1 or 2 and geometry.res even and at least 8")
    if gc.axes is not None and any(a < 0 or a >= 2 * gc.n for a in gc.axes):
        raise ConfigError("geometry.axes out of range")
    if cfg.geometry.metrics < 1:
        raise ConfigError("geometry.metrics must be at least 1")
    if cfg.threads < 1:
        raise ConfigError("threads must be at least 1")


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
