"""Run configuration: TOML (or JSON) files mapped onto validated dataclasses."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from .coupled import LoopConfig
from .dual import OptimizerConfig
from .errors import ConfigError
from .forward import FixedPointConfig
from .geometry import GeometryConfig
from .grid import RefGrid
from .parabolic import SCHEMES
from .profiles import ProfileSpec, initial_data


@dataclass(frozen=True)
class GridSpec:
    n_left: int = 200
    n_right: int = 200
    n_time: int = 400
    quad_order: int = 64


@dataclass(frozen=True)
class InitialSpec:
    left: ProfileSpec = field(default_factory=ProfileSpec)
    right: ProfileSpec = field(default_factory=ProfileSpec)
    file: str | None = None


@dataclass(frozen=True)
class ProbeSpec:
    n_samples: int = 100
    n_paths: int = 5
    amplitude: float = 0.05


@dataclass(frozen=True)
class NegativeSpec:
    h_l_amplitudes: tuple[float, ...] = (0.0, -0.5, -1.0, -2.0, 0.5)


@dataclass(frozen=True)
class EpsStudySpec:
    ladder: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(frozen=True)
class RunConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    eps: float = 1e-3
    scheme: str = "crank-nicolson"
    seed: int = 0
    output_dir: str = "results"
    loop: LoopConfig = field(default_factory=LoopConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    fixed_point: FixedPointConfig = field(default_factory=FixedPointConfig)
    probe: ProbeSpec = field(default_factory=ProbeSpec)
    negative: NegativeSpec = field(default_factory=NegativeSpec)
    eps_study: EpsStudySpec = field(default_factory=EpsStudySpec)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {sorted(SCHEMES)}")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")

    def ref_grid(self) -> RefGrid:
        g = self.grid
        return RefGrid.from_geometry(self.geometry, g.n_left, g.n_right, g.n_time)

    def loop_config(self) -> LoopConfig:
        return dataclasses.replace(self.loop, scheme=self.scheme, optimizer=self.optimizer)

    def fixed_point_config(self) -> FixedPointConfig:
        return dataclasses.replace(self.fixed_point, scheme=self.scheme)

    def initial_data(self, grid: RefGrid | None = None):
        grid = grid or self.ref_grid()
        if self.initial.file:
            with np.load(self.initial.file) as data:
                p0, q0 = np.array(data["p0"], dtype=float), np.array(data["q0"], dtype=float)
            if p0.shape != (grid.n_left + 2,) or q0.shape != (grid.n_right + 2,):
                raise ConfigError("initial-data file does not match the grid")
            return p0, q0
        return initial_data(grid, self.initial.left, self.initial.right)

    def to_dict(self) -> dict:
        d = _plain(dataclasses.asdict(self))
        # scheme and optimizer are set once at top level and pushed down
        for section, keys in _DERIVED_KEYS.items():
            for k in keys:
                d[section].pop(k, None)
        return d

    def echo(self) -> str:
        """Canonical JSON echo of every effective value (stable byte-for-byte)."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


_TUPLE_FIELDS = {"omega_l", "omega_r", "support", "h_l_amplitudes", "ladder"}


_DERIVED_KEYS = {"loop": ("scheme", "optimizer"), "fixed_point": ("scheme",)}
_DERIVED_CLS = {LoopConfig: ("scheme", "optimizer"), FixedPointConfig: ("scheme",)}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init and f.name not in _DERIVED_CLS.get(cls, ())}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where or 'top level'}]: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        if sub is not None:
            kwargs[name] = _build(sub, value, f"{where}.{name}" if where else name)
        elif name in _TUPLE_FIELDS:
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


_NESTED = {
    (RunConfig, "geometry"): GeometryConfig,
    (RunConfig, "grid"): GridSpec,
    (RunConfig, "initial"): InitialSpec,
    (RunConfig, "loop"): LoopConfig,
    (RunConfig, "optimizer"): OptimizerConfig,
    (RunConfig, "fixed_point"): FixedPointConfig,
    (RunConfig, "probe"): ProbeSpec,
    (RunConfig, "negative"): NegativeSpec,
    (RunConfig, "eps_study"): EpsStudySpec,
    (InitialSpec, "left"): ProfileSpec,
    (InitialSpec, "right"): ProfileSpec,
}


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "")


def load_config(path) -> RunConfig:
    """Read a ``.toml`` (or ``.json``) run config; every field is revalidated."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"parse error in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    else:
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"parse error in {path}: {exc}") from exc
    return config_from_dict(data)
