"""Strict TOML configuration: every key has a default, unknown keys are errors."""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SystemConfig:
    kind: str = "reeds_shepp"
    turning_radius: float = 0.5
    rho: float = 1.0
    u_max: float = 1.0
    v_max: float = 0.5


@dataclass(frozen=True)
class SamplingConfig:
    kind: str = "sobol"
    count: int = 0  # 0 picks 10000 (3-dim) or 20000 (4-dim)
    seed: int = 0


@dataclass(frozen=True)
class TilingConfig:
    enabled: bool = True
    tile_extent: float = 2.0
    neighbor_radius: int = 1


@dataclass(frozen=True)
class DispersionConfig:
    target: float = 1.05
    max_vertices: int = 512


@dataclass(frozen=True)
class PlannerConfig:
    goal_cost_tolerance: float = 0.0  # 0 means the graph dispersion
    collision_resolution: float = 0.0  # 0 means dispersion / 10
    max_collision_checks: int = 100_000
    heuristic: str = "zero"


@dataclass(frozen=True)
class BenchConfig:
    maps: int = 20
    seed: int = 0
    map_width: int = 64
    map_height: int = 64
    map_resolution: float = 0.25
    corridor_width: float = 1.5
    obstacle_density: float = 0.2
    margin: float = 1.0
    graph_vertices: list = field(default_factory=lambda: [5, 10, 20])
    baseline_durations: list = field(default_factory=lambda: [0.1, 0.3, 0.5])
    baseline_branching: list = field(default_factory=lambda: [3, 4, 5])
    heuristic: str = "free_space_steer"
    stop_on_budget: bool = True
    completeness_trials: int = 0
    completeness_margin: float = 0.1  # delta = 2 d + margin * d


@dataclass(frozen=True)
class Config:
    system: SystemConfig = SystemConfig()
    sampling: SamplingConfig = SamplingConfig()
    tiling: TilingConfig = TilingConfig()
    dispersion: DispersionConfig = DispersionConfig()
    planner: PlannerConfig = PlannerConfig()
    bench: BenchConfig = BenchConfig()

    def to_dict(self) -> dict:
        return asdict(self)


_SECTION_TYPES = {
    "system": SystemConfig,
    "sampling": SamplingConfig,
    "tiling": TilingConfig,
    "dispersion": DispersionConfig,
    "planner": PlannerConfig,
    "bench": BenchConfig,
}


def _coerce(section, key, default, value):
    where = f"[{section}] {key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list")
        return list(value)
    return value


def from_dict(doc: dict) -> Config:
    cfg = Config()
    for section, body in doc.items():
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown section [{section}]; expected one of {sorted(_SECTION_TYPES)}")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        current = getattr(cfg, section)
        known = {f.name for f in fields(current)}
        updates = {}
        for key, value in body.items():
            if key not in known:
                raise ConfigError(f"unknown key '{key}' in [{section}]; expected one of {sorted(known)}")
            updates[key] = _coerce(section, key, getattr(current, key), value)
        cfg = replace(cfg, **{section: replace(current, **updates)})
    validate(cfg)
    return cfg


def validate(cfg: Config) -> None:
    s = cfg.system
    if s.kind not in ("reeds_shepp", "double_integrator"):
        raise ConfigError(f"[system] kind must be reeds_shepp or double_integrator, got {s.kind!r}")
    for name in ("turning_radius", "rho", "u_max", "v_max"):
        if not getattr(s, name) > 0:
            raise ConfigError(f"[system] {name} must be positive")
    if cfg.sampling.kind not in ("sobol", "halton", "uniform_random"):
        raise ConfigError(f"[sampling] kind {cfg.sampling.kind!r} is not supported")
    if cfg.sampling.count < 0:
        raise ConfigError("[sampling] count must be >= 0")
    if not cfg.tiling.tile_extent > 0:
        raise ConfigError("[tiling] tile_extent must be positive")
    if cfg.tiling.neighbor_radius < 0:
        raise ConfigError("[tiling] neighbor_radius must be >= 0")
    d = cfg.dispersion.target
    if not (d > 0 or math.isinf(d)):
        raise ConfigError("[dispersion] target must be positive")
    if cfg.dispersion.max_vertices < 1:
        raise ConfigError("[dispersion] max_vertices must be >= 1")
    p = cfg.planner
    if p.goal_cost_tolerance < 0 or p.collision_resolution < 0:
        raise ConfigError("[planner] tolerances must be >= 0")
    if p.max_collision_checks < 1:
        raise ConfigError("[planner] max_collision_checks must be >= 1")
    for where, h in (("planner", p.heuristic), ("bench", cfg.bench.heuristic)):
        if h not in ("zero", "free_space_steer"):
            raise ConfigError(f"[{where}] heuristic must be zero or free_space_steer")
    b = cfg.bench
    if b.maps < 0 or b.map_width < 3 or b.map_height < 3 or not b.map_resolution > 0:
        raise ConfigError("[bench] map settings out of range")
    if any((not isinstance(n, int)) or n < 1 for n in b.graph_vertices):
        raise ConfigError("[bench] graph_vertices must be positive integers")
    if any((not isinstance(n, int)) or n < 2 for n in b.baseline_branching):
        raise ConfigError("[bench] baseline_branching entries must be integers >= 2")
    if any(not (isinstance(t, (int, float)) and t > 0) for t in b.baseline_durations):
        raise ConfigError("[bench] baseline_durations must be positive")


def load(path) -> Config:
    try:
        text = Path(path).read_bytes()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = tomllib.loads(text.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc)


def dense_count(cfg: Config) -> int:
    if cfg.sampling.count:
        return cfg.sampling.count
    return 10_000 if cfg.system.kind == "reeds_shepp" else 20_000
