"""INI-style run configuration with embedded defaults.

Sections: [grid], [solver], [probe], [directions].  Every value has a
default; the effective configuration (defaults + overrides) is dumped into
the run manifest so results are reproducible from the manifest alone.
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field

from .grid import GridSpec
from .norms import ZkConfig


class ConfigError(ValueError):
    pass


@dataclass
class SolverSection:
    eps: float = 0.01
    max_iters: int = 50
    tol: float = 1e-10
    dealias: bool = True
    track_fnorm: bool = True
    shells: tuple[int, ...] = (0, 1)
    crosscheck: bool = False
    splitstep_steps: int = 400
    crosscheck_time: float = 0.5


@dataclass
class ProbeSection:
    trials: int | None = None  # None: per-estimate defaults
    max_params: int | None = None
    k_y: int = 4
    desk_offset: int = 2


@dataclass
class DirectionsSection:
    delta: float = 0.2
    max_height: int = 4
    n_check: int = 10_000


@dataclass
class RunConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverSection = field(default_factory=SolverSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    directions: DirectionsSection = field(default_factory=DirectionsSection)

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "solver": asdict(self.solver),
            "probe": asdict(self.probe),
            "directions": asdict(self.directions),
        }


def _coerce(value: str, like):
    if isinstance(like, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {value!r}")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        return tuple(int(t) for t in value.replace(",", " ").split())
    return value


def load_config(path: str | None) -> RunConfig:
    """Parse an INI file over the defaults; unknown keys are errors."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    for section in parser.sections():
        if section == "grid":
            fields = cfg.grid.to_dict()
            for key, value in parser.items(section):
                if key not in fields:
                    raise ConfigError(f"unknown grid key {key!r}")
                fields[key] = _coerce(value, fields[key])
            try:
                cfg.grid = GridSpec.from_dict(fields)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        elif section in ("solver", "probe", "directions"):
            target = getattr(cfg, section)
            for key, value in parser.items(section):
                if not hasattr(target, key):
                    raise ConfigError(f"unknown {section} key {key!r}")
                cur = getattr(target, key)
                if cur is None:
                    # optional ints
                    setattr(target, key, int(value))
                else:
                    setattr(target, key, _coerce(value, cur))
        else:
            raise ConfigError(f"unknown config section {section!r}")
    if cfg.solver.tol <= 0 or cfg.solver.eps <= 0:
        raise ConfigError("solver tolerances must be positive")
    if not 0 < cfg.directions.delta < 1:
        raise ConfigError("directions.delta must be in (0,1)")
    return cfg


def zk_from_probe(p: ProbeSection) -> ZkConfig:
    return ZkConfig(k_y=p.k_y, desk_offset=p.desk_offset)
