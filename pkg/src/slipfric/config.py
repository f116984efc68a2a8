"""Run configuration: defaults, INI config file, command-line overrides."""
from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional

from .core import G_DEFAULT, VehicleGeometry
from .detector import DEFAULT_REFRACTORY, Thresholds
from .errors import ConfigError, InputDomainError
from .metrics import DEFAULT_WINDOW
from .telemetry import DEFAULT_RATE

CONFIG_ENV = "SLIPFRIC_CONFIG"
SECTION = "slipfric"


@dataclass
class RunConfig:
    l_f: float = 0.165
    l_r: float = 0.165
    r_e: float = 0.05
    mass: float = 3.5
    g: float = G_DEFAULT
    delta_lin: Optional[float] = None
    delta_ang: Optional[float] = None
    refractory: float = DEFAULT_REFRACTORY
    window: float = DEFAULT_WINDOW
    k: int = 5
    seed: int = 0
    rate: float = DEFAULT_RATE
    mode: str = "strict"

    def __post_init__(self) -> None:
        if self.g <= 0:
            raise ConfigError(f"g must be positive, got {self.g!r}")
        if self.refractory < 0:
            raise ConfigError(f"refractory must be >= 0, got {self.refractory!r}")
        if self.window <= 0:
            raise ConfigError(f"window must be positive, got {self.window!r}")
        if self.rate <= 0:
            raise ConfigError(f"rate must be positive, got {self.rate!r}")
        if self.mode not in ("strict", "lenient"):
            raise ConfigError(f"mode must be strict or lenient, got {self.mode!r}")
        if (self.delta_lin is None) != (self.delta_ang is None):
            raise ConfigError("delta_lin and delta_ang must be given together")
        try:
            self.geometry
            self.thresholds
        except InputDomainError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def geometry(self) -> VehicleGeometry:
        return VehicleGeometry(self.l_f, self.l_r, self.r_e, self.mass)

    @property
    def thresholds(self) -> Optional[Thresholds]:
        if self.delta_lin is None:
            return None
        return Thresholds(self.delta_lin, self.delta_ang)

    def as_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value: Any) -> Any:
    kind = _TYPES[name]
    try:
        if kind == "int":
            return int(value)
        if kind == "str":
            return str(value)
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
            return None
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {name}: {value!r}") from None


def read_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path, encoding="utf-8")
    if not parser.has_section(SECTION):
        raise ConfigError(f"{path}: missing [{SECTION}] section")
    out = {}
    for key, value in parser.items(SECTION):
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"{path}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve_config(config_path: Optional[str | Path], overrides: Mapping[str, Any]) -> RunConfig:
    """Defaults, then the config file, then non-None command-line overrides."""
    values: dict[str, Any] = {}
    path = config_path or os.environ.get(CONFIG_ENV)
    if path:
        values.update(read_config_file(path))
    for key, value in overrides.items():
        if key in _TYPES and value is not None:
            values[key] = _coerce(key, value)
    return RunConfig(**values)
