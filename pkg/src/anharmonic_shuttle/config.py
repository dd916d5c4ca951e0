"""Scenario configuration: a TOML file of flat sections.

Keys may be written as tables (``[trap]`` then ``omega0 = ...``) or as dotted
keys (``trap.omega0 = ...``); both parse to the same nested mapping. Unknown
sections or keys are rejected so typos never pass silently.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib
import numpy as np
import tomli_w

from .tdse import Frame, GridSpec, default_grid
from .trajectory import ProtocolKind, ProtocolSpec
from .trap_model import RB87_MASS, ConfigurationError, PotentialKind, TrapSpec, TweezerSpec, derive_trap

INITIAL_STATES = ("harmonic", "anharmonic")


@dataclass(frozen=True)
class TrapSection:
    mass: float = RB87_MASS
    omega0: Optional[float] = 2 * math.pi * 20
    depth: Optional[float] = None
    waist: Optional[float] = 50 * 1060e-9
    wavelength: Optional[float] = 1060e-9
    rayleigh: Optional[float] = None
    distance: float = 1e-2


@dataclass(frozen=True)
class ProtocolSection:
    variant: str = "bounded"
    tf: float = 0.052
    # absolute bound in metres; when absent it is delta_ratio * delta0(tf)
    delta: Optional[float] = None
    delta_ratio: float = 0.89


@dataclass(frozen=True)
class SimulationSection:
    kind: str = "quartic"
    compensate: bool = False
    initial: str = "harmonic"
    frame: str = "comoving"
    n_points: int = 4096
    half_width: Optional[float] = None
    dt: Optional[float] = None
    tol: float = 1e-8
    max_halvings: int = 4
    snapshots: int = 0


@dataclass(frozen=True)
class SweepSection:
    # defaults to the feasibility interval [tf_min, tf_star] of the bound
    tf_start: Optional[float] = None
    tf_stop: Optional[float] = None
    tf_count: int = 9
    deltas: Tuple[float, ...] = ()
    protocols: Tuple[str, ...] = ("bounded", "unbounded", "polynomial5", "cubic")
    kinds: Tuple[str, ...] = ("harmonic", "quartic", "gaussian")


@dataclass(frozen=True)
class OutputSection:
    prefix: str = ""
    samples: int = 4097


@dataclass(frozen=True)
class ScenarioConfig:
    trap: TrapSection = field(default_factory=TrapSection)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        validate(self)

    def trap_spec(self) -> TrapSpec:
        t = self.trap
        tweezer = TweezerSpec(waist=t.waist, wavelength=t.wavelength, depth=t.depth, rayleigh=t.rayleigh, omega0=t.omega0)
        return derive_trap(tweezer, t.mass, t.distance)

    def delta(self, trap: Optional[TrapSpec] = None) -> float:
        if self.protocol.delta is not None:
            return self.protocol.delta
        trap = trap or self.trap_spec()
        return self.protocol.delta_ratio * 14.0 * trap.distance / (3.0 * trap.omega0**2 * self.protocol.tf**2)

    def protocol_spec(self, variant: Optional[str] = None, tf: Optional[float] = None, delta: Optional[float] = None) -> ProtocolSpec:
        trap = self.trap_spec()
        kind = ProtocolKind(variant or self.protocol.variant)
        bound = None
        if kind is ProtocolKind.BOUNDED_OPTIMAL:
            bound = delta if delta is not None else self.delta(trap)
        return ProtocolSpec(kind, trap.distance, tf or self.protocol.tf, trap.omega0, bound)

    def grid(self, trap: Optional[TrapSpec] = None) -> GridSpec:
        trap = trap or self.trap_spec()
        s = self.simulation
        base = default_grid(trap, n_points=s.n_points, half_width=s.half_width, dt=s.dt)
        return replace(base, frame=Frame(s.frame))


_SECTION_TYPES = {
    "trap": TrapSection,
    "protocol": ProtocolSection,
    "simulation": SimulationSection,
    "sweep": SweepSection,
    "output": OutputSection,
}


def _choice(value: str, allowed, what: str):
    names = [a.value if hasattr(a, "value") else a for a in allowed]
    if value not in names:
        raise ConfigurationError(f"{what} must be one of {names}, got {value!r}")


def validate(cfg: ScenarioConfig):
    _choice(cfg.protocol.variant, ProtocolKind, "protocol.variant")
    for p in cfg.sweep.protocols:
        _choice(p, ProtocolKind, "sweep.protocols entry")
    _choice(cfg.simulation.kind, PotentialKind, "simulation.kind")
    for k in cfg.sweep.kinds:
        _choice(k, PotentialKind, "sweep.kinds entry")
    _choice(cfg.simulation.initial, INITIAL_STATES, "simulation.initial")
    _choice(cfg.simulation.frame, Frame, "simulation.frame")
    if not cfg.protocol.tf > 0:
        raise ConfigurationError("protocol.tf must be positive")
    if not cfg.protocol.delta_ratio > 0:
        raise ConfigurationError("protocol.delta_ratio must be positive")
    if cfg.sweep.tf_count < 1:
        raise ConfigurationError("sweep.tf_count must be at least 1")
    if not 0 <= cfg.simulation.snapshots <= 64:
        raise ConfigurationError("simulation.snapshots must be between 0 and 64")
    if cfg.output.samples < 3:
        raise ConfigurationError("output.samples must be at least 3")


def _coerce(section: str, key: str, value: Any, default: Any):
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise ConfigurationError(f"{section}.{key} must be a list")
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{section}.{key} must be true or false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigurationError(f"{section}.{key} must be an integer")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"{section}.{key} must be a string")
        return value
    # floats, including optional ones
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{section}.{key} must be a number")
    return float(value)


def from_mapping(data: Dict[str, Any]) -> ScenarioConfig:
    sections = {}
    for name, body in data.items():
        if name not in _SECTION_TYPES:
            raise ConfigurationError(f"unknown section {name!r}; expected one of {sorted(_SECTION_TYPES)}")
        if not isinstance(body, dict):
            raise ConfigurationError(f"{name} must be a section of keys")
        cls = _SECTION_TYPES[name]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in body.items():
            if key not in known:
                raise ConfigurationError(f"unknown key {name}.{key}; expected one of {sorted(known)}")
            kwargs[key] = _coerce(name, key, value, getattr(defaults, key))
        if name == "trap" and "depth" in kwargs and "omega0" not in kwargs:
            # a given depth replaces the default trap frequency
            kwargs["omega0"] = None
        sections[name] = cls(**kwargs)
    return ScenarioConfig(**sections)


def loads(text: str) -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    return from_mapping(data)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    return loads(text)


def to_mapping(cfg: ScenarioConfig) -> Dict[str, Dict[str, Any]]:
    """Effective config with defaults filled; unset optional values are left out."""
    out = {}
    for name in _SECTION_TYPES:
        body = asdict(getattr(cfg, name))
        out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in body.items() if v is not None}
    return out


def dumps(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(to_mapping(cfg))


def sweep_durations(cfg: ScenarioConfig, trap: TrapSpec, delta: float) -> List[float]:
    s = cfg.sweep
    start = s.tf_start if s.tf_start is not None else 2.0 / trap.omega0 * math.sqrt(trap.distance / delta)
    stop = s.tf_stop if s.tf_stop is not None else math.sqrt(14.0 * trap.distance / (3.0 * delta)) / trap.omega0
    if s.tf_count == 1:
        return [start]
    if not stop > start:
        raise ConfigurationError(f"sweep range is empty: tf_start={start!r} s, tf_stop={stop!r} s")
    return [float(x) for x in np.linspace(start, stop, s.tf_count)]
