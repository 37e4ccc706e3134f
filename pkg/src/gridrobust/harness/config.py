"""Campaign configuration: YAML file <-> validated dataclasses.

Key reference (all keys optional, unknown keys are rejected)::

    grid: ieee14            # bundled case name or path to a grid JSON file
    episodes: 35
    max_steps: 8064
    seed: 0                 # master seed
    output: out
    chronics:
      amplitude: 0.3
      load_sigma: 0.05
      renewable_sigma: 0.15
      scale: 1.0
    defender:
      rho_act: 0.95
      rho_safe: 0.80
    perturber:
      kind: none            # none | rpa | gepa | rlpa
      seed: null            # attacker stream seed; null derives it from the master seed
      rpa:  {p: 0.2, sigma_gen: 0.3, sigma_load: 0.3, sigma_flow: 0.3}
      gepa: {iterations: 10, step_size: 0.02, max_perturbation: 0.1}
      rlpa: {q_path: null, episodes: 30, max_steps: 2016, alpha: 0.1, epsilon: 0.1,
             gamma: 0.95, xi: 0.1, bonus: 100.0, budget: 20, pool_size: 150, beam: 8}
    metrics:
      window: 50
      theta: 0.05
      theta_c: 0.02
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from ..defender import DefenderConfig
from ..metrics import MetricParams
from ..perturbers import GepaConfig, RlpaConfig, RpaConfig

PERTURBER_KINDS = ("none", "rpa", "gepa", "rlpa")
DESK_EPISODES = 10
DESK_STEPS = 2016


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChronicsParams:
    amplitude: float = 0.3
    load_sigma: float = 0.05
    renewable_sigma: float = 0.15
    scale: float = 1.0


@dataclass(frozen=True)
class RpaParams:
    p: float = 0.2
    sigma_gen: float = 0.3
    sigma_load: float = 0.3
    sigma_flow: float = 0.3

    def build(self) -> RpaConfig:
        return RpaConfig(p=self.p, sigma={"gen": self.sigma_gen, "load": self.sigma_load, "flow": self.sigma_flow})


@dataclass(frozen=True)
class GepaParams:
    iterations: int = 10
    step_size: float = 0.02
    max_perturbation: float = 0.10

    def build(self) -> GepaConfig:
        return GepaConfig(self.iterations, self.step_size, self.max_perturbation)


@dataclass(frozen=True)
class RlpaParams:
    q_path: str | None = None
    episodes: int = 30
    max_steps: int = 2016
    alpha: float = 0.1
    epsilon: float = 0.1
    gamma: float = 0.95
    xi: float = 0.10
    bonus: float = 100.0
    budget: int = 20
    pool_size: int = 150
    beam: int = 8

    def build(self) -> RlpaConfig:
        kw = {f.name: getattr(self, f.name) for f in fields(RlpaConfig)}
        return RlpaConfig(**kw)


@dataclass(frozen=True)
class PerturberParams:
    kind: str = "none"
    seed: int | None = None
    rpa: RpaParams = field(default_factory=RpaParams)
    gepa: GepaParams = field(default_factory=GepaParams)
    rlpa: RlpaParams = field(default_factory=RlpaParams)


@dataclass(frozen=True)
class CampaignConfig:
    grid: str = "ieee14"
    episodes: int = 35
    max_steps: int = 8064
    seed: int = 0
    output: str = "out"
    chronics: ChronicsParams = field(default_factory=ChronicsParams)
    defender: DefenderConfig = field(default_factory=DefenderConfig)
    perturber: PerturberParams = field(default_factory=PerturberParams)
    metrics: MetricParams = field(default_factory=MetricParams)

    def validate(self, check_files: bool = True) -> CampaignConfig:
        """Raise :class:`ConfigError` on bad values; returns self for chaining."""
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.perturber.kind not in PERTURBER_KINDS:
            raise ConfigError(f"perturber.kind must be one of {PERTURBER_KINDS}, got {self.perturber.kind!r}")
        if self.metrics.window < 1 or self.metrics.theta < 0 or self.metrics.theta_c < 0:
            raise ConfigError("metrics: window must be >= 1 and thresholds non-negative")
        try:
            self.perturber.rpa.build()
            self.perturber.gepa.build()
            self.perturber.rlpa.build()
            DefenderConfig(self.defender.rho_act, self.defender.rho_safe)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if check_files:
            if self.grid != "ieee14" and not Path(self.grid).is_file():
                raise ConfigError(f"grid file not found: {self.grid}")
            q = self.perturber.rlpa.q_path
            if self.perturber.kind == "rlpa" and q is not None and not Path(q).is_file():
                raise ConfigError(f"rlpa.q_path not found: {q}")
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def desk(self) -> CampaignConfig:
        return replace(self, episodes=DESK_EPISODES, max_steps=DESK_STEPS)


_SECTIONS = {
    "chronics": ChronicsParams,
    "defender": DefenderConfig,
    "metrics": MetricParams,
}
_PERTURBER_SECTIONS = {"rpa": RpaParams, "gepa": GepaParams, "rlpa": RlpaParams}


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict[str, Any] | None) -> CampaignConfig:
    data = dict(data or {})
    top = {f.name for f in fields(CampaignConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}")
    kw: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kw[name] = _build(cls, data.pop(name), name)
    if "perturber" in data:
        raw = data.pop("perturber")
        if not isinstance(raw, dict):
            raise ConfigError("perturber: expected a mapping")
        raw = dict(raw)
        sub = {k: _build(c, raw.pop(k), f"perturber.{k}") for k, c in _PERTURBER_SECTIONS.items() if k in raw}
        kw["perturber"] = _build(PerturberParams, {**raw, **sub}, "perturber")
    kw.update(data)
    for name in ("episodes", "max_steps", "seed"):
        if name in kw and (not isinstance(kw[name], int) or isinstance(kw[name], bool)):
            raise ConfigError(f"{name} must be an integer")
    return CampaignConfig(**kw)


def load_config(path: str | Path, check_files: bool = True) -> CampaignConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data).validate(check_files)


def dump_config(cfg: CampaignConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
