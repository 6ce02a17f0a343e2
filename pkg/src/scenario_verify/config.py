"""Experiment configuration and its INI file form.

Sections: ``[risk]``, ``[domain]``, ``[sim]``, ``[metric]``, ``[run]``,
``[table1]``.
Defaults are the reference experiment settings.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace

from .metrics import MetricParams
from .risk_core import RiskSpec
from .robot_sim import DomainSpec, SimConfig


@dataclass(frozen=True)
class RiskSection:
    epsilon: float = 0.0275
    gamma: float = 1 - 1e-6


@dataclass(frozen=True)
class DomainSection:
    robots: int = 3
    min_separation: float = 0.3


@dataclass(frozen=True)
class SimSection:
    dt: float = 0.05
    horizon: float = 30.0
    v_max: float = 0.2
    omega_max: float = 3.6
    lookahead: float = 0.05
    k_p: float = 1.0
    d_qp: float = 0.17
    cbf_gain: float = 100.0
    qp_tol: float = 1e-8
    qp_max_iter: int = 500
    noise_sigma: float = 0.0


@dataclass(frozen=True)
class MetricSection:
    collision_radius: float = 0.15
    goal_radius: float = 0.1
    literal_eq27: bool = False
    goal_aggregation: str = "all"


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    n_samples: int = 0  # 0: use the planned sample count
    holdout: int = 2000
    trials: int = 30
    n_scenario: int = 5000
    n_oracle: int = 50000
    chunk_size: int = 512
    workers: int = 1


@dataclass(frozen=True)
class Table1Section:
    # whitespace-separated lists; empty means the built-in grid
    distributions: str = ""
    epsilons: str = ""


SECTIONS = {
    "risk": RiskSection,
    "domain": DomainSection,
    "sim": SimSection,
    "metric": MetricSection,
    "run": RunSection,
    "table1": Table1Section,
}


def _parse(kind, text: str):
    if kind is bool:
        lowered = text.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text.strip()


def _show(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class ExperimentConfig:
    risk: RiskSection = field(default_factory=RiskSection)
    domain: DomainSection = field(default_factory=DomainSection)
    sim: SimSection = field(default_factory=SimSection)
    metric: MetricSection = field(default_factory=MetricSection)
    run: RunSection = field(default_factory=RunSection)
    table1: Table1Section = field(default_factory=Table1Section)

    def risk_spec(self) -> RiskSpec:
        return RiskSpec(self.risk.epsilon, self.risk.gamma)

    def sim_config(self) -> SimConfig:
        return SimConfig(robot_count=self.domain.robots, **vars(self.sim))

    def metric_params(self) -> MetricParams:
        return MetricParams(horizon=self.sim.horizon, **vars(self.metric))

    def domain_spec(self) -> DomainSpec:
        return DomainSpec(
            robot_count=self.domain.robots,
            min_separation=self.domain.min_separation,
            metric=self.metric_params(),
        )

    def updated(self, section: str, **values) -> "ExperimentConfig":
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        return replace(self, **{section: replace(getattr(self, section), **values)})

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        for name in SECTIONS:
            section = getattr(self, name)
            parser[name] = {f.name: _show(getattr(section, f.name)) for f in fields(section)}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        unknown = set(parser.sections()) - set(SECTIONS)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls()
        for name, section_cls in SECTIONS.items():
            if name not in parser:
                continue
            defaults = section_cls()
            known = {f.name for f in fields(section_cls)}
            values = {}
            for key, text_value in parser[name].items():
                if key not in known:
                    raise ValueError(f"unknown key {key!r} in [{name}]")
                values[key] = _parse(type(getattr(defaults, key)), text_value)
            cfg = replace(cfg, **{name: replace(defaults, **values)})
        return cfg
