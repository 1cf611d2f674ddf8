"""Scenario configuration: defaults, JSON loading, overrides and validation.

A config file is a JSON object whose top-level keys mirror
:class:`ScenarioConfig`; nested blocks (``radio``, ``mobility``, ``energy``,
``services``, ``traffic``, ``hammerstein``) mirror their dataclasses. Missing
keys take defaults, unknown keys are validation errors.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .hammerstein import model_from_dict
from .qos_metrics import DEFAULT_METRICS, POLARITY, InvalidArgument

METHODS = ("proposed", "baseline")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``problems`` lists every offending field."""

    def __init__(self, problems: list[str]):
        super().__init__("invalid config: " + "; ".join(problems))
        self.problems = problems


@dataclass
class RadioParams:
    range: float = 45.0  # m
    per_hop_latency: float = 0.015  # s, includes MAC contention and queueing
    bitrate: float = 1e6  # bit/s
    loss_probability: float = 0.0


@dataclass
class MobilityParams:
    speed_min: float = 1.0  # m/s
    speed_max: float = 10.0
    pause: float = 2.0  # s


@dataclass
class EnergyConfig:
    e_act: float = 50e-9  # J/bit
    e_amp: float = 100e-12  # J/bit/m^2
    initial_min: float = 0.4  # J
    initial_max: float = 4.0


@dataclass
class ServiceConfig:
    count: int = 180
    abstract_types: int = 5
    task_time_min: float = 0.01  # s
    task_time_max: float = 0.1
    failure_prob_min: float = 0.0
    failure_prob_max: float = 0.4
    history_window: float = 100.0  # s of prior invocation history per service
    history_rate: float = 0.5  # invocations/s during that history
    t_cd: float = 0.002  # compression + decompression, s
    t_ed: float = 0.004  # encryption + decryption, s
    stack_time_per_hop: float = 0.0005  # s


@dataclass
class TrafficConfig:
    plan_size: int = 5
    start: float = 5.0
    interval: float = 3.0
    stop: Optional[float] = None  # defaults to duration - 10
    requests: Optional[list] = None  # explicit [[time, initiator], ...]
    request_bits: int = 512
    reply_bits: int = 1024
    beacon_bits: int = 256
    payload_bits: int = 16000
    discovery_timeout: float = 1.0
    max_recompositions: int = 2
    timeout_factor: float = 2.0


@dataclass
class HammersteinConfig:
    metrics: list = field(default_factory=lambda: list(DEFAULT_METRICS))
    gains: Optional[list] = None
    weights: Optional[list] = None
    ma: Optional[list] = None
    ar: list = field(default_factory=list)
    noise_variance: float = 0.0
    stochastic: bool = False


@dataclass
class ScenarioConfig:
    nodes: int = 100
    arena: list = field(default_factory=lambda: [300.0, 300.0])
    duration: float = 150.0
    seed: int = 1
    method: str = "proposed"
    ttl: int = 5
    beacon_period: float = 1.0
    staleness_periods: float = 3.0
    answer_for_neighbors: bool = False
    misbehaving_fraction: float = 0.2
    drop_probability: float = 0.8
    bin_width: float = 10.0
    positions: Optional[list] = None  # explicit [[x, y], ...]; nodes stay put
    placements: Optional[list] = None  # explicit [[node, abstract_type], ...]
    misbehaving: Optional[list] = None  # explicit node ids
    initial_energy: Optional[list] = None  # explicit joules per node
    radio: RadioParams = field(default_factory=RadioParams)
    mobility: MobilityParams = field(default_factory=MobilityParams)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    services: ServiceConfig = field(default_factory=ServiceConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    hammerstein: HammersteinConfig = field(default_factory=HammersteinConfig)

    @property
    def request_stop(self) -> float:
        return self.traffic.stop if self.traffic.stop is not None else self.duration - 10.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


_NESTED = {"radio": RadioParams, "mobility": MobilityParams, "energy": EnergyConfig,
           "services": ServiceConfig, "traffic": TrafficConfig,
           "hammerstein": HammersteinConfig}


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError(["config root must be an object"])
    problems = []
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key not in known:
            problems.append(f"{key}: unknown field")
        elif key in _NESTED:
            cls = _NESTED[key]
            if not isinstance(value, dict):
                problems.append(f"{key}: must be an object")
                continue
            sub_known = {f.name for f in dataclasses.fields(cls)}
            bad = sorted(set(value) - sub_known)
            problems.extend(f"{key}.{b}: unknown field" for b in bad)
            kwargs[key] = cls(**{k: v for k, v in value.items() if k in sub_known})
        else:
            kwargs[key] = value
    if problems:
        raise ConfigError(problems)
    cfg = ScenarioConfig(**kwargs)
    validate(cfg)
    return cfg


def _number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Raise :class:`ConfigError` naming every invalid field."""
    p: list[str] = []

    def check(name, value, ok, msg):
        if not ok(value):
            p.append(f"{name}: {msg} (got {value!r})")

    def positive(name, value):
        check(name, value, lambda v: _number(v) and v > 0, "must be a positive number")

    def nonneg(name, value):
        check(name, value, lambda v: _number(v) and v >= 0, "must be a nonnegative number")

    def prob(name, value):
        check(name, value, lambda v: _number(v) and 0 <= v <= 1, "must lie in [0, 1]")

    def count(name, value, minimum=1):
        check(name, value, lambda v: isinstance(v, int) and not isinstance(v, bool)
              and v >= minimum, f"must be an integer >= {minimum}")

    count("nodes", cfg.nodes)
    check("arena", cfg.arena, lambda v: isinstance(v, (list, tuple)) and len(v) == 2
          and all(_number(x) and x > 0 for x in v), "must be [width, height], both positive")
    nonneg("duration", cfg.duration)
    check("seed", cfg.seed, lambda v: isinstance(v, int) and not isinstance(v, bool),
          "must be an integer")
    check("method", cfg.method, lambda v: v in METHODS, f"must be one of {METHODS}")
    count("ttl", cfg.ttl)
    positive("beacon_period", cfg.beacon_period)
    positive("staleness_periods", cfg.staleness_periods)
    prob("misbehaving_fraction", cfg.misbehaving_fraction)
    prob("drop_probability", cfg.drop_probability)
    positive("bin_width", cfg.bin_width)

    r = cfg.radio
    positive("radio.range", r.range)
    nonneg("radio.per_hop_latency", r.per_hop_latency)
    positive("radio.bitrate", r.bitrate)
    prob("radio.loss_probability", r.loss_probability)

    m = cfg.mobility
    nonneg("mobility.speed_min", m.speed_min)
    nonneg("mobility.speed_max", m.speed_max)
    nonneg("mobility.pause", m.pause)
    if _number(m.speed_min) and _number(m.speed_max):
        if m.speed_min > m.speed_max:
            p.append("mobility.speed_min: must not exceed speed_max")
        if m.speed_max > 0 and m.speed_min == 0:
            p.append("mobility.speed_min: must be positive when nodes move")

    e = cfg.energy
    nonneg("energy.e_act", e.e_act)
    nonneg("energy.e_amp", e.e_amp)
    positive("energy.initial_min", e.initial_min)
    positive("energy.initial_max", e.initial_max)
    if _number(e.initial_min) and _number(e.initial_max) and e.initial_min > e.initial_max:
        p.append("energy.initial_min: must not exceed initial_max")

    s = cfg.services
    count("services.count", s.count)
    count("services.abstract_types", s.abstract_types)
    nonneg("services.task_time_min", s.task_time_min)
    nonneg("services.task_time_max", s.task_time_max)
    prob("services.failure_prob_min", s.failure_prob_min)
    prob("services.failure_prob_max", s.failure_prob_max)
    positive("services.history_window", s.history_window)
    nonneg("services.history_rate", s.history_rate)
    nonneg("services.t_cd", s.t_cd)
    nonneg("services.t_ed", s.t_ed)
    nonneg("services.stack_time_per_hop", s.stack_time_per_hop)
    if _number(s.task_time_min) and _number(s.task_time_max) and s.task_time_min > s.task_time_max:
        p.append("services.task_time_min: must not exceed task_time_max")
    if (_number(s.failure_prob_min) and _number(s.failure_prob_max)
            and s.failure_prob_min > s.failure_prob_max):
        p.append("services.failure_prob_min: must not exceed failure_prob_max")

    t = cfg.traffic
    count("traffic.plan_size", t.plan_size)
    nonneg("traffic.start", t.start)
    positive("traffic.interval", t.interval)
    if t.stop is not None:
        nonneg("traffic.stop", t.stop)
    for name in ("request_bits", "reply_bits", "beacon_bits", "payload_bits"):
        count(f"traffic.{name}", getattr(t, name))
    positive("traffic.discovery_timeout", t.discovery_timeout)
    count("traffic.max_recompositions", t.max_recompositions, 0)
    positive("traffic.timeout_factor", t.timeout_factor)

    n = cfg.nodes if isinstance(cfg.nodes, int) and cfg.nodes > 0 else None
    if t.requests is not None:
        ok = isinstance(t.requests, list) and all(
            isinstance(q, (list, tuple)) and len(q) == 2 and _number(q[0]) and q[0] >= 0
            and isinstance(q[1], int) and (n is None or 0 <= q[1] < n) for q in t.requests)
        if not ok:
            p.append("traffic.requests: must be a list of [time >= 0, node id]")
    if cfg.positions is not None:
        ok = isinstance(cfg.positions, list) and (n is None or len(cfg.positions) == n) and all(
            isinstance(q, (list, tuple)) and len(q) == 2 and all(_number(x) for x in q)
            for q in cfg.positions)
        if not ok:
            p.append("positions: must hold one [x, y] pair per node")
    if cfg.placements is not None:
        ok = isinstance(cfg.placements, list) and all(
            isinstance(q, (list, tuple)) and len(q) == 2 and isinstance(q[0], int)
            and (n is None or 0 <= q[0] < n) and isinstance(q[1], int) and q[1] >= 0
            for q in cfg.placements)
        if not ok:
            p.append("placements: must be a list of [node id, abstract type index]")
    if cfg.misbehaving is not None:
        ok = isinstance(cfg.misbehaving, list) and all(
            isinstance(q, int) and (n is None or 0 <= q < n) for q in cfg.misbehaving)
        if not ok:
            p.append("misbehaving: must be a list of node ids")
    if cfg.initial_energy is not None:
        ok = isinstance(cfg.initial_energy, list) and (n is None or len(cfg.initial_energy) == n) \
            and all(_number(x) and x > 0 for x in cfg.initial_energy)
        if not ok:
            p.append("initial_energy: must hold one positive value per node")

    h = cfg.hammerstein
    if not (isinstance(h.metrics, list) and h.metrics and all(m in POLARITY for m in h.metrics)):
        p.append(f"hammerstein.metrics: must be a nonempty list drawn from {sorted(POLARITY)}")
    else:
        try:
            model_from_dict(dataclasses.asdict(h), len(h.metrics))
        except (InvalidArgument, TypeError, ValueError, AttributeError) as exc:
            p.append(f"hammerstein: {exc}")
    nonneg("hammerstein.noise_variance", h.noise_variance)

    if p:
        raise ConfigError(p)
    return cfg


def apply_overrides(cfg: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Copy of ``cfg`` with CLI-style overrides (``None`` values are ignored)."""
    cfg = from_dict(cfg.to_dict())
    mapping = {"seed": ("seed",), "nodes": ("nodes",), "duration": ("duration",),
               "range": ("radio", "range"), "method": ("method",), "ttl": ("ttl",),
               "plan_size": ("traffic", "plan_size")}
    for key, value in overrides.items():
        if value is None:
            continue
        path = mapping[key]
        target = cfg
        for part in path[:-1]:
            target = getattr(target, part)
        setattr(target, path[-1], value)
    if overrides.get("plan_size") is not None and cfg.services.abstract_types < cfg.traffic.plan_size:
        cfg.services.abstract_types = cfg.traffic.plan_size
    return validate(cfg)


def default_config() -> ScenarioConfig:
    return load(default_config_path())


def default_config_path() -> Path:
    return Path(str(resources.files("qoscompose").joinpath("default_config.json")))


def load(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})"]) from None
    return from_dict(data)
