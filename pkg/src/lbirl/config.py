"""Run configuration: one JSON document drives the whole pipeline.

Every stage records the hash of the effective (defaults-merged) config next
to its artifacts, so identical configs reproduce identical outputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

from .kpi import KpiConfig
from .policy import PpoConfig
from .radio import RadioConfig
from .reward import TrainRewardConfig
from .simnet import SimParams
from .topology import TopologyConfig
from .traffic import TrafficScenario, scenario_preset


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass(frozen=True)
class DemoConfig:
    count: int = 100
    horizon: int = 168
    train_fraction: float = 0.7


@dataclass(frozen=True)
class EvalConfig:
    seeds: tuple[int, ...] = (101, 102, 103)
    methods: tuple[str, ...] = ("ours", "fixed", "adaptive", "demos")
    adaptive_gain: float = 10.0


_SECTIONS = {
    "topology": TopologyConfig,
    "radio": RadioConfig,
    "sim": SimParams,
    "kpi": KpiConfig,
    "demos": DemoConfig,
    "reward": TrainRewardConfig,
    "ppo": PpoConfig,
    "evaluation": EvalConfig,
}

KNOWN_METHODS = ("ours", "fixed", "adaptive", "demos", "trex-contiguous")


def _build_section(cls, payload: dict, name: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    coerced = {}
    for f in fields(cls):
        if f.name not in payload:
            continue
        v = payload[f.name]
        if isinstance(v, list):
            v = tuple(v)
        coerced[f.name] = v
    try:
        return cls(**coerced)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid '{name}' section: {e}") from e


@dataclass
class RunConfig:
    out_dir: str = "out"
    seed: int = 7
    scenarios: tuple[int, ...] = (1, 2)
    controlled_sector: int = 0
    sampler: str = "tcs"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    sim: SimParams = field(default_factory=SimParams)
    kpi: KpiConfig = field(default_factory=KpiConfig)
    demos: DemoConfig = field(default_factory=DemoConfig)
    reward: TrainRewardConfig = field(default_factory=TrainRewardConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    traffic_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.sampler not in ("tcs", "contiguous"):
            raise ConfigError(f"sampler must be 'tcs' or 'contiguous', got {self.sampler!r}")
        for m in self.evaluation.methods:
            if m not in KNOWN_METHODS:
                raise ConfigError(f"unknown evaluation method {m!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        kw = {}
        for key in ("out_dir", "seed", "controlled_sector", "sampler"):
            if key in doc:
                kw[key] = doc.pop(key)
        if "scenarios" in doc:
            kw["scenarios"] = tuple(int(s) for s in doc.pop("scenarios"))
        for name, section_cls in _SECTIONS.items():
            if name in doc:
                payload = doc.pop(name)
                if not isinstance(payload, dict):
                    raise ConfigError(f"section '{name}' must be an object")
                kw[name] = _build_section(section_cls, payload, name)
        if "traffic_overrides" in doc:
            overrides = doc.pop("traffic_overrides")
            if not isinstance(overrides, dict):
                raise ConfigError("traffic_overrides must map scenario id to overrides")
            kw["traffic_overrides"] = {int(k): dict(v) for k, v in overrides.items()}
        if doc:
            raise ConfigError(f"unknown top-level keys: {sorted(doc)}")
        try:
            return cls(**kw)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from e

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                doc = json.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(doc)

    def scenario(self, sid: int) -> TrafficScenario:
        overrides = self.traffic_overrides.get(sid, {})
        return scenario_preset(sid, **overrides)

    def to_canonical_dict(self) -> dict:
        def convert(v):
            if dataclasses.is_dataclass(v) and not isinstance(v, type):
                return {f.name: convert(getattr(v, f.name)) for f in fields(v)
                        if not f.name.startswith("_")}
            if isinstance(v, (tuple, list)):
                return [convert(x) for x in v]
            if isinstance(v, dict):
                return {str(k): convert(x) for k, x in sorted(v.items())}
            return v

        return {f.name: convert(getattr(self, f.name)) for f in fields(self)}

    def config_hash(self) -> str:
        blob = json.dumps(self.to_canonical_dict(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
