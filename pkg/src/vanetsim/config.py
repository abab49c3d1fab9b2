"""Scenario configuration: one flat record drives a whole experiment.

Two presets ship with the package: "paper" is the full-scale setup
(100 nodes, 1000x1000 m, 2000 s, 200 repetitions) and "small" a desk-scale
variant (30 nodes, 500x500 m, 300 s, 30 repetitions) that keeps the same
qualitative behavior at a fraction of the runtime. Scenario files are flat
key=value text mirroring the field names below.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

PROTOCOL_NAMES = ("acr", "aodv", "dsdv")


class ConfigError(ValueError):
    """The scenario cannot be run as described."""


@dataclass
class ScenarioConfig:
    protocol: str = "acr"
    node_count: int = 100
    area_width_m: float = 1000.0
    area_height_m: float = 1000.0
    horizontal_roads: int = 3
    vertical_roads: int = 3
    rsus_per_lane: int = 1
    road_id_bits: int = 8
    class_mix: tuple = (1 / 3, 1 / 3, 1 / 3)  # slow, med, fast weights
    duration_s: float = 2000.0
    warmup_s: float = 100.0
    repetitions: int = 200
    base_seed: int = 1
    radio_range_m: float = 100.0
    mad_m: float = 100.0
    p_loss: float = 0.05  # environmental noise enabled by default
    bitrate_bps: float = 6e6
    traffic_lambda: float = 0.2  # data packets per node per second
    mobility_tick_s: float = 0.1
    hello_period_s: float = 1.0
    entry_ttl_s: float = 3.0  # 3 x hello period
    ch_update_period_s: float = 1.0
    ch_silence_factor: float = 3.0
    t_disc_s: float = 2.0
    discovery_retries: int = 2
    route_lifetime_s: float = 10.0
    dsdv_full_period_s: float = 15.0
    dsdv_trigger_delay_s: float = 0.1
    relay_hold_s: float = 0.01
    enquiry_timeout_s: float = 1.0
    join_retry_s: float = 2.0
    reply_window_s: float = 0.3
    leave_lead_s: float = 1.0
    rsu_check_period_s: float = 0.5
    rsu_report_ttl_s: float = 30.0
    rsu_bridging: bool = False
    hello_bytes: int = 32
    control_bytes: int = 64
    data_bytes: int = 512

    def validate(self) -> None:
        problems = []
        if self.protocol not in PROTOCOL_NAMES:
            problems.append(f"unknown protocol {self.protocol!r}")
        if self.node_count < 1:
            problems.append("node_count must be >= 1")
        if not self.warmup_s < self.duration_s:
            problems.append("warmup_s must be strictly below duration_s")
        if self.repetitions < 1:
            problems.append("repetitions must be >= 1")
        if self.mad_m > self.radio_range_m:
            problems.append("mad_m must not exceed radio_range_m")
        if self.horizontal_roads + self.vertical_roads < 1:
            problems.append("need at least one road")
        mix = self.class_mix
        if len(mix) != 3 or any(w < 0 for w in mix) or abs(sum(mix) - 1.0) > 1e-9:
            problems.append("class_mix must be three non-negative weights summing to 1")
        if not 0.0 <= self.p_loss <= 1.0:
            problems.append("p_loss must lie in [0, 1]")
        if self.mobility_tick_s <= 0:
            problems.append("mobility_tick_s must be positive")
        if self.traffic_lambda < 0:
            problems.append("traffic_lambda must be non-negative")
        n_roads = self.horizontal_roads + self.vertical_roads
        if n_roads >= 2**self.road_id_bits:
            problems.append("road_id_bits too small for the road count")
        if problems:
            raise ConfigError("; ".join(problems))

    def with_overrides(self, **kwargs) -> "ScenarioConfig":
        return dataclasses.replace(self, **kwargs)


def preset(name: str) -> ScenarioConfig:
    if name == "paper":
        return ScenarioConfig()
    if name == "small":
        return ScenarioConfig(
            node_count=30,
            area_width_m=500.0,
            area_height_m=500.0,
            horizontal_roads=2,
            vertical_roads=2,
            duration_s=300.0,
            warmup_s=100.0,
            repetitions=30,
        )
    raise ConfigError(f"unknown preset {name!r}; expected 'paper' or 'small'")


def config_hash(cfg: ScenarioConfig) -> str:
    """Stable digest of every parameter except the seed."""
    parts = []
    for f in dataclasses.fields(cfg):
        if f.name == "base_seed":
            continue
        parts.append(f"{f.name}={getattr(cfg, f.name)!r}")
    return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    ftype = _FIELD_TYPES[name]
    if ftype == "str":
        return raw
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    if ftype == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {name}: {raw!r}")
    if ftype == "tuple":
        values = tuple(float(v) for v in raw.replace(",", " ").split())
        return values
    raise ConfigError(f"cannot parse field {name}")


def load_scenario(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Apply a flat key=value scenario file on top of a base config.

    Lines starting with '#' and blank lines are ignored; unknown keys are
    rejected so typos fail loudly.
    """
    cfg = base if base is not None else ScenarioConfig()
    overrides = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            overrides[key] = _parse_value(key, raw)
    return cfg.with_overrides(**overrides)


def dump_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        for f in dataclasses.fields(cfg):
            value = getattr(cfg, f.name)
            if isinstance(value, tuple):
                value = " ".join(repr(v) for v in value)
            fh.write(f"{f.name} = {value}\n")
