"""Network and training configuration.

``NetworkConfig`` is the single source of truth for every physical constant,
the topology size and the learning hyperparameters.  Field defaults are the
full-scale simulation parameters; ``PRESETS`` holds named overrides (``desk``
is the small, fast configuration used by the CLI and the acceptance suite).
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

ENV_PREFIX = "WPMEC_"


class ConfigError(ValueError):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration: " + "; ".join(problems))


@dataclass(frozen=True)
class NetworkConfig:
    # topology and slot structure
    m_haps: int = 3
    n_wds: int = 10
    slots_per_episode: int = 100
    slot_duration: float = 0.4  # s
    zone_radius: float = 25.0  # m, may be math.inf
    field_side: float = 100.0  # m
    # workload
    battery_capacity: float = 0.1  # J
    arrival_rate: float = 50.0  # packets / slot
    packet_bits: float = 1e3  # bits / packet
    data_demand: float = 3.5e5  # bits / slot
    # energy harvesting and HAP side
    eh_efficiency: float = 0.51
    p_max: float = 3.0  # W
    e_m: float = 1e-6  # J / bit processed at a HAP
    # local computing
    k_n: float = 1e-27
    c_n: float = 1e3  # cycles / bit
    f_max: float = 3e8  # Hz
    # offloading
    bandwidth: float = 1e6  # Hz
    noise_power: float = 1e-9  # W
    wd_tx_power: float = 0.1  # W
    wd_circuit_power: float = 1e-3  # W
    overhead: float = 1.1
    # large-scale fading
    antenna_gain: float = 4.11
    carrier_freq: float = 915e6  # Hz
    path_loss_exp: float = 2.0
    # rewards
    penalty: float = 1.0
    reward_offset: float | None = None  # None -> derived from the network
    cost_max: float = 2.0  # upper bound of the per-WD cost signal
    # high-level agent (DDPG)
    gamma_h: float = 0.95
    lr_actor_h: float = 1e-5
    lr_critic_h: float = 1e-5
    soft_actor: float = 1e-4
    soft_critic: float = 1e-4
    batch_size: int = 64
    replay_capacity: int = 10_000
    noise_sigma: float = 0.1  # fraction of each action range
    noise_decay: float = 0.999  # per episode
    # low-level agents (IPPO)
    gamma_l: float = 0.99
    lr_actor_l: float = 1e-5
    lr_critic_l: float = 1e-5
    clip_eps: float = 0.2
    ppo_epochs: int = 4
    # shared training knobs
    hidden: tuple[int, ...] = (128, 128)
    optimizer: str = "sgd"
    episodes: int = 300
    seed: int = 0

    @property
    def mean_bits(self) -> float:
        return self.arrival_rate * self.packet_bits

    def replace(self, **changes: Any) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    def config_hash(self) -> str:
        """Short stable digest of every field; stamped on CSVs and checkpoints."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(NetworkConfig))

_POSITIVE = (
    "slot_duration", "zone_radius", "field_side", "battery_capacity",
    "arrival_rate", "packet_bits", "p_max", "k_n", "c_n", "f_max",
    "bandwidth", "noise_power", "wd_tx_power", "antenna_gain",
    "carrier_freq", "path_loss_exp", "cost_max", "lr_actor_h", "lr_critic_h",
    "lr_actor_l", "lr_critic_l", "clip_eps",
)
_NON_NEGATIVE = ("data_demand", "e_m", "wd_circuit_power", "penalty", "noise_sigma")
_POSITIVE_INT = (
    "m_haps", "n_wds", "slots_per_episode", "batch_size", "replay_capacity",
    "ppo_epochs", "episodes",
)
_UNIT_CLOSED = ("gamma_h", "gamma_l", "noise_decay")
_UNIT_HALF_OPEN = ("soft_actor", "soft_critic")


def validate_config(cfg: NetworkConfig) -> NetworkConfig:
    """Return ``cfg`` unchanged, or raise ``ConfigError`` naming every bad field."""
    problems: list[str] = []
    for name in _POSITIVE:
        v = getattr(cfg, name)
        if not (v > 0) or math.isnan(v):
            problems.append(f"{name} must be > 0 (got {v!r})")
    for name in _NON_NEGATIVE:
        v = getattr(cfg, name)
        if not (v >= 0) or math.isinf(v):
            problems.append(f"{name} must be finite and >= 0 (got {v!r})")
    for name in _POSITIVE_INT:
        v = getattr(cfg, name)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            problems.append(f"{name} must be a positive integer (got {v!r})")
    for name in _UNIT_CLOSED:
        v = getattr(cfg, name)
        if not 0.0 <= v <= 1.0:
            problems.append(f"{name} must lie in [0, 1] (got {v!r})")
    for name in _UNIT_HALF_OPEN:
        v = getattr(cfg, name)
        if not 0.0 < v <= 1.0:
            problems.append(f"{name} must lie in (0, 1] (got {v!r})")
    if not 0.0 < cfg.eh_efficiency < 1.0:
        problems.append(f"eh_efficiency must lie in (0, 1) (got {cfg.eh_efficiency!r})")
    if not cfg.overhead >= 1.0:
        problems.append(f"overhead must be >= 1 (got {cfg.overhead!r})")
    if cfg.reward_offset is not None and not math.isfinite(cfg.reward_offset):
        problems.append(f"reward_offset must be finite (got {cfg.reward_offset!r})")
    if not cfg.hidden or any(int(h) < 1 for h in cfg.hidden):
        problems.append(f"hidden must be a non-empty list of positive sizes (got {cfg.hidden!r})")
    if cfg.optimizer not in ("sgd", "adam"):
        problems.append(f"optimizer must be 'sgd' or 'adam' (got {cfg.optimizer!r})")
    if cfg.batch_size > cfg.replay_capacity:
        problems.append("batch_size must not exceed replay_capacity")
    if problems:
        raise ConfigError(problems)
    return cfg


PRESETS: dict[str, dict[str, Any]] = {
    "table2": {},
    "desk": {
        "m_haps": 2,
        "n_wds": 6,
        "slots_per_episode": 40,
        "episodes": 300,
        "field_side": 8.0,
        "zone_radius": 4.0,
        "packet_bits": 500.0,
        "data_demand": 5e4,
        "bandwidth": 1e7,
        "noise_power": 1e-6,
        "battery_capacity": 2e-3,
        "penalty": 5.0,
        "cost_max": 1000.0,
        "hidden": (64, 64),
        "optimizer": "adam",
        "lr_actor_h": 1e-3,
        "lr_critic_h": 1e-3,
        "lr_actor_l": 1e-3,
        "lr_critic_l": 1e-3,
    },
}


def _coerce(name: str, raw: Any) -> Any:
    proto = next(f for f in dataclasses.fields(NetworkConfig) if f.name == name)
    default = proto.default
    if name == "hidden":
        if isinstance(raw, str):
            raw = [x for x in raw.replace(",", " ").split() if x]
        return tuple(int(x) for x in raw)
    if name == "reward_offset":
        if raw is None or (isinstance(raw, str) and raw.lower() in ("", "none", "auto")):
            return None
        return float(raw)
    if isinstance(default, bool):
        return str(raw).lower() in ("1", "true", "yes") if isinstance(raw, str) else bool(raw)
    if isinstance(default, int):
        value = float(raw)
        if not value.is_integer():
            raise ConfigError([f"{name} must be an integer (got {raw!r})"])
        return int(value)
    if isinstance(default, float):
        return float(raw)
    return str(raw)


def make_config(preset: str = "desk", **overrides: Any) -> NetworkConfig:
    """Build a validated config from a preset plus keyword overrides."""
    if preset not in PRESETS:
        raise ConfigError([f"unknown preset {preset!r} (choose from {sorted(PRESETS)})"])
    values = dict(PRESETS[preset])
    values.update(overrides)
    unknown = sorted(set(values) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError([f"unknown config field {k!r}" for k in unknown])
    coerced = {k: _coerce(k, v) for k, v in values.items()}
    return validate_config(NetworkConfig(**coerced))


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    """Collect ``WPMEC_<FIELD>`` variables, e.g. ``WPMEC_N_WDS=8``."""
    environ = os.environ if environ is None else environ
    out = {}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX):
            name = key[len(ENV_PREFIX):].lower()
            if name in FIELD_NAMES:
                out[name] = value
    return out


def load_config(path: str | os.PathLike | None = None,
                environ: Mapping[str, str] | None = None,
                **overrides: Any) -> NetworkConfig:
    """Read a JSON or TOML key-value file.

    Missing fields take the full-scale defaults unless the file names a
    ``preset``.  Environment overrides apply after the file, keyword
    overrides after that.  Without a path the ``desk`` preset is used.
    """
    values: dict[str, Any] = {}
    preset = "desk"
    if path is not None:
        p = Path(path)
        text = p.read_text()
        if p.suffix.lower() == ".toml":
            values = tomllib.loads(text)
        else:
            values = json.loads(text)
        if not isinstance(values, dict):
            raise ConfigError([f"{p} must contain a key-value mapping"])
        preset = values.pop("preset", "table2")
    values.update(env_overrides(environ))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return make_config(preset, **values)

