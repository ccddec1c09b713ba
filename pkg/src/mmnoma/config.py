"""Experiment configuration: YAML file -> validated ``ExperimentConfig``.

The file has one mapping per section. Every key is optional; omitted keys
take the reference defaults below. Unknown sections or keys are rejected
and every validation error names the offending key as ``section.key``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from pathlib import Path

import yaml

from .agent import AgentConfig
from .deployment import PcpConfig, TopologyConfig
from .errors import ConfigError
from .mac import MacConfig
from .noma import NomaPolicy
from .phy import PhyConfig
from .simulation import ALGORITHMS, ScenarioConfig

DEFAULTS: dict[str, dict] = {
    "phy": {
        "bandwidth": 20e6,
        "carrier_frequency": 30e9,
        "subcarrier_spacing": 15e3,
        "subcarriers_per_rb": 12,
        "tti_ms": 0.1429,
        "max_tx_power_dbm": 28.0,
        "num_antennas": 16,
        "antenna_spacing_ratio": 0.5,
        "num_paths": 1,
        "pathloss_exponent": 2.0,
        "gain_variance": 1.0,
        "noise_figure_db": 9.0,
        "noise_variance": None,
    },
    "harq": {
        "round_trip_ttis": 4,
        "num_processes": 6,
        "max_retransmissions": 1,
    },
    "users": {
        "pcp_mean_users": 7.0,
        "num_clusters": 2,
        "cluster_radius": 30.0,
        "num_users": 9,
        "num_gnbs": 2,
        "inter_gnb_distance": 150.0,
    },
    "traffic": {
        "packet_size_bytes": 32,
        "offered_loads_mbps": [0.5, 1.0, 1.5, 2.0, 2.5],
        "user_sweep": [4, 6, 8, 10, 12, 14, 16],
        "user_sweep_load_mbps": 0.5,
    },
    "q_learning": {
        "learning_rate": 0.5,
        "discount": 0.9,
        "exploration": 0.1,
        "exploration_horizon": 2000,
        "power_levels_dbm": [0.0, 2.0, 4.0, 6.0, 8.0],
        "sinr_threshold_db": 20.0,
        "reward_scope": "intersection",
    },
    "simulation": {
        "num_ttis": 4000,
        "num_runs": 40,
        "confidence_level": 0.95,
        "first_seed": 0,
        "algorithms": ["qlearning", "upa"],
        "sweeps": ["load", "users"],
    },
    "model": {
        "beams_per_gnb": 2,
        "intersection_users": 2,
        "intersection_margin_db": math.inf,
        "noma_policy": "ftpa",
        "ftpa_exponent": 1.0,
        "noma_split": [],
        "subband_matched": False,
        "idle_beams_silent": True,
        "kmeans_max_iter": 100,
    },
}

SWEEPS = ("load", "users")

# component-level key names that differ from the file's key names
_ALIASES = {"noma_xi": "ftpa_exponent", "power_levels": "power_levels_dbm", "fixed_total_users": "num_users"}


def config_key(name: str, fallback_section: str) -> str:
    """Full ``section.key`` for a component-level setting name."""
    name = _ALIASES.get(name, name)
    for sec, keys in DEFAULTS.items():
        if name in keys:
            return f"{sec}.{name}"
    return f"{fallback_section}.{name}"


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    values: dict  # section -> key -> value, fully populated

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    @property
    def num_runs(self) -> int:
        return self.values["simulation"]["num_runs"]

    @property
    def algorithms(self) -> list[str]:
        return list(self.values["simulation"]["algorithms"])

    def seeds(self) -> list[int]:
        first = self.values["simulation"]["first_seed"]
        return list(range(first, first + self.num_runs))

    def scenario(self, num_users: int | None = None) -> ScenarioConfig:
        return build_scenario_config(self.values, num_users)

    def to_json(self) -> str:
        """Canonical serialization; the manifest hash is taken over this."""
        return json.dumps(_jsonable(self.values), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _coerce(key: str, default, value):
    if value is None:
        if default is None:
            return None
        raise ConfigError(key, "must not be empty")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, "must be true or false")
        return value
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, "must be a list")
        return list(value)
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"must be an integer, got {value!r}")
        return value
    if isinstance(default, float) or default is None:
        if isinstance(value, str) and value.lower() in ("inf", ".inf", "+inf"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(key, "must be a string")
        return value
    return value


def merge_overrides(overrides: dict | None) -> dict:
    values = {s: dict(v) for s, v in DEFAULTS.items()}
    for sec, body in (overrides or {}).items():
        if sec not in DEFAULTS:
            raise ConfigError(sec, "unknown section")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(sec, "section must be a mapping")
        for k, v in body.items():
            key = f"{sec}.{k}"
            if k not in DEFAULTS[sec]:
                raise ConfigError(key, "unknown key")
            values[sec][k] = _coerce(key, DEFAULTS[sec][k], v)
    return values


def validate(values: dict) -> None:
    sim, traffic, users = values["simulation"], values["traffic"], values["users"]
    if sim["num_runs"] < 1:
        raise ConfigError("simulation.num_runs", "must be >= 1")
    if not 0.0 < sim["confidence_level"] < 1.0:
        raise ConfigError("simulation.confidence_level", "must be in (0, 1)")
    bad = [a for a in sim["algorithms"] if a not in ALGORITHMS]
    if bad or not sim["algorithms"]:
        raise ConfigError("simulation.algorithms", f"must be a non-empty subset of {list(ALGORITHMS)}")
    bad = [s for s in sim["sweeps"] if s not in SWEEPS]
    if bad:
        raise ConfigError("simulation.sweeps", f"unknown sweep(s) {bad}")
    if any(x < 0 for x in traffic["offered_loads_mbps"]):
        raise ConfigError("traffic.offered_loads_mbps", "loads must be >= 0")
    if any(not isinstance(n, int) or n < 1 for n in traffic["user_sweep"]):
        raise ConfigError("traffic.user_sweep", "user counts must be positive integers")
    if users["num_users"] is not None and users["num_users"] < 1:
        raise ConfigError("users.num_users", "must be >= 1")
    if values["model"]["noma_policy"] not in ("ftpa", "fixed"):
        raise ConfigError("model.noma_policy", "must be 'ftpa' or 'fixed'")
    # exercise the component constructors so their checks run at load time
    build_scenario_config(values, None)


def build_scenario_config(values: dict, num_users: int | None) -> ScenarioConfig:
    phy_v, harq, users, traffic = values["phy"], values["harq"], values["users"], values["traffic"]
    ql, sim, model = values["q_learning"], values["simulation"], values["model"]

    def section(prefix, fn):
        try:
            return fn()
        except ConfigError as exc:
            raise ConfigError(config_key(exc.key, prefix), str(exc).split(": ", 1)[-1]) from None

    phy = section(
        "phy",
        lambda: PhyConfig(
            num_antennas=phy_v["num_antennas"],
            antenna_spacing_ratio=phy_v["antenna_spacing_ratio"],
            num_paths=phy_v["num_paths"],
            pathloss_exponent=phy_v["pathloss_exponent"],
            gain_variance=phy_v["gain_variance"],
            carrier_frequency=phy_v["carrier_frequency"],
            bandwidth=phy_v["bandwidth"],
            noise_figure_db=phy_v["noise_figure_db"],
            noise_variance=phy_v["noise_variance"],
        ),
    )
    pcp = section(
        "users",
        lambda: PcpConfig(
            mean_users_per_cluster=users["pcp_mean_users"],
            num_clusters=users["num_clusters"],
            cluster_radius=users["cluster_radius"],
            fixed_total_users=num_users if num_users is not None else users["num_users"],
        ),
    )
    topo = section(
        "users",
        lambda: TopologyConfig(num_gnbs=users["num_gnbs"], inter_gnb_distance=users["inter_gnb_distance"]),
    )
    mac = section(
        "harq",
        lambda: MacConfig(
            tti_ms=phy_v["tti_ms"],
            packet_size_bytes=traffic["packet_size_bytes"],
            round_trip_ttis=harq["round_trip_ttis"],
            num_processes=harq["num_processes"],
            max_retransmissions=harq["max_retransmissions"],
        ),
    )
    agent = section(
        "q_learning",
        lambda: AgentConfig(
            learning_rate=ql["learning_rate"],
            discount=ql["discount"],
            exploration=ql["exploration"],
            exploration_horizon=ql["exploration_horizon"],
            sinr_threshold_db=ql["sinr_threshold_db"],
            power_levels_dbm=tuple(float(x) for x in ql["power_levels_dbm"]),
            max_tx_power_dbm=phy_v["max_tx_power_dbm"],
            reward_scope=ql["reward_scope"],
        ),
    )
    noma = section(
        "model",
        lambda: NomaPolicy(
            name=model["noma_policy"],
            xi=model["ftpa_exponent"],
            split=tuple(float(x) for x in model["noma_split"]),
        ),
    )
    return section(
        "model",
        lambda: ScenarioConfig(
            phy=phy,
            pcp=pcp,
            topology=topo,
            mac=mac,
            agent=agent,
            noma=noma,
            beams_per_gnb=model["beams_per_gnb"],
            intersection_users=model["intersection_users"],
            intersection_margin_db=model["intersection_margin_db"],
            subband_matched=model["subband_matched"],
            idle_beams_silent=model["idle_beams_silent"],
            num_ttis=sim["num_ttis"],
            kmeans_max_iter=model["kmeans_max_iter"],
        ),
    )


def config_from_dict(overrides: dict | None) -> ExperimentConfig:
    values = merge_overrides(overrides)
    validate(values)
    return ExperimentConfig(values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"cannot parse {path}: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a mapping of sections")
    return config_from_dict(raw)
