"""Experiment configuration: defaults, validation, JSON round-trip, seeds.

Every tunable lives here so a run is fully described by one JSON file
plus a master seed. Independent RNG streams (environment, agent,
evaluation, hypervolume) are split from the master seed so changing one
consumer never perturbs another.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import RoadConfig


@dataclass
class TrainConfig:
    episodes: int = 1000
    batch_size: int = 64
    discount: float = 0.5
    lr_dqn: float = 1e-3
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    penalty: float = 1.0
    replay_capacity: int = 100_000
    tau: float = 0.005
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.5   # fraction of episodes over which eps anneals
    noise_start: float = 0.2
    noise_end: float = 0.02
    hidden: tuple = (512, 256, 128)
    update_cadence: str = "step"      # "step" or "episode"
    updates_per_step: int = 1         # mini-batch updates per environment step
    keep_best: bool = False           # return the best trailing-reward checkpoint


@dataclass
class MetaConfig:
    inner_lr_dqn: float = 0.1
    inner_lr_critic: float = 0.01
    inner_lr_actor: float = 0.001
    outer_lr_dqn: float = 0.01
    outer_lr_critic: float = 0.01
    outer_lr_actor: float = 0.001
    iterations: int = 500
    inner_steps: int = 50
    tasks_per_iter: int = 4
    finetune_steps: int = 50
    mode: str = "first_order"         # "first_order" or "exact"
    explore_eps: float = 0.1          # exploration while collecting adaptation data
    explore_noise: float = 0.1


@dataclass
class ExperimentConfig:
    vehicles: int = 10
    processes: int = 4
    demand_per_vehicle: int = 2
    explicit_demand: list = None      # optional V x F 0/1 rows
    antennas: int = 64
    carrier_hz: float = 3e9
    light_speed: float = 2.99e8
    bandwidth_hz: float = 1e7
    payload_bits: int = 1024
    p_max: float = 1.0
    noise_power: float = 0.1
    eps_max: float = 1e-6
    speed_range: tuple = (10.0, 15.0)
    zeta: float = 0.5
    zeta_grid: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    seed: int = 0
    eval_episodes: int = 20
    hv_samples: int = 1_000_000
    frozen_episode_seed: int = None   # pin every episode to one placement/demand draw
    road: RoadConfig = field(default_factory=RoadConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    meta: MetaConfig = field(default_factory=MetaConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = {
            "vehicles": self.vehicles, "processes": self.processes,
            "antennas": self.antennas, "carrier_hz": self.carrier_hz,
            "light_speed": self.light_speed, "bandwidth_hz": self.bandwidth_hz,
            "payload_bits": self.payload_bits, "p_max": self.p_max,
            "noise_power": self.noise_power,
        }
        for name, val in positive.items():
            if val <= 0:
                raise ValueError(f"{name} must be positive, got {val}")
        if not 0.0 < self.eps_max < 1.0:
            raise ValueError("eps_max must be a probability in (0, 1)")
        if not 1 <= self.demand_per_vehicle <= self.processes:
            raise ValueError("demand_per_vehicle must be in [1, processes]")
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError("zeta must lie in [0, 1]")
        for z in self.zeta_grid:
            if not 0.0 <= z <= 1.0:
                raise ValueError("zeta_grid entries must lie in [0, 1]")
        if self.speed_range[0] < 0 or self.speed_range[1] < self.speed_range[0]:
            raise ValueError("speed_range must be 0 <= lo <= hi")
        if self.explicit_demand is not None:
            R = np.asarray(self.explicit_demand)
            if R.shape != (self.vehicles, self.processes):
                raise ValueError("explicit_demand must be vehicles x processes")
        if self.train.update_cadence not in ("step", "episode"):
            raise ValueError("update_cadence must be 'step' or 'episode'")
        if self.meta.mode not in ("first_order", "exact"):
            raise ValueError("meta mode must be 'first_order' or 'exact'")

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["road"]["rsu_position"] = list(self.road.rsu_position)
        d["speed_range"] = list(self.speed_range)
        d["zeta_grid"] = list(self.zeta_grid)
        d["train"]["hidden"] = list(self.train.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        road = dict(d.pop("road", {}))
        if "rsu_position" in road:
            road["rsu_position"] = tuple(road["rsu_position"])
        train = dict(d.pop("train", {}))
        if "hidden" in train:
            train["hidden"] = tuple(train["hidden"])
        meta = dict(d.pop("meta", {}))
        if "speed_range" in d:
            d["speed_range"] = tuple(d["speed_range"])
        if "zeta_grid" in d:
            d["zeta_grid"] = tuple(d["zeta_grid"])
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(road=RoadConfig(**road), train=TrainConfig(**train),
                   meta=MetaConfig(**meta), **d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def config_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def load_config(path):
    """Parse a JSON config file; missing fields take the defaults above."""
    with open(path) as fh:
        text = fh.read()
    if not text.strip():
        return ExperimentConfig()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed config JSON at line {exc.lineno}") from exc
    return ExperimentConfig.from_dict(raw)


def save_config(cfg, path):
    with open(path, "w") as fh:
        fh.write(cfg.to_json() + "\n")


def seed_streams(master_seed):
    """Independent RNG streams for each consumer of randomness."""
    children = np.random.SeedSequence(master_seed).spawn(4)
    names = ("env", "agent", "eval", "hv")
    return {name: np.random.default_rng(seq) for name, seq in zip(names, children)}
