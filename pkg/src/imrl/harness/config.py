"""Declarative experiment configuration: strict JSON parsing with defaults.

The on-disk form is a nested JSON object mirroring the dotted key groups
(env.*, algo.*, im.*, buffer.*, train.*, seed). Unknown keys anywhere are a
hard error; omitted keys take the defaults below.
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..agents.base import AgentConfig
from ..envs import ENV_NAMES
from ..imagination import ImaginationConfig


class ConfigError(ValueError):
    pass


@dataclass
class EnvConfig:
    name: str = "pendulum"


@dataclass
class BufferConfig:
    capacity: int = 100000


@dataclass
class ImRunConfig:
    enabled: bool = False
    k: int = 4
    feature_dim: int = 32
    momentum: float = 0.95
    loss_weight: float = 0.05           # see ImaginationConfig.loss_weight
    pairs_per_step: int | None = None   # None: use algo.batch_size
    detach_target_critic: bool = False
    sim: str = "cosine"
    lr: float | None = None             # None: use algo.lr_critic
    cross_episode_only: bool = False

    def materialize(self, algo: AgentConfig) -> ImaginationConfig:
        cfg = ImaginationConfig(
            k=self.k,
            feature_dim=self.feature_dim,
            momentum=self.momentum,
            loss_weight=self.loss_weight,
            pairs_per_step=self.pairs_per_step if self.pairs_per_step is not None else algo.batch_size,
            detach_target_critic=self.detach_target_critic,
            sim=self.sim,
            lr=self.lr if self.lr is not None else algo.lr_critic,
            cross_episode_only=self.cross_episode_only,
        )
        cfg.validate()
        return cfg


@dataclass
class TrainConfig:
    total_steps: int = 20000
    warmup_steps: int = 1000
    eval_every: int = 1000
    eval_episodes: int = 10
    record_wall_time: bool = False  # off by default so CSVs stay byte-reproducible


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    algo: AgentConfig = field(default_factory=AgentConfig)
    im: ImRunConfig = field(default_factory=ImRunConfig)
    buffer: BufferConfig = field(default_factory=BufferConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def validate(self):
        if self.env.name not in ENV_NAMES:
            raise ConfigError(f"env.name {self.env.name!r} not one of {ENV_NAMES}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.buffer.capacity < 1:
            raise ConfigError("buffer.capacity must be >= 1")
        t = self.train
        if t.total_steps < 0 or t.warmup_steps < 0:
            raise ConfigError("train.total_steps and train.warmup_steps must be >= 0")
        if t.eval_every < 1 or t.eval_episodes < 1:
            raise ConfigError("train.eval_every and train.eval_episodes must be >= 1")
        try:
            self.algo.validate()
            if self.im.enabled:
                self.im.materialize(self.algo)
        except ValueError as e:
            raise ConfigError(str(e)) from e


_GROUPS = {
    "env": EnvConfig,
    "algo": AgentConfig,
    "im": ImRunConfig,
    "buffer": BufferConfig,
    "train": TrainConfig,
}


def _check_type(path: str, value, typ):
    origin = typing.get_origin(typ)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(typ)
        if value is None and type(None) in args:
            return None
        for a in args:
            if a is type(None):
                continue
            try:
                return _check_type(path, value, a)
            except ConfigError:
                pass
        raise ConfigError(f"{path}: {value!r} does not match {typ}")
    if origin in (list, typing.List):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {type(value).__name__}")
        (item_t,) = typing.get_args(typ)
        return [_check_type(f"{path}[{i}]", v, item_t) for i, v in enumerate(value)]
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a bool, got {value!r}")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an int, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported config type {typ}")


def _build_section(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s) at {path}: {', '.join(unknown)}")
    kwargs = {k: _check_type(f"{path}.{k}", v, hints[k]) for k, v in data.items()}
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = sorted(set(data) - set(_GROUPS) - {"seed"})
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    sections = {name: _build_section(cls, data.get(name, {}), name)
                for name, cls in _GROUPS.items()}
    seed = _check_type("seed", data.get("seed", 0), int)
    cfg = ExperimentConfig(seed=seed, **sections)
    cfg.validate()
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {name: dataclasses.asdict(getattr(cfg, name)) for name in _GROUPS}
    out["seed"] = cfg.seed
    return out


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return config_from_dict(data)


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
