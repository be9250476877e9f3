"""Baseline TD agents behind a uniform act/update/critic-handle interface."""

from __future__ import annotations

import numpy as np

from ..envs import BoxSpace, DiscreteSpace, PendulumEnv
from .base import AgentConfig, CriticHandle, DivergenceError
from .ddpg import DDPGAgent
from .dqn import DQNAgent, dqn_td_target
from .sac import SACAgent

__all__ = [
    "AgentConfig", "CriticHandle", "DivergenceError",
    "DQNAgent", "DDPGAgent", "SACAgent", "dqn_td_target", "build_agent",
]


def default_hidden(env) -> list[int]:
    return [256, 256] if isinstance(env, PendulumEnv) else [64, 64]


def build_agent(env, cfg: AgentConfig, rng: np.random.Generator):
    """Construct the configured agent for the given environment."""
    cfg.validate()
    hidden = cfg.hidden if cfg.hidden is not None else default_hidden(env)
    space = env.action_space
    if cfg.name == "dqn":
        if not isinstance(space, DiscreteSpace):
            raise ValueError("dqn needs a discrete action space")
        return DQNAgent(env.obs_dim, space.n, cfg, rng, hidden)
    if cfg.name in ("ddpg", "sac"):
        if not isinstance(space, BoxSpace):
            raise ValueError(f"{cfg.name} needs a continuous action space")
        cls = DDPGAgent if cfg.name == "ddpg" else SACAgent
        return cls(env.obs_dim, space.dim, space.low, space.high, cfg, rng, hidden)
    raise ValueError(f"unknown algorithm {cfg.name!r}; expected dqn, ddpg, or sac")
