"""Shared agent machinery: config, critic handles, divergence signalling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..nn import AdamState, GradientSet, ParameterSet


class DivergenceError(RuntimeError):
    """A loss or gradient went non-finite; the run must abort with diagnostics."""


@dataclass
class AgentConfig:
    name: str = "dqn"
    gamma: float = 0.99
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    batch_size: int = 128
    hidden: list[int] | None = None  # None: 2x256 on pendulum, 2x64 elsewhere
    activation: str = "tanh"
    target_period: int = 500         # DQN hard-copy period, in gradient steps
    polyak: float = 0.005            # DDPG/SAC target mixing fraction per update
    alpha: float = 0.2               # SAC entropy coefficient (fixed)
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 10000
    noise_sigma: float = 0.1         # DDPG exploration noise as fraction of half-range

    def validate(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma {self.gamma} outside [0, 1)")
        for key in ("lr_actor", "lr_critic", "alpha", "eps_start", "eps_end", "noise_sigma"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be >= 0")
        if not 0.0 <= self.polyak <= 1.0:
            raise ValueError("polyak must be in [0, 1]")
        for key in ("batch_size", "target_period", "eps_decay_steps"):
            if getattr(self, key) < 1:
                raise ValueError(f"{key} must be >= 1")


@dataclass
class CriticHandle:
    """Uniform access to one critic: evaluation, parameters, and gradients.

    value(obs, act) returns per-row Q(s, a); value_with_backward additionally
    returns a closure mapping dLoss/dQ rows to a GradientSet of the critic's
    parameters. set_params installs updated parameters back into the agent.
    """

    name: str
    get_params: Callable[[], ParameterSet]
    set_params: Callable[[ParameterSet], None]
    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    value_with_backward: Callable[[np.ndarray, np.ndarray], tuple]


def ensure_finite_loss(value: float, what: str) -> float:
    if not np.isfinite(value):
        raise DivergenceError(f"{what} went non-finite ({value})")
    return float(value)
