"""DQN: Q-network over discrete actions with experience replay and a hard-copied target."""

from __future__ import annotations

import numpy as np

from ..nn import (Activation, AdamState, ParameterSet, adam_step,
                  backward_from_cache, forward_cached, init_mlp, mlp_forward)
from ..replay import TransitionBatch
from .base import AgentConfig, CriticHandle, ensure_finite_loss


def dqn_td_target(batch: TransitionBatch, gamma: float,
                  target_params: ParameterSet) -> np.ndarray:
    """y_i = r_i + gamma * max_a' Q_target(s'_i, a') * (1 - done_i).

    Bootstraps through truncation: only the termination flag gates the tail.
    """
    q_next = mlp_forward(target_params, batch.next_obs)
    not_done = 1.0 - batch.done.astype(np.float64)
    return batch.rewards + gamma * q_next.max(axis=1) * not_done


class DQNAgent:
    discrete = True

    def __init__(self, obs_dim: int, n_actions: int, cfg: AgentConfig,
                 rng: np.random.Generator, hidden: list[int]):
        self.cfg = cfg
        self.n_actions = n_actions
        act = Activation(cfg.activation)
        self.q = init_mlp([obs_dim, *hidden, n_actions], rng, act)
        self.q_target = self.q.copy()
        self.opt = AdamState.create(self.q, cfg.lr_critic)
        self.updates = 0
        self.explore_steps = 0

    def epsilon(self) -> float:
        frac = min(1.0, self.explore_steps / self.cfg.eps_decay_steps)
        return self.cfg.eps_start + (self.cfg.eps_end - self.cfg.eps_start) * frac

    def act(self, obs: np.ndarray, mode: str, rng: np.random.Generator) -> int:
        if mode == "explore":
            eps = self.epsilon()
            self.explore_steps += 1
            if rng.random() < eps:
                return int(rng.integers(self.n_actions))
        return int(np.argmax(mlp_forward(self.q, obs)))

    def _gradients(self, batch: TransitionBatch):
        """MSE(Q(s,a), y) against the frozen target net, with its exact gradient."""
        y = dqn_td_target(batch, self.cfg.gamma, self.q_target)
        q_all, cache = forward_cached(self.q, batch.obs)
        rows = np.arange(len(batch))
        q_sa = q_all[rows, batch.actions]
        diff = q_sa - y
        loss = ensure_finite_loss(np.mean(diff * diff), "DQN critic loss")
        upstream = np.zeros_like(q_all)
        upstream[rows, batch.actions] = 2.0 * diff / len(batch)
        grads, _ = backward_from_cache(self.q, cache, upstream)
        return loss, grads

    def update(self, batch: TransitionBatch, rng: np.random.Generator) -> dict:
        loss, grads = self._gradients(batch)
        self.q, self.opt = adam_step(self.opt, self.q, grads)
        self.updates += 1
        if self.updates % self.cfg.target_period == 0:
            self.q_target = self.q.copy()
        return {"critic_loss": loss, "actor_loss": 0.0}

    def critic_handles(self) -> list[CriticHandle]:
        def value(obs, actions):
            q = mlp_forward(self.q, obs)
            return q[np.arange(obs.shape[0]), actions.astype(np.int64)]

        def value_with_backward(obs, actions):
            net = self.q  # bind: backward must match the net that ran forward
            q_all, cache = forward_cached(net, obs)
            rows = np.arange(obs.shape[0])
            idx = actions.astype(np.int64)

            def backward(dq):
                upstream = np.zeros_like(q_all)
                upstream[rows, idx] = dq
                return backward_from_cache(net, cache, upstream)[0]

            return q_all[rows, idx], backward

        def set_params(p):
            self.q = p

        return [CriticHandle("q", lambda: self.q, set_params, value, value_with_backward)]

    def state_dict(self) -> dict:
        return {
            "params": {"q": self.q, "q_target": self.q_target},
            "adam": {"q": self.opt},
            "counters": {"updates": self.updates, "explore_steps": self.explore_steps},
        }

    def load_state_dict(self, d: dict) -> None:
        self.q = d["params"]["q"]
        self.q_target = d["params"]["q_target"]
        self.opt = d["adam"]["q"]
        self.updates = int(d["counters"]["updates"])
        self.explore_steps = int(d["counters"]["explore_steps"])
