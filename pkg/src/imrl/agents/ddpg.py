"""DDPG: deterministic tanh-squashed actor plus a single Q critic with polyak targets."""

from __future__ import annotations

import numpy as np

from ..nn import (Activation, AdamState, ParameterSet, adam_step,
                  backward_from_cache, ema_update, forward_cached, init_mlp,
                  mlp_forward)
from ..replay import TransitionBatch
from .base import AgentConfig, CriticHandle, ensure_finite_loss


class DDPGAgent:
    discrete = False

    def __init__(self, obs_dim: int, act_dim: int, act_low: float, act_high: float,
                 cfg: AgentConfig, rng: np.random.Generator, hidden: list[int]):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.act_scale = (act_high - act_low) / 2.0
        self.act_center = (act_high + act_low) / 2.0
        self.act_low = act_low
        self.act_high = act_high
        act = Activation(cfg.activation)
        self.actor = init_mlp([obs_dim, *hidden, act_dim], rng, act)
        self.critic = init_mlp([obs_dim + act_dim, *hidden, 1], rng, act)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.opt_actor = AdamState.create(self.actor, cfg.lr_actor)
        self.opt_critic = AdamState.create(self.critic, cfg.lr_critic)
        self.updates = 0

    def _policy(self, params: ParameterSet, obs: np.ndarray) -> np.ndarray:
        return np.tanh(mlp_forward(params, obs)) * self.act_scale + self.act_center

    def act(self, obs: np.ndarray, mode: str, rng: np.random.Generator) -> np.ndarray:
        a = self._policy(self.actor, obs)
        if mode == "explore":
            a = a + self.cfg.noise_sigma * self.act_scale * rng.standard_normal(self.act_dim)
        return np.clip(a, self.act_low, self.act_high)

    def _critic_gradients(self, batch: TransitionBatch):
        """MSE against y = r + gamma*(1-done)*Q_target(s', mu_target(s'))."""
        B = len(batch)
        not_done = 1.0 - batch.done.astype(np.float64)
        a_next = self._policy(self.actor_target, batch.next_obs)
        q_next = mlp_forward(self.critic_target, np.concatenate([batch.next_obs, a_next], axis=1))[:, 0]
        y = batch.rewards + self.cfg.gamma * q_next * not_done
        sa = np.concatenate([batch.obs, batch.actions], axis=1)
        q, cache = forward_cached(self.critic, sa)
        diff = q[:, 0] - y
        loss = ensure_finite_loss(np.mean(diff * diff), "DDPG critic loss")
        grads, _ = backward_from_cache(self.critic, cache, (2.0 * diff / B)[:, None])
        return loss, grads

    def _actor_gradients(self, batch: TransitionBatch):
        """-mean Q(s, mu(s)): critic input-gradient chained through the tanh policy."""
        B = len(batch)
        u, cache_a = forward_cached(self.actor, batch.obs)
        t = np.tanh(u)
        a_pred = t * self.act_scale + self.act_center
        q_pred, cache_c = forward_cached(self.critic, np.concatenate([batch.obs, a_pred], axis=1))
        loss = ensure_finite_loss(-np.mean(q_pred[:, 0]), "DDPG actor loss")
        _, d_input = backward_from_cache(self.critic, cache_c, np.full((B, 1), -1.0 / B))
        d_u = d_input[:, self.obs_dim:] * self.act_scale * (1.0 - t * t)
        grads, _ = backward_from_cache(self.actor, cache_a, d_u)
        return loss, grads

    def update(self, batch: TransitionBatch, rng: np.random.Generator) -> dict:
        critic_loss, critic_grads = self._critic_gradients(batch)
        self.critic, self.opt_critic = adam_step(self.opt_critic, self.critic, critic_grads)

        # actor ascends the just-updated critic
        actor_loss, actor_grads = self._actor_gradients(batch)
        self.actor, self.opt_actor = adam_step(self.opt_actor, self.actor, actor_grads)

        m = 1.0 - self.cfg.polyak
        self.actor_target = ema_update(self.actor_target, self.actor, m)
        self.critic_target = ema_update(self.critic_target, self.critic, m)
        self.updates += 1
        return {"critic_loss": critic_loss, "actor_loss": actor_loss}

    def critic_handles(self) -> list[CriticHandle]:
        def value(obs, actions):
            return mlp_forward(self.critic, np.concatenate([obs, actions], axis=1))[:, 0]

        def value_with_backward(obs, actions):
            net = self.critic  # bind: backward must match the net that ran forward
            out, cache = forward_cached(net, np.concatenate([obs, actions], axis=1))

            def backward(dq):
                return backward_from_cache(net, cache, dq[:, None])[0]

            return out[:, 0], backward

        def set_params(p):
            self.critic = p

        return [CriticHandle("critic", lambda: self.critic, set_params, value, value_with_backward)]

    def state_dict(self) -> dict:
        return {
            "params": {"actor": self.actor, "critic": self.critic,
                       "actor_target": self.actor_target, "critic_target": self.critic_target},
            "adam": {"actor": self.opt_actor, "critic": self.opt_critic},
            "counters": {"updates": self.updates},
        }

    def load_state_dict(self, d: dict) -> None:
        self.actor = d["params"]["actor"]
        self.critic = d["params"]["critic"]
        self.actor_target = d["params"]["actor_target"]
        self.critic_target = d["params"]["critic_target"]
        self.opt_actor = d["adam"]["actor"]
        self.opt_critic = d["adam"]["critic"]
        self.updates = int(d["counters"]["updates"])
