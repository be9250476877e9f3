"""SAC: squashed-Gaussian actor, twin Q critics with min-target, fixed entropy weight."""

from __future__ import annotations

import numpy as np

from ..nn import (Activation, AdamState, adam_step, backward_from_cache,
                  ema_update, forward_cached, init_mlp, mlp_forward)
from ..replay import TransitionBatch
from .base import AgentConfig, CriticHandle, ensure_finite_loss

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
LOG_2PI = np.log(2.0 * np.pi)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _log1m_tanh2(u: np.ndarray) -> np.ndarray:
    # log(1 - tanh(u)^2) in stable form, exact for all u
    return 2.0 * (np.log(2.0) - u - _softplus(-2.0 * u))


class SACAgent:
    discrete = False

    def __init__(self, obs_dim: int, act_dim: int, act_low: float, act_high: float,
                 cfg: AgentConfig, rng: np.random.Generator, hidden: list[int]):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.act_scale = (act_high - act_low) / 2.0
        self.act_center = (act_high + act_low) / 2.0
        act = Activation(cfg.activation)
        self.actor = init_mlp([obs_dim, *hidden, 2 * act_dim], rng, act)
        self.q1 = init_mlp([obs_dim + act_dim, *hidden, 1], rng, act)
        self.q2 = init_mlp([obs_dim + act_dim, *hidden, 1], rng, act)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.opt_actor = AdamState.create(self.actor, cfg.lr_actor)
        self.opt_q1 = AdamState.create(self.q1, cfg.lr_critic)
        self.opt_q2 = AdamState.create(self.q2, cfg.lr_critic)
        self.updates = 0

    def _heads(self, out: np.ndarray):
        mu = out[..., :self.act_dim]
        log_std_raw = out[..., self.act_dim:]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std_raw, log_std

    def _sample(self, obs: np.ndarray, noise: np.ndarray):
        """Reparameterized squashed-Gaussian sample with its log-density."""
        out = mlp_forward(self.actor, obs)
        mu, _, log_std = self._heads(out)
        sigma = np.exp(log_std)
        u = mu + sigma * noise
        t = np.tanh(u)
        a = t * self.act_scale + self.act_center
        log_p = (-0.5 * noise * noise - log_std - 0.5 * LOG_2PI
                 - np.log(self.act_scale) - _log1m_tanh2(u)).sum(axis=-1)
        return a, log_p

    def act(self, obs: np.ndarray, mode: str, rng: np.random.Generator) -> np.ndarray:
        if mode == "explore":
            a, _ = self._sample(obs, rng.standard_normal(self.act_dim))
            return a
        out = mlp_forward(self.actor, obs)
        mu, _, _ = self._heads(out)
        return np.tanh(mu) * self.act_scale + self.act_center

    def _target_values(self, batch: TransitionBatch, noise_next: np.ndarray) -> np.ndarray:
        """y = r + gamma*(1-done)*(min(Q1t, Q2t)(s', a') - alpha*log pi(a'|s'))."""
        not_done = 1.0 - batch.done.astype(np.float64)
        out_next = mlp_forward(self.actor, batch.next_obs)
        mu_n, _, log_std_n = self._heads(out_next)
        sigma_n = np.exp(log_std_n)
        u_n = mu_n + sigma_n * noise_next
        a_next = np.tanh(u_n) * self.act_scale + self.act_center
        log_p_next = (-0.5 * noise_next * noise_next - log_std_n - 0.5 * LOG_2PI
                      - np.log(self.act_scale) - _log1m_tanh2(u_n)).sum(axis=1)
        sa_next = np.concatenate([batch.next_obs, a_next], axis=1)
        tq1 = mlp_forward(self.q1_target, sa_next)[:, 0]
        tq2 = mlp_forward(self.q2_target, sa_next)[:, 0]
        return batch.rewards + self.cfg.gamma * (
            np.minimum(tq1, tq2) - self.cfg.alpha * log_p_next) * not_done

    def _critic_gradients(self, net, sa: np.ndarray, y: np.ndarray, name: str):
        q, cache = forward_cached(net, sa)
        diff = q[:, 0] - y
        loss = ensure_finite_loss(np.mean(diff * diff), f"SAC {name} loss")
        grads, _ = backward_from_cache(net, cache, (2.0 * diff / len(y))[:, None])
        return loss, grads

    def _actor_gradients(self, batch: TransitionBatch, noise: np.ndarray):
        """mean(alpha*log pi - min(Q1,Q2)) with the reparameterized sample."""
        B = len(batch)
        cfg = self.cfg
        out, cache_a = forward_cached(self.actor, batch.obs)
        mu, log_std_raw, log_std = self._heads(out)
        sigma = np.exp(log_std)
        u = mu + sigma * noise
        t = np.tanh(u)
        a = t * self.act_scale + self.act_center
        log_p = (-0.5 * noise * noise - log_std - 0.5 * LOG_2PI
                 - np.log(self.act_scale) - _log1m_tanh2(u)).sum(axis=1)
        sa_pred = np.concatenate([batch.obs, a], axis=1)
        q1a, cache_1 = forward_cached(self.q1, sa_pred)
        q2a, cache_2 = forward_cached(self.q2, sa_pred)
        q1a = q1a[:, 0]
        q2a = q2a[:, 0]
        min_q = np.minimum(q1a, q2a)
        loss = ensure_finite_loss(np.mean(cfg.alpha * log_p - min_q), "SAC actor loss")

        mask1 = (q1a <= q2a).astype(np.float64)
        _, din1 = backward_from_cache(self.q1, cache_1, (-mask1 / B)[:, None])
        _, din2 = backward_from_cache(self.q2, cache_2, (-(1.0 - mask1) / B)[:, None])
        d_a = din1[:, self.obs_dim:] + din2[:, self.obs_dim:]
        # d log pi / du = 2*tanh(u) per dim; du/dmu = 1; du/dlog_std = sigma*noise
        d_u = d_a * self.act_scale * (1.0 - t * t) + (cfg.alpha / B) * 2.0 * t
        d_mu = d_u
        d_log_std = d_u * sigma * noise - cfg.alpha / B
        clamp_pass = ((log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)).astype(np.float64)
        upstream = np.concatenate([d_mu, d_log_std * clamp_pass], axis=1)
        grads, _ = backward_from_cache(self.actor, cache_a, upstream)
        return loss, grads

    def update(self, batch: TransitionBatch, rng: np.random.Generator) -> dict:
        B = len(batch)
        cfg = self.cfg
        noise_next = rng.standard_normal((B, self.act_dim))
        y = self._target_values(batch, noise_next)

        sa = np.concatenate([batch.obs, batch.actions], axis=1)
        q_losses = []
        for attr, opt_attr in (("q1", "opt_q1"), ("q2", "opt_q2")):
            loss, grads = self._critic_gradients(getattr(self, attr), sa, y, attr)
            q_losses.append(loss)
            new_net, new_opt = adam_step(getattr(self, opt_attr), getattr(self, attr), grads)
            setattr(self, attr, new_net)
            setattr(self, opt_attr, new_opt)

        noise = rng.standard_normal((B, self.act_dim))
        actor_loss, actor_grads = self._actor_gradients(batch, noise)
        self.actor, self.opt_actor = adam_step(self.opt_actor, self.actor, actor_grads)

        m = 1.0 - cfg.polyak
        self.q1_target = ema_update(self.q1_target, self.q1, m)
        self.q2_target = ema_update(self.q2_target, self.q2, m)
        self.updates += 1
        return {"critic_loss": float(np.mean(q_losses)), "actor_loss": actor_loss,
                "alpha_used": cfg.alpha}

    def critic_handles(self) -> list[CriticHandle]:
        handles = []
        for attr in ("q1", "q2"):
            def make(attr=attr):
                def value(obs, actions):
                    return mlp_forward(getattr(self, attr), np.concatenate([obs, actions], axis=1))[:, 0]

                def value_with_backward(obs, actions):
                    net = getattr(self, attr)
                    out, cache = forward_cached(net, np.concatenate([obs, actions], axis=1))

                    def backward(dq):
                        return backward_from_cache(net, cache, dq[:, None])[0]

                    return out[:, 0], backward

                def set_params(p):
                    setattr(self, attr, p)

                return CriticHandle(attr, lambda: getattr(self, attr), set_params,
                                    value, value_with_backward)
            handles.append(make())
        return handles

    def state_dict(self) -> dict:
        return {
            "params": {"actor": self.actor, "q1": self.q1, "q2": self.q2,
                       "q1_target": self.q1_target, "q2_target": self.q2_target},
            "adam": {"actor": self.opt_actor, "q1": self.opt_q1, "q2": self.opt_q2},
            "counters": {"updates": self.updates},
        }

    def load_state_dict(self, d: dict) -> None:
        self.actor = d["params"]["actor"]
        self.q1 = d["params"]["q1"]
        self.q2 = d["params"]["q2"]
        self.q1_target = d["params"]["q1_target"]
        self.q2_target = d["params"]["q2_target"]
        self.opt_actor = d["adam"]["actor"]
        self.opt_q1 = d["adam"]["q1"]
        self.opt_q2 = d["adam"]["q2"]
        self.updates = int(d["counters"]["updates"])
