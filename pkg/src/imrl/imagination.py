"""Similarity-based critic-difference propagation.

A momentum-averaged siamese encoder pair maps (state, action) pairs to
multi-head features; per-head similarities feed a small difference net whose
scalar output d is trained so that Q(s,a) + d regresses onto Q(s_n,a_n).
Gradients reach the online encoder, the difference net, and the critic; the
target encoder moves only by exponential moving average.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agents.base import CriticHandle, ensure_finite_loss
from .nn import (Activation, AdamState, GradientSet, ParameterSet, adam_step,
                 backward_from_cache, ema_update, forward_cached, init_mlp,
                 mlp_forward)
from .replay import PairBatch, ReplayBuffer, TransitionBatch

ENCODER_HIDDEN = [64, 64]
DIN_HIDDEN = [32]
SIM_KINDS = ("cosine", "bilinear")
ZERO_NORM_EPS = 1e-12


@dataclass
class ImaginationConfig:
    k: int = 4
    feature_dim: int = 32
    momentum: float = 0.95
    # weights the critic's applied propagation step; 1.0 lets the propagation
    # optimizer move the critic as fast as TD does and empirically wrecks
    # value structure (Adam normalizes away gradient magnitude), so the
    # default keeps it a mild regularizer
    loss_weight: float = 0.05
    pairs_per_step: int = 128
    detach_target_critic: bool = False
    sim: str = "cosine"
    lr: float = 3e-4
    cross_episode_only: bool = False

    def validate(self):
        if self.k < 1 or self.feature_dim < 1 or self.pairs_per_step < 1:
            raise ValueError("k, feature_dim, pairs_per_step must be >= 1")
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError("momentum must be in [0, 1]")
        if self.loss_weight < 0 or self.lr < 0:
            raise ValueError("loss_weight and lr must be >= 0")
        if self.sim not in SIM_KINDS:
            raise ValueError(f"sim must be one of {SIM_KINDS}")


@dataclass
class ImaginationState:
    """Online/target encoders plus per-critic difference nets and optimizers.

    f_d starts as an exact copy of f_c and is never touched by any optimizer;
    it moves only through the EMA line at the end of a successful update.
    """

    f_c: ParameterSet
    f_d: ParameterSet
    din: list[ParameterSet]
    adam_fc: AdamState
    adam_din: list[AdamState]
    bilinear: ParameterSet | None = None   # k (F, F) head matrices, stored as weight list
    adam_bilinear: AdamState | None = None
    adam_critic: list[AdamState | None] = field(default_factory=list)


def create_imagination_state(obs_dim: int, act_input_dim: int, cfg: ImaginationConfig,
                             rng: np.random.Generator, n_critics: int = 1) -> ImaginationState:
    cfg.validate()
    enc_dims = [obs_dim + act_input_dim, *ENCODER_HIDDEN, cfg.k * cfg.feature_dim]
    f_c = init_mlp(enc_dims, rng, Activation.TANH)
    din = [init_mlp([cfg.k, *DIN_HIDDEN, 1], rng, Activation.TANH) for _ in range(n_critics)]
    bilinear = None
    adam_bilinear = None
    if cfg.sim == "bilinear":
        bound = np.sqrt(1.0 / cfg.feature_dim)
        mats = [rng.uniform(-bound, bound, size=(cfg.feature_dim, cfg.feature_dim))
                for _ in range(cfg.k)]
        bilinear = ParameterSet(mats, [np.zeros(cfg.feature_dim) for _ in range(cfg.k)])
        adam_bilinear = AdamState.create(bilinear, cfg.lr)
    return ImaginationState(
        f_c=f_c,
        f_d=f_c.copy(),
        din=din,
        adam_fc=AdamState.create(f_c, cfg.lr),
        adam_din=[AdamState.create(d, cfg.lr) for d in din],
        bilinear=bilinear,
        adam_bilinear=adam_bilinear,
        adam_critic=[None] * n_critics,
    )


def encode_actions(actions: np.ndarray, discrete: bool, width: int) -> np.ndarray:
    """Discrete actions become one-hot rows; continuous actions pass through."""
    if discrete:
        idx = np.asarray(actions, dtype=np.int64).reshape(-1)
        out = np.zeros((idx.shape[0], width))
        out[np.arange(idx.shape[0]), idx] = 1.0
        return out
    return np.asarray(actions, dtype=np.float64).reshape(-1, width)


def scn_features(enc: ParameterSet, obs: np.ndarray, action,
                 discrete: bool = False, action_width: int | None = None) -> np.ndarray:
    """Encoder features of one (s, a) pair: enc(concat(s, a)) of length k*feature_dim."""
    obs = np.asarray(obs, dtype=np.float64).reshape(-1)
    if discrete:
        width = action_width if action_width is not None else enc.in_dim - obs.shape[0]
        a = encode_actions(np.array([action]), True, width)[0]
    else:
        a = np.asarray(action, dtype=np.float64).reshape(-1)
    return mlp_forward(enc, np.concatenate([obs, a]))


def similarity_vector(q: np.ndarray, q_n: np.ndarray, k: int, feature_dim: int) -> np.ndarray:
    """Per-head cosine similarities; head i reads slice [i*feature_dim, (i+1)*feature_dim)."""
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    q_n = np.asarray(q_n, dtype=np.float64).reshape(-1)
    if q.shape[0] != k * feature_dim or q_n.shape[0] != k * feature_dim:
        raise ValueError(f"feature length {q.shape[0]} != k*feature_dim = {k * feature_dim}")
    v, _ = _cosine_heads(q[None, :], q_n[None, :], k, feature_dim)
    return v[0]


def din_difference(din: ParameterSet, v: np.ndarray) -> float:
    """Scalar critic difference inferred from a similarity vector."""
    return float(mlp_forward(din, np.asarray(v, dtype=np.float64))[0])


def _cosine_heads(q: np.ndarray, q_n: np.ndarray, k: int, feature_dim: int):
    """Batched per-head cosine with a backward closure into the online side only."""
    B = q.shape[0]
    qh = q.reshape(B, k, feature_dim)
    qnh = q_n.reshape(B, k, feature_dim)
    dot = (qh * qnh).sum(axis=2)
    nu = np.linalg.norm(qh, axis=2)
    nv = np.linalg.norm(qnh, axis=2)
    valid = (nu >= ZERO_NORM_EPS) & (nv >= ZERO_NORM_EPS)
    denom = np.where(valid, nu * nv, 1.0)
    raw = np.where(valid, dot / denom, 0.0)
    v = np.clip(raw, -1.0, 1.0)

    def backward(dv: np.ndarray) -> np.ndarray:
        # d cos / d q_head = q_n/(|q||q_n|) - cos * q/|q|^2 ; zero-norm heads are constant
        nu_safe = np.where(valid, nu, 1.0)
        coeff = (dv * valid)[:, :, None]
        dq = coeff * (qnh / denom[:, :, None] - (raw / (nu_safe * nu_safe))[:, :, None] * qh)
        return dq.reshape(B, k * feature_dim)

    return v, backward


def _bilinear_heads(q: np.ndarray, q_n: np.ndarray, k: int, feature_dim: int,
                    mats: ParameterSet):
    """v_i = q_i^T W_i q'_i per head; backward returns (dq, dW list)."""
    B = q.shape[0]
    qh = q.reshape(B, k, feature_dim)
    qnh = q_n.reshape(B, k, feature_dim)
    v = np.empty((B, k))
    for i, w in enumerate(mats.weights):
        v[:, i] = np.einsum("bi,ij,bj->b", qh[:, i], w, qnh[:, i])

    def backward(dv: np.ndarray):
        dq = np.empty_like(qh)
        dw = []
        for i, w in enumerate(mats.weights):
            dq[:, i] = dv[:, i:i + 1] * (qnh[:, i] @ w.T)
            dw.append(np.einsum("b,bi,bj->ij", dv[:, i], qh[:, i], qnh[:, i]))
        grads = GradientSet(dw, [np.zeros_like(b) for b in mats.biases])
        return dq.reshape(B, k * feature_dim), grads

    return v, backward


def _add_grads(a: GradientSet, b: GradientSet) -> GradientSet:
    return GradientSet([x + y for x, y in zip(a.weights, b.weights)],
                       [x + y for x, y in zip(a.biases, b.biases)])


def _scale_grads(g: GradientSet, s: float) -> GradientSet:
    return GradientSet([s * x for x in g.weights], [s * x for x in g.biases])


def _im_loss_and_grads(state: ImaginationState, critic: CriticHandle, pairs: PairBatch,
                       cfg: ImaginationConfig, head: int, discrete_actions: bool,
                       action_width: int | None):
    """Propagation loss mean((Q(s,a) + d - Q(s_n,a_n))^2) with exact gradients.

    Returns (loss, encoder grads, difference-net grads, critic grads already
    scaled by loss_weight, bilinear grads or None). The target-encoder side
    carries no gradient.
    """
    if len(pairs) < 1:
        raise ValueError("empty pair batch")
    k, fd = cfg.k, cfg.feature_dim
    if state.f_c.out_dim != k * fd:
        raise ValueError(f"encoder emits {state.f_c.out_dim}, config wants k*feature_dim = {k * fd}")
    anchor, other = pairs.anchor, pairs.other
    width = action_width
    if width is None:
        width = state.f_c.in_dim - anchor.obs.shape[1]

    x = np.concatenate([anchor.obs, encode_actions(anchor.actions, discrete_actions, width)], axis=1)
    x_n = np.concatenate([other.obs, encode_actions(other.actions, discrete_actions, width)], axis=1)
    q_feat, cache_enc = forward_cached(state.f_c, x)
    q_feat_n = mlp_forward(state.f_d, x_n)  # stop gradient: target-encoder side is constant

    if cfg.sim == "cosine":
        v, sim_backward = _cosine_heads(q_feat, q_feat_n, k, fd)
    else:
        v, sim_backward = _bilinear_heads(q_feat, q_feat_n, k, fd, state.bilinear)

    d_out, cache_din = forward_cached(state.din[head], v)
    d = d_out[:, 0]

    q_anchor, backward_anchor = critic.value_with_backward(anchor.obs, anchor.actions)
    if cfg.detach_target_critic:
        q_other = critic.value(other.obs, other.actions)
        backward_other = None
    else:
        q_other, backward_other = critic.value_with_backward(other.obs, other.actions)

    resid = q_anchor + d - q_other
    B = len(pairs)
    loss = ensure_finite_loss(np.mean(resid * resid), "propagation loss")
    g = 2.0 * resid / B

    din_grads, dv = backward_from_cache(state.din[head], cache_din, g[:, None])
    if cfg.sim == "cosine":
        dq = sim_backward(dv)
        bilinear_grads = None
    else:
        dq, bilinear_grads = sim_backward(dv)
    enc_grads, _ = backward_from_cache(state.f_c, cache_enc, dq)

    critic_grads = backward_anchor(g)
    if backward_other is not None:
        critic_grads = _add_grads(critic_grads, backward_other(-g))
    return loss, enc_grads, din_grads, critic_grads, bilinear_grads


def im_update(state: ImaginationState, critic: CriticHandle, pairs: PairBatch,
              cfg: ImaginationConfig, head: int = 0, discrete_actions: bool = False,
              action_width: int | None = None) -> float:
    """One propagation step over a pair batch against one critic.

    Steps f_c, the head's difference net, and the critic with Adam, then moves
    f_d by EMA. loss_weight scales the critic's applied step (Adam is
    invariant to plain gradient scaling, so the weight acts on the step size:
    the critic's effective learning rate is loss_weight * lr). All mutations
    are committed only after every gradient passed the finite check, so a
    failed update leaves the state untouched.
    """
    loss, enc_grads, din_grads, critic_grads, bilinear_grads = _im_loss_and_grads(
        state, critic, pairs, cfg, head, discrete_actions, action_width)

    if state.adam_critic[head] is None:
        state.adam_critic[head] = AdamState.create(critic.get_params(),
                                                   cfg.loss_weight * cfg.lr)

    # stage every step, then commit; a raise above leaves everything untouched
    new_fc, new_adam_fc = adam_step(state.adam_fc, state.f_c, enc_grads)
    new_din, new_adam_din = adam_step(state.adam_din[head], state.din[head], din_grads)
    new_critic, new_adam_critic = adam_step(state.adam_critic[head], critic.get_params(),
                                            critic_grads)
    if bilinear_grads is not None:
        state.bilinear, state.adam_bilinear = adam_step(state.adam_bilinear, state.bilinear,
                                                        bilinear_grads)
    state.f_c = new_fc
    state.adam_fc = new_adam_fc
    state.din[head] = new_din
    state.adam_din[head] = new_adam_din
    state.adam_critic[head] = new_adam_critic
    critic.set_params(new_critic)
    state.f_d = ema_update(state.f_d, state.f_c, cfg.momentum)
    return loss


class ImaginationAugmentedAgent:
    """Wraps an agent so each gradient step appends one propagation update per critic.

    With loss_weight == 0 and lr == 0 the wrapper is an exact no-op: it runs
    no propagation arithmetic and consumes no randomness, so the inner agent's
    trajectory is bitwise identical to the unwrapped one.
    """

    def __init__(self, agent, cfg: ImaginationConfig, state: ImaginationState,
                 buffer: ReplayBuffer, pair_rng: np.random.Generator):
        self.agent = agent
        self.cfg = cfg
        self.state = state
        self.buffer = buffer
        self.pair_rng = pair_rng
        self.noop = cfg.loss_weight == 0.0 and cfg.lr == 0.0
        self._action_width = agent.n_actions if agent.discrete else agent.act_dim

    @property
    def discrete(self):
        return self.agent.discrete

    def act(self, obs, mode, rng):
        return self.agent.act(obs, mode, rng)

    def critic_handles(self):
        return self.agent.critic_handles()

    def update(self, batch: TransitionBatch, rng: np.random.Generator) -> dict:
        losses = self.agent.update(batch, rng)
        if self.noop:
            losses["im_loss"] = 0.0
            return losses
        pairs = self.buffer.sample_pairs(self.cfg.pairs_per_step, self.pair_rng,
                                         anchors=batch,
                                         cross_episode_only=self.cfg.cross_episode_only)
        im_losses = [
            im_update(self.state, handle, pairs, self.cfg, head=i,
                      discrete_actions=self.agent.discrete,
                      action_width=self._action_width)
            for i, handle in enumerate(self.agent.critic_handles())
        ]
        losses["im_loss"] = float(np.mean(im_losses))
        return losses

    def state_dict(self) -> dict:
        inner = self.agent.state_dict()
        params = dict(inner["params"])
        adam = dict(inner["adam"])
        params["im_f_c"] = self.state.f_c
        params["im_f_d"] = self.state.f_d
        adam["im_f_c"] = self.state.adam_fc
        for i, (d, a) in enumerate(zip(self.state.din, self.state.adam_din)):
            params[f"im_din{i}"] = d
            adam[f"im_din{i}"] = a
        for i, a in enumerate(self.state.adam_critic):
            if a is not None:
                adam[f"im_critic{i}"] = a
        if self.state.bilinear is not None:
            params["im_bilinear"] = self.state.bilinear
            adam["im_bilinear"] = self.state.adam_bilinear
        return {"params": params, "adam": adam, "counters": dict(inner["counters"])}

    def load_state_dict(self, d: dict) -> None:
        params = d["params"]
        adam = d["adam"]
        self.state.f_c = params.pop("im_f_c")
        self.state.f_d = params.pop("im_f_d")
        self.state.adam_fc = adam.pop("im_f_c")
        for i in range(len(self.state.din)):
            self.state.din[i] = params.pop(f"im_din{i}")
            self.state.adam_din[i] = adam.pop(f"im_din{i}")
        for i in range(len(self.state.adam_critic)):
            self.state.adam_critic[i] = adam.pop(f"im_critic{i}", None)
        if "im_bilinear" in params:
            self.state.bilinear = params.pop("im_bilinear")
            self.state.adam_bilinear = adam.pop("im_bilinear")
        self.agent.load_state_dict({"params": params, "adam": adam, "counters": d["counters"]})


def attach(agent, cfg: ImaginationConfig, buffer: ReplayBuffer,
           pair_rng: np.random.Generator, init_rng: np.random.Generator,
           obs_dim: int) -> ImaginationAugmentedAgent:
    """Wire the propagation module onto an agent's critics."""
    cfg.validate()
    handles = agent.critic_handles()
    if not handles:
        raise ValueError("agent exposes no critic to attach to")
    act_width = agent.n_actions if agent.discrete else agent.act_dim
    state = create_imagination_state(obs_dim, act_width, cfg, init_rng,
                                     n_critics=len(handles))
    # eager critic optimizer states keep the checkpoint layout stable
    state.adam_critic = [AdamState.create(h.get_params(), cfg.loss_weight * cfg.lr)
                         for h in handles]
    return ImaginationAugmentedAgent(agent, cfg, state, buffer, pair_rng)
