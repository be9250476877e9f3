"""Minimal differentiable-network substrate.

Fixed-topology multilayer perceptrons with exact reverse-mode gradients,
Adam with bias correction, exponential-moving-average parameter tracking,
and cosine similarity. Everything is float64 and purely functional: no
hidden globals, no implicit mutation.

Parameters live in one contiguous buffer per net (layer order w0,b0,w1,b1,...)
with per-layer views on top, so optimizer and EMA arithmetic are single
vectorized operations.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

ZERO_NORM_EPS = 1e-12


class Activation(Enum):
    TANH = "tanh"
    RELU = "relu"


def _build_views(flat: np.ndarray, shapes: list[tuple]):
    weights, biases = [], []
    pos = 0
    for out_dim, in_dim in shapes:
        weights.append(flat[pos:pos + out_dim * in_dim].reshape(out_dim, in_dim))
        pos += out_dim * in_dim
        biases.append(flat[pos:pos + out_dim])
        pos += out_dim
    return weights, biases, pos


class ParameterSet:
    """Weights and biases of an MLP.

    weights[i] has shape (out_i, in_i), biases[i] shape (out_i,). The same
    hidden activation is applied after every layer except the last; the
    output layer is linear.
    """

    __slots__ = ("flat", "weights", "biases", "activation", "_shapes")

    def __init__(self, weights, biases, activation: Activation = Activation.TANH):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need matching, nonempty weight/bias lists")
        shapes = []
        for i, (w, b) in enumerate(zip(weights, biases)):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if i > 0 and w.shape[1] != shapes[-1][0]:
                raise ValueError(
                    f"layer {i} expects {w.shape[1]} inputs but layer {i-1} emits {shapes[-1][0]}"
                )
            shapes.append(w.shape)
        size = sum(o * i + o for o, i in shapes)
        flat = np.empty(size)
        views_w, views_b, _ = _build_views(flat, shapes)
        for dst, src in zip(views_w, weights):
            dst[...] = src
        for dst, src in zip(views_b, biases):
            dst[...] = np.asarray(src, dtype=np.float64)
        self.flat = flat
        self.weights = views_w
        self.biases = views_b
        self.activation = activation
        self._shapes = shapes

    @classmethod
    def _from_flat(cls, flat: np.ndarray, template: "ParameterSet") -> "ParameterSet":
        obj = object.__new__(cls)
        views_w, views_b, _ = _build_views(flat, template._shapes)
        obj.flat = flat
        obj.weights = views_w
        obj.biases = views_b
        obj.activation = template.activation
        obj._shapes = template._shapes
        return obj

    @property
    def in_dim(self) -> int:
        return self._shapes[0][1]

    @property
    def out_dim(self) -> int:
        return self._shapes[-1][0]

    def copy(self) -> "ParameterSet":
        return ParameterSet._from_flat(self.flat.copy(), self)

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.flat).all())


class GradientSet:
    """Arrays shape-matching a ParameterSet."""

    __slots__ = ("weights", "biases")

    def __init__(self, weights, biases):
        self.weights = weights
        self.biases = biases

    def ravelled(self) -> np.ndarray:
        return np.concatenate(
            [a.ravel() for pair in zip(self.weights, self.biases) for a in pair])

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.ravelled()).all())


class AdamState:
    """First/second moment accumulators plus hyperparameters for one net."""

    __slots__ = ("m_flat", "v_flat", "m_weights", "m_biases", "v_weights", "v_biases",
                 "t", "lr", "beta1", "beta2", "eps", "_shapes")

    def __init__(self, m_weights, m_biases, v_weights, v_biases, t: int, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        shapes = [np.asarray(w).shape for w in m_weights]
        size = sum(o * i + o for o, i in shapes)
        m_flat = np.empty(size)
        v_flat = np.empty(size)
        mw, mb, _ = _build_views(m_flat, shapes)
        vw, vb, _ = _build_views(v_flat, shapes)
        for dst, src in zip(mw + mb, list(m_weights) + list(m_biases)):
            dst[...] = src
        for dst, src in zip(vw + vb, list(v_weights) + list(v_biases)):
            dst[...] = src
        self._init_from(m_flat, v_flat, mw, mb, vw, vb, shapes, t, lr, beta1, beta2, eps)

    def _init_from(self, m_flat, v_flat, mw, mb, vw, vb, shapes, t, lr, b1, b2, eps):
        self.m_flat = m_flat
        self.v_flat = v_flat
        self.m_weights = mw
        self.m_biases = mb
        self.v_weights = vw
        self.v_biases = vb
        self._shapes = shapes
        self.t = t
        self.lr = lr
        self.beta1 = b1
        self.beta2 = b2
        self.eps = eps

    @classmethod
    def _from_flats(cls, m_flat, v_flat, t, template: "AdamState") -> "AdamState":
        obj = object.__new__(cls)
        mw, mb, _ = _build_views(m_flat, template._shapes)
        vw, vb, _ = _build_views(v_flat, template._shapes)
        obj._init_from(m_flat, v_flat, mw, mb, vw, vb, template._shapes, t,
                       template.lr, template.beta1, template.beta2, template.eps)
        return obj

    @classmethod
    def create(cls, params: ParameterSet, lr: float, beta1: float = 0.9,
               beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        obj = object.__new__(cls)
        size = params.flat.size
        m_flat = np.zeros(size)
        v_flat = np.zeros(size)
        mw, mb, _ = _build_views(m_flat, params._shapes)
        vw, vb, _ = _build_views(v_flat, params._shapes)
        obj._init_from(m_flat, v_flat, mw, mb, vw, vb, params._shapes, 0,
                       lr, beta1, beta2, eps)
        return obj


def init_mlp(dims: list[int], rng: np.random.Generator,
             activation: Activation = Activation.TANH) -> ParameterSet:
    """Seeded uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)] for weights and biases."""
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=(fan_out,)))
    return ParameterSet(weights, biases, activation)


def _activate(z: np.ndarray, act: Activation) -> np.ndarray:
    if act is Activation.TANH:
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_grad_from_output(a: np.ndarray, act: Activation) -> np.ndarray:
    # both activations admit derivative recovery from their own output
    if act is Activation.TANH:
        return 1.0 - a * a
    return (a > 0.0).astype(np.float64)


def forward_cached(params: ParameterSet, x: np.ndarray):
    """Batched forward pass keeping per-layer activations for the backward pass.

    x: (B, in_dim). Returns (output (B, out_dim), cache of activations).
    """
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ValueError(f"input shape {x.shape} incompatible with in_dim {params.in_dim}")
    acts = [x]
    a = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = z if i == last else _activate(z, params.activation)
        acts.append(a)
    return a, acts


def backward_from_cache(params: ParameterSet, cache: list[np.ndarray],
                        upstream: np.ndarray, need_input_grad: bool = True):
    """Exact reverse-mode gradients of sum_b <upstream_b, output_b>.

    upstream: (B, out_dim). Returns (GradientSet, input gradient (B, in_dim),
    or None when need_input_grad is False).
    """
    if upstream.shape != cache[-1].shape:
        raise ValueError(f"upstream shape {upstream.shape} != output shape {cache[-1].shape}")
    n = len(params.weights)
    gw: list = [None] * n
    gb: list = [None] * n
    delta = upstream
    din = None
    for i in range(n - 1, -1, -1):
        gw[i] = delta.T @ cache[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * _activation_grad_from_output(
                cache[i], params.activation)
        elif need_input_grad:
            din = delta @ params.weights[0]
    return GradientSet(gw, gb), din


def mlp_forward(params: ParameterSet, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; accepts a single vector or a (B, in_dim) batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    out, _ = forward_cached(params, x[None, :] if single else x)
    return out[0] if single else out


def mlp_backward(params: ParameterSet, x: np.ndarray, upstream: np.ndarray):
    """Gradients of <upstream, mlp_forward(params, x)> w.r.t. parameters and input."""
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    u2 = upstream[None, :] if single else upstream
    _, cache = forward_cached(params, x2)
    grads, din = backward_from_cache(params, cache, u2)
    return grads, (din[0] if single else din)


def _check_congruent(params: ParameterSet, grads: GradientSet):
    if len(grads.weights) != len(params.weights):
        raise ValueError("gradient layer count mismatch")
    for i, (w, g) in enumerate(zip(params.weights, grads.weights)):
        if w.shape != g.shape:
            raise ValueError(f"layer {i}: weight grad {g.shape} != param {w.shape}")
    for i, (b, g) in enumerate(zip(params.biases, grads.biases)):
        if b.shape != g.shape:
            raise ValueError(f"layer {i}: bias grad {g.shape} != param {b.shape}")


def adam_step(state: AdamState, params: ParameterSet, grads: GradientSet):
    """One Adam update with bias correction. Returns (new params, new state).

    Non-finite gradients are rejected before anything is touched.
    """
    _check_congruent(params, grads)
    g = grads.ravelled()
    if not np.isfinite(g).all():
        raise ValueError("non-finite gradients")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m_new = b1 * state.m_flat + (1.0 - b1) * g
    v_new = b2 * state.v_flat + (1.0 - b2) * g * g
    step = state.lr * (m_new / (1.0 - b1 ** t)) / (
        np.sqrt(v_new / (1.0 - b2 ** t)) + state.eps)
    new_params = ParameterSet._from_flat(params.flat - step, params)
    new_state = AdamState._from_flats(m_new, v_new, t, state)
    return new_params, new_state


def ema_update(target: ParameterSet, online: ParameterSet, m: float) -> ParameterSet:
    """target' = m*target + (1-m)*online, elementwise, clamped into [min, max]."""
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"momentum {m} outside [0, 1]")
    if target._shapes != online._shapes:
        raise ValueError("parameter sets are not shape-congruent")
    t, o = target.flat, online.flat
    if m == 0.0:
        mixed = o.copy()
    elif m == 1.0:
        mixed = t.copy()
    else:
        # clip guards the containment invariant against last-ulp rounding
        mixed = np.clip(m * t + (1.0 - m) * o, np.minimum(t, o), np.maximum(t, o))
    return ParameterSet._from_flat(mixed, target)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """<u,v>/(|u||v|) clamped to [-1, 1]; returns 0 when either norm < 1e-12."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    # rescale by max-abs first so huge finite inputs cannot overflow the norm
    mu = np.max(np.abs(u)) if u.size else 0.0
    mv = np.max(np.abs(v)) if v.size else 0.0
    if mu == 0.0 or mv == 0.0:
        return 0.0
    us = u / mu
    vs = v / mv
    nu = np.linalg.norm(us)
    nv = np.linalg.norm(vs)
    if nu * mu < ZERO_NORM_EPS or nv * mv < ZERO_NORM_EPS:
        return 0.0
    c = float(np.dot(us / nu, vs / nv))
    return float(np.clip(c, -1.0, 1.0))
