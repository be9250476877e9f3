"""Shared test utilities: parameter flattening, finite-difference oracles,
and a standalone critic handle over a bare net."""

from __future__ import annotations

import numpy as np

from imrl.agents.base import CriticHandle
from imrl.nn import (GradientSet, ParameterSet, backward_from_cache, forward_cached,
                     mlp_forward)


def flatten_params(ps: ParameterSet) -> np.ndarray:
    return np.concatenate([a.ravel() for pair in zip(ps.weights, ps.biases) for a in pair])


def flatten_grads(gs: GradientSet) -> np.ndarray:
    return np.concatenate([a.ravel() for pair in zip(gs.weights, gs.biases) for a in pair])


def unflatten_params(template: ParameterSet, vec: np.ndarray) -> ParameterSet:
    weights, biases = [], []
    pos = 0
    for w, b in zip(template.weights, template.biases):
        weights.append(vec[pos:pos + w.size].reshape(w.shape).copy())
        pos += w.size
        biases.append(vec[pos:pos + b.size].copy())
        pos += b.size
    assert pos == vec.size
    return ParameterSet(weights, biases, template.activation)


def fd_gradient(f, x0: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate."""
    g = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy(); xp[i] += h
        xm = x0.copy(); xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray,
                      rel: float = 1e-4, abs_near_zero: float = 1e-6):
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    err = np.abs(analytic - numeric)
    ok = (err <= rel * scale) | (err <= abs_near_zero)
    assert ok.all(), f"gradient mismatch: max rel {np.max(err / np.maximum(scale, 1e-300))}"


class BoxedCritic:
    """Continuous-action critic handle around a bare net, for direct tests."""

    def __init__(self, net: ParameterSet):
        self.net = net

    def handle(self) -> CriticHandle:
        def value(obs, actions):
            return mlp_forward(self.net, np.concatenate([obs, actions], axis=1))[:, 0]

        def value_with_backward(obs, actions):
            net = self.net
            out, cache = forward_cached(net, np.concatenate([obs, actions], axis=1))

            def backward(dq):
                return backward_from_cache(net, cache, dq[:, None])[0]

            return out[:, 0], backward

        def set_params(p):
            self.net = p

        return CriticHandle("boxed", lambda: self.net, set_params, value, value_with_backward)
