"""Independent straight-line transcription of one propagation update.

Everything here is written sample-by-sample with explicit chain rule and the
plain Adam/EMA recurrences, deliberately sharing no code with the library.
Nets are tanh-hidden MLPs given as ParameterSets.
"""

from __future__ import annotations

import numpy as np


def fwd_cache(net, x):
    acts = [np.asarray(x, dtype=float)]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ acts[-1] + b
        acts.append(z if i == last else np.tanh(z))
    return acts


def bwd_accumulate(net, acts, d_out, gw, gb):
    """One-sample backward; accumulates parameter grads, returns dL/dinput."""
    delta = np.asarray(d_out, dtype=float)
    for i in range(len(net.weights) - 1, -1, -1):
        gw[i] += np.outer(delta, acts[i])
        gb[i] += delta
        d_in = net.weights[i].T @ delta
        if i > 0:
            d_in = d_in * (1.0 - acts[i] ** 2)
        delta = d_in
    return delta


def zeros_like_net(net):
    return ([np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases])


def adam_first_step(net, gw, gb, lr, b1=0.9, b2=0.999, eps=1e-8, t=1):
    def step(p, g):
        m = b1 * 0.0 + (1 - b1) * g
        v = b2 * 0.0 + (1 - b2) * g * g
        return p - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)

    return ([step(p, g) for p, g in zip(net.weights, gw)],
            [step(p, g) for p, g in zip(net.biases, gb)])


def cosine_heads_sample(q, qn, k, feature_dim):
    v = np.empty(k)
    for h in range(k):
        u = q[h * feature_dim:(h + 1) * feature_dim]
        w = qn[h * feature_dim:(h + 1) * feature_dim]
        nu = np.sqrt(float(u @ u))
        nv = np.sqrt(float(w @ w))
        if nu < 1e-12 or nv < 1e-12:
            v[h] = 0.0
        else:
            v[h] = min(1.0, max(-1.0, float(u @ w) / (nu * nv)))
    return v


def transcribe_im_update(f_c, f_d, din, critic, xs, xns, lam, momentum, lr,
                         k, feature_dim, detach=False):
    """One full update on pair inputs xs[i], xns[i] (encoder input == critic
    input: continuous actions concatenated to observations). All optimizer
    states are assumed fresh (t=0); the critic's Adam step runs at lam*lr.
    Returns loss plus every post-update net as (weights, biases) lists."""
    B = len(xs)
    enc_caches = [fwd_cache(f_c, x) for x in xs]
    qns = [fwd_cache(f_d, xn)[-1] for xn in xns]
    vs = [cosine_heads_sample(enc_caches[i][-1], qns[i], k, feature_dim) for i in range(B)]
    din_caches = [fwd_cache(din, v) for v in vs]
    ds = [c[-1][0] for c in din_caches]
    crit_caches_a = [fwd_cache(critic, x) for x in xs]
    crit_caches_n = [fwd_cache(critic, xn) for xn in xns]
    resid = [crit_caches_a[i][-1][0] + ds[i] - crit_caches_n[i][-1][0] for i in range(B)]
    loss = sum(r * r for r in resid) / B

    enc_gw, enc_gb = zeros_like_net(f_c)
    din_gw, din_gb = zeros_like_net(din)
    cr_gw, cr_gb = zeros_like_net(critic)
    for i in range(B):
        g = 2.0 * resid[i] / B
        dv = bwd_accumulate(din, din_caches[i], np.array([g]), din_gw, din_gb)
        q = enc_caches[i][-1]
        dq = np.zeros_like(q)
        for h in range(k):
            sl = slice(h * feature_dim, (h + 1) * feature_dim)
            u = q[sl]
            w = qns[i][sl]
            nu = np.sqrt(float(u @ u))
            nv = np.sqrt(float(w @ w))
            if nu < 1e-12 or nv < 1e-12:
                continue
            cos = float(u @ w) / (nu * nv)
            dq[sl] = dv[h] * (w / (nu * nv) - cos * u / (nu * nu))
        bwd_accumulate(f_c, enc_caches[i], dq, enc_gw, enc_gb)
        bwd_accumulate(critic, crit_caches_a[i], np.array([g]), cr_gw, cr_gb)
        if not detach:
            bwd_accumulate(critic, crit_caches_n[i], np.array([-g]), cr_gw, cr_gb)

    new_fc = adam_first_step(f_c, enc_gw, enc_gb, lr)
    new_din = adam_first_step(din, din_gw, din_gb, lr)
    new_critic = adam_first_step(critic, cr_gw, cr_gb, lam * lr)
    new_fd = ([momentum * wd + (1 - momentum) * wc for wd, wc in zip(f_d.weights, new_fc[0])],
              [momentum * bd + (1 - momentum) * bc for bd, bc in zip(f_d.biases, new_fc[1])])
    return loss, new_fc, new_din, new_critic, new_fd


def transcribe_im_loss(f_c, f_d, din, critic, xs, xns, k, feature_dim):
    """Loss only, for finite-difference probes."""
    B = len(xs)
    total = 0.0
    for i in range(B):
        q = fwd_cache(f_c, xs[i])[-1]
        qn = fwd_cache(f_d, xns[i])[-1]
        v = cosine_heads_sample(q, qn, k, feature_dim)
        d = fwd_cache(din, v)[-1][0]
        r = fwd_cache(critic, xs[i])[-1][0] + d - fwd_cache(critic, xns[i])[-1][0]
        total += r * r
    return total / B
