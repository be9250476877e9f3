"""Acceptance suite: every criterion at its stated tolerance, one line each.

The learning checks train real agents, so this module is the slow part of the
suite (several minutes on two cores); all other criteria are near-instant.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from imrl.envs import PendulumEnv, chain_q_star, env_reset
from imrl.harness import config_from_dict, load_run, promotion_percent, run_training
from imrl.imagination import ImaginationConfig, ImaginationState, im_update
from imrl.nn import (AdamState, init_mlp, mlp_backward, mlp_forward,
                     cosine_similarity)
from imrl.imagination import similarity_vector
from imrl.replay import PairBatch, TransitionBatch

from helpers import (BoxedCritic, assert_grad_close, fd_gradient, flatten_grads,
                     flatten_params, unflatten_params)
from im_oracle import transcribe_im_update
from test_nn import random_net


def criterion(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def _run_summary(cfg_dict, out_dir=None):
    res = run_training(config_from_dict(cfg_dict), out_dir)
    im_finite = all(np.isfinite(row[5]) for row in res.train_rows)
    return res.eval_rows, im_finite, res.failed


def _chain_sup_norm(args):
    cfg_dict, out_dir = args
    res = run_training(config_from_dict(cfg_dict), out_dir)
    assert not res.failed
    run = load_run(f"{out_dir}/final.ckpt")
    agent = run.agent.agent if cfg_dict.get("im", {}).get("enabled") else run.agent
    q = mlp_forward(agent.q, np.eye(5)[:4])
    return float(np.max(np.abs(q - chain_q_star(0.9))))


def _eval_curves(args):
    return _run_summary(*args)


# ------------------------------------------------------------------ 1

def test_gradient_correctness_100_networks():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 100:
        net = random_net(rng)
        if flatten_params(net).size > 64:
            continue
        x = rng.standard_normal(net.in_dim)
        upstream = rng.standard_normal(net.out_dim)
        grads, dx = mlp_backward(net, x, upstream)

        def loss_params(vec):
            return float(np.dot(upstream, mlp_forward(unflatten_params(net, vec), x)))

        assert_grad_close(flatten_grads(grads),
                          fd_gradient(loss_params, flatten_params(net)))

        def loss_input(xv):
            return float(np.dot(upstream, mlp_forward(net, xv)))

        assert_grad_close(dx, fd_gradient(loss_input, x.copy()))
        checked += 1
    elapsed = time.perf_counter() - start
    criterion("gradient correctness (100 nets, rel err <= 1e-4)",
              checked == 100 and elapsed < 60.0, f"{elapsed:.1f}s")


# ------------------------------------------------------------------ 2

def test_im_transcription_oracle_1e10():
    cfg = ImaginationConfig(k=2, feature_dim=2, momentum=0.9, loss_weight=0.7,
                            pairs_per_step=2, lr=1e-2)
    rng = np.random.default_rng(77)
    f_c = init_mlp([3, 3, 4], rng)
    state = ImaginationState(
        f_c=f_c, f_d=f_c.copy(), din=[init_mlp([2, 2, 1], rng)],
        adam_fc=AdamState.create(f_c, cfg.lr), adam_din=None, adam_critic=[None])
    state.adam_din = [AdamState.create(state.din[0], cfg.lr)]
    critic = BoxedCritic(init_mlp([3, 3, 1], rng))

    def tb():
        return TransitionBatch(rng.standard_normal((2, 2)), rng.uniform(-1, 1, (2, 1)),
                               np.zeros(2), rng.standard_normal((2, 2)),
                               np.zeros(2, bool), np.zeros(2, bool), np.zeros(2, np.int64))

    pairs = PairBatch(tb(), tb())
    xs = [np.concatenate([pairs.anchor.obs[i], pairs.anchor.actions[i]]) for i in range(2)]
    xns = [np.concatenate([pairs.other.obs[i], pairs.other.actions[i]]) for i in range(2)]
    exp_loss, exp_fc, exp_din, exp_critic, exp_fd = transcribe_im_update(
        state.f_c, state.f_d, state.din[0], critic.net, xs, xns,
        cfg.loss_weight, cfg.momentum, cfg.lr, 2, 2)

    loss = im_update(state, critic.handle(), pairs, cfg)
    worst = abs(loss - exp_loss)
    for got, want in ((state.f_c, exp_fc), (state.din[0], exp_din),
                      (critic.net, exp_critic), (state.f_d, exp_fd)):
        for g, w in zip(got.weights + got.biases, want[0] + want[1]):
            worst = max(worst, float(np.max(np.abs(g - w))))
    criterion("propagation transcription oracle (loss + all params to 1e-10)",
              worst <= 1e-10, f"max deviation {worst:.2e}")


# ------------------------------------------------------------------ 3

def test_stop_gradient_and_ema_discipline():
    import dataclasses
    cfg = ImaginationConfig(k=2, feature_dim=2, momentum=0.95, loss_weight=0.5,
                            pairs_per_step=2, lr=1e-2)
    rng = np.random.default_rng(5)
    f_c = init_mlp([3, 3, 4], rng)
    state = ImaginationState(
        f_c=f_c, f_d=f_c.copy(), din=[init_mlp([2, 2, 1], rng)],
        adam_fc=AdamState.create(f_c, cfg.lr), adam_din=None, adam_critic=[None])
    state.adam_din = [AdamState.create(state.din[0], cfg.lr)]
    construction_equal = np.array_equal(state.f_c.flat, state.f_d.flat)
    critic = BoxedCritic(init_mlp([3, 3, 1], rng))

    ema_only = True
    for step in range(4):
        def tb():
            return TransitionBatch(rng.standard_normal((2, 2)), rng.uniform(-1, 1, (2, 1)),
                                   np.zeros(2), rng.standard_normal((2, 2)),
                                   np.zeros(2, bool), np.zeros(2, bool),
                                   np.zeros(2, np.int64))

        fd_before = state.f_d.copy()
        im_update(state, critic.handle(), PairBatch(tb(), tb()), cfg)
        expected = np.clip(cfg.momentum * fd_before.flat + (1 - cfg.momentum) * state.f_c.flat,
                           np.minimum(fd_before.flat, state.f_c.flat),
                           np.maximum(fd_before.flat, state.f_c.flat))
        ema_only &= np.array_equal(state.f_d.flat, expected)

    fields = {f.name for f in dataclasses.fields(state)}
    no_fd_optimizer = "adam_fd" not in fields
    criterion("stop-gradient & EMA (f_d: equal at init, EMA-only motion, no optimizer)",
              construction_equal and ema_only and no_fd_optimizer,
              f"init_equal={construction_equal} ema_only={ema_only}")


# ------------------------------------------------------------------ 4

SAC_SMALL = {
    "env": {"name": "pendulum"},
    "algo": {"name": "sac", "batch_size": 32, "hidden": [32, 32]},
    "train": {"total_steps": 2500, "warmup_steps": 500, "eval_every": 500,
              "eval_episodes": 3},
    "seed": 11,
}


def test_noop_attachment_bitwise_equivalence(tmp_path):
    base = dict(SAC_SMALL)
    run_training(config_from_dict(base), tmp_path / "bare")
    noop = dict(SAC_SMALL)
    noop["im"] = {"enabled": True, "loss_weight": 0.0, "lr": 0.0}
    run_training(config_from_dict(noop), tmp_path / "noop")
    same_train = ((tmp_path / "bare" / "train.csv").read_bytes()
                  == (tmp_path / "noop" / "train.csv").read_bytes())
    same_eval = ((tmp_path / "bare" / "eval.csv").read_bytes()
                 == (tmp_path / "noop" / "eval.csv").read_bytes())
    criterion("no-op equivalence (loss_weight=0, lr=0 -> bitwise train.csv)",
              same_train and same_eval, f"train={same_train} eval={same_eval}")


# ------------------------------------------------------------------ 5

def chain_cfg(seed, im):
    # 12k steps suffice for both arms, which satisfies "within 20k" a fortiori
    d = {
        "env": {"name": "chain"},
        "algo": {"name": "dqn", "gamma": 0.9, "batch_size": 64, "eps_decay_steps": 5000},
        "train": {"total_steps": 12000, "warmup_steps": 1000, "eval_every": 6000,
                  "eval_episodes": 3},
        "seed": seed,
    }
    if im:
        d["im"] = {"enabled": True, "feature_dim": 8, "pairs_per_step": 32}
    return d


def test_chain_oracle_equivalence_with_and_without_im(tmp_path):
    start = time.perf_counter()
    jobs = [(chain_cfg(seed, im), str(tmp_path / f"{'im' if im else 'dqn'}{seed}"))
            for im in (False, True) for seed in range(5)]
    with ProcessPoolExecutor(max_workers=2) as pool:
        sups = list(pool.map(_chain_sup_norm, jobs))
    elapsed = time.perf_counter() - start
    base_sups, im_sups = sups[:5], sups[5:]
    ok = all(s <= 0.05 for s in sups) and elapsed < 120.0
    criterion("chain oracle equivalence (DQN and DQN+IM sup-norm <= 0.05, 5/5 seeds)",
              ok, f"base {[round(s, 4) for s in base_sups]} "
                  f"im {[round(s, 4) for s in im_sups]} in {elapsed:.0f}s")


# ------------------------------------------------------------------ 6

def cartpole_cfg(seed):
    return {
        "env": {"name": "cartpole"},
        "algo": {"name": "dqn"},
        "train": {"total_steps": 60000, "warmup_steps": 1000, "eval_every": 2000,
                  "eval_episodes": 10},
        "seed": seed,
    }


def test_cartpole_learning_check(tmp_path):
    start = time.perf_counter()
    jobs = [((cartpole_cfg(seed), None),) for seed in range(5)]
    with ProcessPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(_eval_curves, [j[0] for j in jobs]))
    elapsed = time.perf_counter() - start
    reached = [any(m >= 195.0 for s, m, _ in rows if s <= 60000)
               for rows, _, failed in results]
    ok = sum(reached) >= 3 and elapsed < 600.0
    criterion("cart-pole learning check (DQN >= 195 within 60k, >= 3/5 seeds)",
              ok, f"{sum(reached)}/5 seeds in {elapsed:.0f}s")


# ------------------------------------------------------------------ 7

def pendulum_cfg(seed, im):
    d = {
        "env": {"name": "pendulum"},
        "algo": {"name": "sac", "batch_size": 64, "hidden": [64, 64]},
        "train": {"total_steps": 50000, "warmup_steps": 1000, "eval_every": 5000,
                  "eval_episodes": 10},
        "seed": seed,
    }
    if im:
        d["im"] = {"enabled": True, "feature_dim": 8, "pairs_per_step": 64}
    return d


def test_pendulum_learning_check_and_im_nondegradation():
    start = time.perf_counter()
    jobs = [(pendulum_cfg(seed, im), None) for im in (False, True) for seed in range(5)]
    with ProcessPoolExecutor(max_workers=2) as pool:
        results = list(pool.map(_eval_curves, jobs))
    elapsed = time.perf_counter() - start
    base, variant = results[:5], results[5:]

    reached = [any(m >= -300.0 for s, m, _ in rows if s <= 50000)
               for rows, _, _ in base]
    base_at_50 = [rows[-1][1] for rows, _, _ in base]
    im_at_50 = [rows[-1][1] for rows, _, _ in variant]
    im_finite = all(fin for _, fin, _ in variant)
    none_failed = not any(failed for _, _, failed in results)
    pooled = math.sqrt((np.var(base_at_50, ddof=1) + np.var(im_at_50, ddof=1)) / 2.0)
    gap = abs(float(np.mean(im_at_50)) - float(np.mean(base_at_50)))
    ok = sum(reached) >= 3 and gap <= pooled and im_finite and none_failed
    criterion("pendulum learning check (SAC >= -300 within 50k, >= 3/5; SAC+IM non-degraded)",
              ok, f"{sum(reached)}/5 reach -300; base@50k {np.mean(base_at_50):.0f} "
                  f"im@50k {np.mean(im_at_50):.0f} gap {gap:.0f} <= pooled std {pooled:.0f}; "
                  f"im_loss finite={im_finite}; {elapsed:.0f}s")


# ------------------------------------------------------------------ 8

def test_promotion_arithmetic_reference_rows():
    p1 = promotion_percent(5228.0, 6652.0)
    p2 = promotion_percent(-86.60, -83.12)
    ok = abs(p1 - 27.24) <= 0.02 and abs(p2 - 4.01) <= 0.02
    criterion("promotion arithmetic (27.24% and 4.01% to +-0.02pp)",
              ok, f"{p1:.4f}% and {p2:.4f}%")


# ------------------------------------------------------------------ 9

def test_determinism_and_checkpoint_resume(tmp_path):
    cfg = {
        "env": {"name": "chain"},
        "algo": {"name": "dqn", "gamma": 0.9, "batch_size": 16, "hidden": [8]},
        "train": {"total_steps": 600, "warmup_steps": 100, "eval_every": 200,
                  "eval_episodes": 3},
        "seed": 4,
    }
    run_training(config_from_dict(cfg), tmp_path / "a")
    run_training(config_from_dict(cfg), tmp_path / "b")
    identical = all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
        for n in ("train.csv", "eval.csv", "config.echo.json", "final.ckpt"))

    full = run_training(config_from_dict(cfg))
    half_cfg = dict(cfg, train=dict(cfg["train"], total_steps=300))
    run_training(config_from_dict(half_cfg), tmp_path / "half")
    resumed = run_training(config_from_dict(cfg), None,
                           resume_from=tmp_path / "half" / "final.ckpt")
    resume_ok = (resumed.train_rows == [r for r in full.train_rows if r[0] > 300]
                 and resumed.eval_rows == [r for r in full.eval_rows if r[0] > 300])
    criterion("determinism & checkpoint (byte-identical reruns; resume == uninterrupted)",
              identical and resume_ok, f"bytes={identical} resume={resume_ok}")


# ------------------------------------------------------------------ 10

def test_invariant_sweeps():
    rng = np.random.default_rng(31337)
    n = 100_000
    dims = rng.integers(1, 7, size=n)
    ok_cos = True
    for i in range(n):
        d = int(dims[i])
        scale = 10.0 ** float(rng.integers(-160, 160))
        u = rng.standard_normal(d) * scale
        v = rng.standard_normal(d) * (scale if i % 2 else 1.0)
        if i % 97 == 0:
            u[:] = 0.0
        c = cosine_similarity(u, v)
        if not (-1.0 <= c <= 1.0) or c != cosine_similarity(v, u):
            ok_cos = False
            break

    ok_sim = True
    for i in range(25_000):
        q = rng.standard_normal(8) * 10.0 ** float(rng.integers(-12, 6))
        qn = rng.standard_normal(8) * 10.0 ** float(rng.integers(-12, 6))
        vec = similarity_vector(q, qn, 4, 2)
        if np.any(vec < -1.0) or np.any(vec > 1.0):
            ok_sim = False
            break

    env = PendulumEnv()
    lo = -(np.pi ** 2 + 0.1 * 64.0 + 0.001 * 4.0)
    ok_env = True
    for ep in range(40):
        env_reset(env, ep)
        while True:
            r = env.step(rng.uniform(-4.0, 4.0))
            if not (lo <= r.reward <= 0.0) or not (-8.0 <= env.theta_dot <= 8.0):
                ok_env = False
            if r.done or r.truncated:
                break
    criterion("invariant sweeps (cosine/similarity bounds 1e5+, pendulum bounds)",
              ok_cos and ok_sim and ok_env,
              f"cos={ok_cos} sim={ok_sim} pendulum={ok_env}")
