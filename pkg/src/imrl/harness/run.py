"""Seeded training loop: interleaved env/gradient steps, periodic evaluation,
CSV metrics, checkpointing, and bitwise resume."""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..agents import build_agent
from ..agents.base import DivergenceError
from ..envs import BoxSpace, DiscreteSpace, make_env
from ..imagination import attach
from ..nn import AdamState, ParameterSet
from ..replay import ReplayBuffer, Transition
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_to_dict, dump_config
from .seeding import episode_seed, eval_seed, get_stream_states, make_stream, set_stream_states

TRAIN_COLUMNS = ["step", "episode", "episode_return", "critic_loss", "actor_loss",
                 "im_loss", "wall_ms"]
EVAL_COLUMNS = ["step", "mean_return", "std_return"]


@dataclass
class RunResult:
    train_rows: list
    eval_rows: list
    failed: bool = False
    fail_reason: str | None = None
    out_dir: Path | None = None

    def final_eval(self):
        return self.eval_rows[-1] if self.eval_rows else None


def _fmt(x) -> str:
    return str(int(x)) if isinstance(x, (int, np.integer)) else str(float(x))


def _random_action(space, rng: np.random.Generator):
    if isinstance(space, DiscreteSpace):
        return int(rng.integers(space.n))
    return rng.uniform(space.low, space.high, size=space.dim)


def evaluate(agent, env, episodes: int, seed: int):
    """Mean and std of undiscounted returns under the eval-mode policy.

    Episode i resets from a seed derived from (seed, i); no training state or
    stream is touched. Std is the population std so a single episode is 0.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    returns = np.empty(episodes)
    for i in range(episodes):
        ep_seed = int(np.random.SeedSequence([seed, i]).generate_state(1)[0])
        obs = env.reset(ep_seed)
        total = 0.0
        while True:
            result = env.step(agent.act(obs, "eval", None))
            total += result.reward
            obs = result.obs
            if result.done or result.truncated:
                break
        returns[i] = total
    return float(returns.mean()), float(returns.std())


def _pack_state_dict(sd: dict, arrays: dict, scalars: dict) -> None:
    for name, ps in sd["params"].items():
        for i, (w, b) in enumerate(zip(ps.weights, ps.biases)):
            arrays[f"param/{name}/{i}/w"] = w
            arrays[f"param/{name}/{i}/b"] = b
    adam_t = {}
    for name, st in sd["adam"].items():
        for i in range(len(st.m_weights)):
            arrays[f"adam/{name}/{i}/mw"] = st.m_weights[i]
            arrays[f"adam/{name}/{i}/mb"] = st.m_biases[i]
            arrays[f"adam/{name}/{i}/vw"] = st.v_weights[i]
            arrays[f"adam/{name}/{i}/vb"] = st.v_biases[i]
        adam_t[name] = st.t
    scalars["adam_t"] = adam_t
    scalars["counters"] = sd["counters"]


def _unpack_state_dict(template: dict, arrays: dict, scalars: dict) -> dict:
    params = {}
    for name, ps in template["params"].items():
        n = len(ps.weights)
        params[name] = ParameterSet(
            [arrays[f"param/{name}/{i}/w"] for i in range(n)],
            [arrays[f"param/{name}/{i}/b"] for i in range(n)],
            ps.activation,
        )
    adam = {}
    for name, st in template["adam"].items():
        n = len(st.m_weights)
        adam[name] = AdamState(
            [arrays[f"adam/{name}/{i}/mw"] for i in range(n)],
            [arrays[f"adam/{name}/{i}/mb"] for i in range(n)],
            [arrays[f"adam/{name}/{i}/vw"] for i in range(n)],
            [arrays[f"adam/{name}/{i}/vb"] for i in range(n)],
            t=int(scalars["adam_t"][name]), lr=st.lr, beta1=st.beta1,
            beta2=st.beta2, eps=st.eps,
        )
    return {"params": params, "adam": adam, "counters": scalars["counters"]}


class TrainingRun:
    """All mutable state of one run; buildable fresh or from a checkpoint."""

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self.env = make_env(cfg.env.name)
        self.eval_env = make_env(cfg.env.name)
        self.streams = {name: make_stream(cfg.seed, name)
                        for name in ("action", "learn", "replay", "im")}
        init_rng = make_stream(cfg.seed, "init")
        space = self.env.action_space
        act_dim = space.dim if isinstance(space, BoxSpace) else 1
        self.buffer = ReplayBuffer(cfg.buffer.capacity, self.env.obs_dim,
                                   isinstance(space, DiscreteSpace), act_dim)
        agent = build_agent(self.env, cfg.algo, init_rng)
        if cfg.im.enabled:
            agent = attach(agent, cfg.im.materialize(cfg.algo), self.buffer,
                           self.streams["im"], init_rng, self.env.obs_dim)
        self.agent = agent
        self.env_step = 0
        self.episode_idx = 0
        self.episode_return = 0.0
        self.last_return = 0.0
        self.obs = self.env.reset(episode_seed(cfg.seed, 0))

    def save(self, path) -> None:
        arrays: dict[str, np.ndarray] = {}
        scalars: dict = {}
        _pack_state_dict(self.agent.state_dict(), arrays, scalars)
        buf = self.buffer
        arrays["buffer/obs"] = buf.obs
        arrays["buffer/actions"] = buf.actions
        arrays["buffer/rewards"] = buf.rewards
        arrays["buffer/next_obs"] = buf.next_obs
        arrays["buffer/done"] = buf.done
        arrays["buffer/truncated"] = buf.truncated
        arrays["buffer/episodes"] = buf.episodes
        arrays["run/current_obs"] = np.asarray(self.obs, dtype=np.float64)
        scalars["buffer"] = {"cursor": buf.cursor, "count": buf.count}
        scalars["run"] = {
            "env_step": self.env_step,
            "episode_idx": self.episode_idx,
            "episode_return": self.episode_return,
            "last_return": self.last_return,
            "env_state": self.env.get_state(),
        }
        scalars["rng"] = get_stream_states(self.streams)
        save_checkpoint(path, config_to_dict(self.cfg), scalars, arrays)

    def restore(self, path) -> None:
        config, scalars, arrays = load_checkpoint(path)
        mine = config_to_dict(self.cfg)

        # resuming may extend the step budget; everything else must match
        def washed(d):
            out = dict(d)
            out["train"] = dict(out["train"], total_steps=None)
            return out

        if washed(config) != washed(mine):
            raise CheckpointError("checkpoint config does not match the current config")
        self.agent.load_state_dict(_unpack_state_dict(self.agent.state_dict(), arrays, scalars))
        buf = self.buffer
        buf.obs = arrays["buffer/obs"]
        buf.actions = arrays["buffer/actions"]
        buf.rewards = arrays["buffer/rewards"]
        buf.next_obs = arrays["buffer/next_obs"]
        buf.done = arrays["buffer/done"]
        buf.truncated = arrays["buffer/truncated"]
        buf.episodes = arrays["buffer/episodes"]
        buf.cursor = int(scalars["buffer"]["cursor"])
        buf.count = int(scalars["buffer"]["count"])
        run = scalars["run"]
        self.env_step = int(run["env_step"])
        self.episode_idx = int(run["episode_idx"])
        self.episode_return = float(run["episode_return"])
        self.last_return = float(run["last_return"])
        self.env.set_state(run["env_state"])
        self.obs = arrays["run/current_obs"]
        set_stream_states(self.streams, scalars["rng"])


def run_training(cfg: ExperimentConfig, out_dir=None, quiet: bool = True,
                 resume_from=None) -> RunResult:
    """Train per config; deterministic given (config, seed). Returns metrics
    (and writes train.csv / eval.csv / final.ckpt / config.echo.json when
    out_dir is given). A non-finite loss marks the run failed, keeping the
    partial metrics."""
    run = TrainingRun(cfg)
    if resume_from is not None:
        run.restore(resume_from)

    train_f = eval_f = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        dump_config(cfg, out_dir / "config.echo.json")
        train_f = open(out_dir / "train.csv", "w", encoding="utf-8", newline="\n")
        eval_f = open(out_dir / "eval.csv", "w", encoding="utf-8", newline="\n")
        train_f.write(",".join(TRAIN_COLUMNS) + "\n")
        eval_f.write(",".join(EVAL_COLUMNS) + "\n")

    train_rows: list = []
    eval_rows: list = []

    def emit(f, rows, row):
        rows.append(row)
        if f is not None:
            f.write(",".join(_fmt(x) for x in row) + "\n")

    def do_eval():
        mean, std = evaluate(run.agent, run.eval_env, cfg.train.eval_episodes,
                             eval_seed(cfg.seed, run.env_step))
        emit(eval_f, eval_rows, (run.env_step, mean, std))
        if not quiet:
            print(f"step {run.env_step}: eval {mean:.2f} +- {std:.2f}", file=sys.stderr)

    failed = False
    reason = None
    try:
        if run.env_step == 0:
            do_eval()
        while run.env_step < cfg.train.total_steps:
            t0 = time.perf_counter() if cfg.train.record_wall_time else 0.0
            if run.env_step < cfg.train.warmup_steps:
                action = _random_action(run.env.action_space, run.streams["action"])
            else:
                action = run.agent.act(run.obs, "explore", run.streams["action"])
            result = run.env.step(action)
            run.buffer.push(Transition(run.obs, action, result.reward, result.obs,
                                       result.done, result.truncated, run.episode_idx))
            run.episode_return += result.reward
            run.env_step += 1
            if result.done or result.truncated:
                run.last_return = run.episode_return
                run.episode_return = 0.0
                run.episode_idx += 1
                run.obs = run.env.reset(episode_seed(cfg.seed, run.episode_idx))
            else:
                run.obs = result.obs
            if run.env_step > cfg.train.warmup_steps:
                batch = run.buffer.sample_batch(cfg.algo.batch_size, run.streams["replay"])
                losses = run.agent.update(batch, run.streams["learn"])
                wall = (time.perf_counter() - t0) * 1e3 if cfg.train.record_wall_time else 0.0
                emit(train_f, train_rows,
                     (run.env_step, run.episode_idx, run.last_return,
                      losses.get("critic_loss", 0.0), losses.get("actor_loss", 0.0),
                      losses.get("im_loss", 0.0), wall))
            if run.env_step % cfg.train.eval_every == 0:
                do_eval()
    except DivergenceError as e:
        failed = True
        reason = str(e)
        if not quiet:
            print(f"run failed at step {run.env_step}: {reason}", file=sys.stderr)
    finally:
        if train_f is not None:
            train_f.close()
        if eval_f is not None:
            eval_f.close()

    if out_dir is not None and not failed:
        run.save(out_dir / "final.ckpt")
    return RunResult(train_rows, eval_rows, failed, reason,
                     out_dir if out_dir is not None else None)


def load_run(checkpoint_path) -> TrainingRun:
    """Rebuild a full TrainingRun from a checkpoint (config comes from the file)."""
    from .config import config_from_dict

    config, _, _ = load_checkpoint(checkpoint_path)
    run = TrainingRun(config_from_dict(config))
    run.restore(checkpoint_path)
    return run
