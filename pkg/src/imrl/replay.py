"""Bounded uniform-replay buffer.

Stores transitions column-wise in preallocated rings and serves minibatches
for TD updates plus anchored random pairs for the propagation update. All
sampling is with replacement and driven by an explicit Generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    obs: np.ndarray
    action: object          # int for discrete, (act_dim,) float array for continuous
    reward: float
    next_obs: np.ndarray
    done: bool
    truncated: bool
    episode: int = -1       # provenance, used only by cross-episode pair filtering


class TransitionBatch:
    """Columnar view over sampled transitions; indexable back into Transition."""

    def __init__(self, obs, actions, rewards, next_obs, done, truncated, episodes):
        self.obs = obs
        self.actions = actions
        self.rewards = rewards
        self.next_obs = next_obs
        self.done = done
        self.truncated = truncated
        self.episodes = episodes

    def __len__(self) -> int:
        return self.obs.shape[0]

    def __getitem__(self, i: int) -> Transition:
        return Transition(
            self.obs[i], self.actions[i], float(self.rewards[i]),
            self.next_obs[i], bool(self.done[i]), bool(self.truncated[i]),
            int(self.episodes[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


class ReplayBuffer:
    """Ring buffer of capacity transitions; oldest entries overwritten first."""

    def __init__(self, capacity: int, obs_dim: int, discrete_actions: bool, act_dim: int = 1):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.discrete_actions = discrete_actions
        self.act_dim = act_dim
        self.obs = np.zeros((capacity, obs_dim))
        if discrete_actions:
            self.actions = np.zeros(capacity, dtype=np.int64)
        else:
            self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.truncated = np.zeros(capacity, dtype=bool)
        self.episodes = np.full(capacity, -1, dtype=np.int64)
        self.cursor = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    def push(self, t: Transition) -> None:
        obs = np.asarray(t.obs, dtype=np.float64)
        next_obs = np.asarray(t.next_obs, dtype=np.float64)
        if obs.shape != (self.obs_dim,) or next_obs.shape != (self.obs_dim,):
            raise ValueError(f"observation shape {obs.shape} != ({self.obs_dim},)")
        i = self.cursor
        self.obs[i] = obs
        if self.discrete_actions:
            self.actions[i] = int(t.action)
        else:
            a = np.asarray(t.action, dtype=np.float64).reshape(-1)
            if a.shape != (self.act_dim,):
                raise ValueError(f"action shape {a.shape} != ({self.act_dim},)")
            self.actions[i] = a
        self.rewards[i] = t.reward
        self.next_obs[i] = next_obs
        self.done[i] = t.done
        self.truncated[i] = t.truncated
        self.episodes[i] = t.episode
        self.cursor = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def _gather(self, idx: np.ndarray) -> TransitionBatch:
        return TransitionBatch(
            self.obs[idx], self.actions[idx], self.rewards[idx],
            self.next_obs[idx], self.done[idx], self.truncated[idx],
            self.episodes[idx],
        )

    def sample_batch(self, n: int, rng: np.random.Generator) -> TransitionBatch:
        """n independent uniform draws with replacement."""
        if self.count < 1:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.count, size=n)
        return self._gather(idx)

    def sample_pairs(self, n: int, rng: np.random.Generator,
                     anchors: TransitionBatch | None = None,
                     cross_episode_only: bool = False,
                     max_retries: int = 64):
        """n (anchor, other) pairs.

        Anchors cycle through the given TD minibatch (uniform buffer draws when
        none is supplied); the other side is an independent uniform draw over
        the whole buffer. With cross_episode_only, same-episode draws are
        rejected and redrawn up to max_retries times.
        """
        if self.count < 1:
            raise ValueError("cannot sample from an empty buffer")
        if anchors is None:
            anchors = self._gather(rng.integers(0, self.count, size=n))
        elif len(anchors) != n:
            take = np.arange(n) % len(anchors)
            anchors = TransitionBatch(
                anchors.obs[take], anchors.actions[take], anchors.rewards[take],
                anchors.next_obs[take], anchors.done[take], anchors.truncated[take],
                anchors.episodes[take],
            )
        idx = rng.integers(0, self.count, size=n)
        if cross_episode_only:
            same = self.episodes[idx] == anchors.episodes
            retries = 0
            while same.any() and retries < max_retries:
                redraw = rng.integers(0, self.count, size=int(same.sum()))
                idx[same] = redraw
                same = self.episodes[idx] == anchors.episodes
                retries += 1
        return PairBatch(anchors, self._gather(idx))


class PairBatch:
    """Paired (anchor, other) transitions for the propagation update."""

    def __init__(self, anchor: TransitionBatch, other: TransitionBatch):
        self.anchor = anchor
        self.other = other

    def __len__(self) -> int:
        return len(self.anchor)

    def __getitem__(self, i: int):
        return self.anchor[i], self.other[i]

    def __iter__(self):
        return (self[i] for i in range(len(self)))
