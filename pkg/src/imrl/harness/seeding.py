"""Named RNG streams derived from one master seed.

Each concern (weight init, env resets, exploration, learning noise, replay
sampling, pair sampling, evaluation) gets its own stream, so switching one
feature on or off never perturbs the draws seen by the others.
"""

from __future__ import annotations

import numpy as np

STREAM_TAGS = {
    "init": 1,
    "env": 2,
    "action": 3,
    "learn": 4,
    "replay": 5,
    "im": 6,
    "eval": 7,
}


def make_stream(master_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, STREAM_TAGS[name]]))


def derived_seed(master_seed: int, name: str, *path: int) -> int:
    """Stateless integer seed for a tagged position (episode index, eval step, ...)."""
    ss = np.random.SeedSequence([master_seed, STREAM_TAGS[name], *path])
    return int(ss.generate_state(1)[0])


def episode_seed(master_seed: int, episode: int) -> int:
    return derived_seed(master_seed, "env", episode)


def eval_seed(master_seed: int, step: int) -> int:
    return derived_seed(master_seed, "eval", step)


def get_stream_states(streams: dict) -> dict:
    return {name: gen.bit_generator.state for name, gen in streams.items()}


def set_stream_states(streams: dict, states: dict) -> None:
    for name, state in states.items():
        streams[name].bit_generator.state = state
