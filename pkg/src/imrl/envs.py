"""Deterministic, seedable in-repo environments.

Pendulum swing-up (continuous torque), cart-pole (discrete push), and a
5-state chain MDP small enough for an exact tabular oracle. All dynamics are
float64 and bitwise reproducible given (seed, action sequence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool       # terminal dynamics reached
    truncated: bool  # step cap hit; TD targets bootstrap through this


@dataclass
class BoxSpace:
    low: float
    high: float
    dim: int


@dataclass
class DiscreteSpace:
    n: int


def _wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = (theta + np.pi) % (2.0 * np.pi) - np.pi
    if w == -np.pi:
        w = np.pi
    return float(w)


class PendulumEnv:
    """Torque-controlled swing-up. theta=0 is upright; reward is negative cost."""

    G = 10.0
    MASS = 1.0
    LENGTH = 1.0
    DT = 0.05
    MAX_SPEED = 8.0
    MAX_TORQUE = 2.0
    MAX_STEPS = 200

    obs_dim = 3
    action_space = BoxSpace(-2.0, 2.0, 1)
    max_episode_steps = MAX_STEPS

    def __init__(self):
        self.theta = 0.0
        self.theta_dot = 0.0
        self.steps = 0

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.theta = float(rng.uniform(-np.pi, np.pi))
        self.theta_dot = float(rng.uniform(-1.0, 1.0))
        self.steps = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])

    def step(self, action) -> StepResult:
        u = float(np.asarray(action).reshape(-1)[0])
        if not np.isfinite(u):
            raise ValueError("non-finite torque")
        u = float(np.clip(u, -self.MAX_TORQUE, self.MAX_TORQUE))
        # semi-implicit Euler
        g, m, l, dt = self.G, self.MASS, self.LENGTH, self.DT
        acc = 3.0 * g / (2.0 * l) * np.sin(self.theta) + 3.0 * u / (m * l * l)
        self.theta_dot = float(np.clip(self.theta_dot + acc * dt, -self.MAX_SPEED, self.MAX_SPEED))
        self.theta = self.theta + self.theta_dot * dt
        reward = -(_wrap_angle(self.theta) ** 2 + 0.1 * self.theta_dot ** 2 + 0.001 * u * u)
        self.steps += 1
        truncated = self.steps >= self.MAX_STEPS
        return StepResult(self._obs(), float(reward), False, truncated)

    def get_state(self):
        return [self.theta, self.theta_dot, float(self.steps)]

    def set_state(self, state):
        self.theta, self.theta_dot = float(state[0]), float(state[1])
        self.steps = int(state[2])


class CartPoleEnv:
    """Classic cart-pole balancing; +1 reward per step until the pole or cart leaves bounds."""

    G = 9.8
    MASS_CART = 1.0
    MASS_POLE = 0.1
    HALF_LENGTH = 0.5
    FORCE = 10.0
    DT = 0.02
    X_LIMIT = 2.4
    THETA_LIMIT = 12.0 * np.pi / 180.0
    MAX_STEPS = 500

    obs_dim = 4
    action_space = DiscreteSpace(2)
    max_episode_steps = MAX_STEPS

    def __init__(self):
        self.state = np.zeros(4)
        self.steps = 0

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.state = rng.uniform(-0.05, 0.05, size=4)
        self.steps = 0
        return self.state.copy()

    def step(self, action) -> StepResult:
        a = int(action)
        if a not in (0, 1):
            raise ValueError(f"invalid action {action!r}; expected 0 or 1")
        x, x_dot, theta, theta_dot = self.state
        force = self.FORCE if a == 1 else -self.FORCE
        cos_t = np.cos(theta)
        sin_t = np.sin(theta)
        total_mass = self.MASS_CART + self.MASS_POLE
        pole_ml = self.MASS_POLE * self.HALF_LENGTH
        temp = (force + pole_ml * theta_dot ** 2 * sin_t) / total_mass
        theta_acc = (self.G * sin_t - cos_t * temp) / (
            self.HALF_LENGTH * (4.0 / 3.0 - self.MASS_POLE * cos_t ** 2 / total_mass)
        )
        x_acc = temp - pole_ml * theta_acc * cos_t / total_mass
        # Euler, position first (classic-control convention)
        x = x + self.DT * x_dot
        x_dot = x_dot + self.DT * x_acc
        theta = theta + self.DT * theta_dot
        theta_dot = theta_dot + self.DT * theta_acc
        self.state = np.array([x, x_dot, theta, theta_dot])
        self.steps += 1
        done = bool(abs(x) > self.X_LIMIT or abs(theta) > self.THETA_LIMIT)
        truncated = not done and self.steps >= self.MAX_STEPS
        return StepResult(self.state.copy(), 1.0, done, truncated)

    def get_state(self):
        return list(map(float, self.state)) + [float(self.steps)]

    def set_state(self, state):
        self.state = np.array(state[:4], dtype=np.float64)
        self.steps = int(state[4])


class ChainEnv:
    """5-state chain: R moves right, L moves left (floored at 0); reaching state 4 pays 1."""

    N_STATES = 5
    GOAL = 4
    MAX_STEPS = 50

    obs_dim = 5
    action_space = DiscreteSpace(2)  # 0 = L, 1 = R
    max_episode_steps = MAX_STEPS

    def __init__(self):
        self.position = 0
        self.steps = 0

    def reset(self, seed: int) -> np.ndarray:
        self.position = 0
        self.steps = 0
        return self._obs()

    def _obs(self) -> np.ndarray:
        one_hot = np.zeros(self.N_STATES)
        one_hot[self.position] = 1.0
        return one_hot

    def step(self, action) -> StepResult:
        a = int(action)
        if a not in (0, 1):
            raise ValueError(f"invalid action {action!r}; expected 0 or 1")
        self.position = min(self.position + 1, self.GOAL) if a == 1 else max(self.position - 1, 0)
        self.steps += 1
        done = self.position == self.GOAL
        reward = 1.0 if done else 0.0
        truncated = not done and self.steps >= self.MAX_STEPS
        return StepResult(self._obs(), reward, done, truncated)

    def get_state(self):
        return [float(self.position), float(self.steps)]

    def set_state(self, state):
        self.position = int(state[0])
        self.steps = int(state[1])


def chain_q_star(gamma: float = 0.9, tol: float = 1e-12) -> np.ndarray:
    """Exact Q* for the chain MDP via value iteration on the declared tables.

    Returns q[state, action] over the four non-terminal states x {L, R}.
    """
    n = ChainEnv.N_STATES - 1  # non-terminal states 0..3
    q = np.zeros((n, 2))
    while True:
        v = q.max(axis=1)
        q_new = np.zeros_like(q)
        for s in range(n):
            for a in range(2):
                s_next = min(s + 1, ChainEnv.GOAL) if a == 1 else max(s - 1, 0)
                if s_next == ChainEnv.GOAL:
                    q_new[s, a] = 1.0
                else:
                    q_new[s, a] = gamma * v[s_next]
        if np.max(np.abs(q_new - q)) < tol:
            return q_new
        q = q_new


ENV_NAMES = ("pendulum", "cartpole", "chain")


def make_env(name: str):
    if name == "pendulum":
        return PendulumEnv()
    if name == "cartpole":
        return CartPoleEnv()
    if name == "chain":
        return ChainEnv()
    raise ValueError(f"unknown env {name!r}; expected one of {ENV_NAMES}")


def env_reset(env, seed: int) -> np.ndarray:
    """Reset from the initial distribution using only the given seed."""
    return env.reset(seed)
