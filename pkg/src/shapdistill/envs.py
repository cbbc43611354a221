"""Deterministic classic-control dynamics (CartPole, MountainCar) and rollouts.

Environments are pure step functions on explicit state vectors; all randomness
lives in the seeded reset. Dynamics constants follow the standard
classic-control definitions so returns are comparable to Gymnasium-trained
agents. MountainCar uses the two-action (left/right) variant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError, NumericError

if TYPE_CHECKING:
    from .policies import Policy

State = np.ndarray


@dataclass(frozen=True)
class EnvSpec:
    name: str
    feature_names: tuple[str, ...]
    action_count: int
    state_bounds: tuple[tuple[float, float], ...]
    max_steps: int

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)


CARTPOLE = EnvSpec(
    name="cartpole",
    feature_names=("x", "x_dot", "theta", "theta_dot"),
    action_count=2,
    state_bounds=((-2.4, 2.4), (-10.0, 10.0), (-0.2095, 0.2095), (-10.0, 10.0)),
    max_steps=500,
)

MOUNTAINCAR = EnvSpec(
    name="mountaincar",
    feature_names=("x", "x_dot"),
    action_count=2,
    state_bounds=((-1.2, 0.6), (-0.07, 0.07)),
    max_steps=200,
)

_ENVS = {e.name: e for e in (CARTPOLE, MOUNTAINCAR)}

# CartPole physics
_GRAVITY = 9.8
_MASS_CART = 1.0
_MASS_POLE = 0.1
_TOTAL_MASS = _MASS_CART + _MASS_POLE
_POLE_HALF_LENGTH = 0.5
_POLE_MASS_LENGTH = _MASS_POLE * _POLE_HALF_LENGTH
_FORCE_MAG = 10.0
_TAU = 0.02
_THETA_LIMIT = 12 * 2 * math.pi / 360
_X_LIMIT = 2.4

# MountainCar physics
_MC_FORCE = 0.001
_MC_GRAVITY = 0.0025
_MC_MIN_POS = -1.2
_MC_MAX_POS = 0.6
_MC_MAX_SPEED = 0.07
_MC_GOAL_POS = 0.5


def get_env(name: str) -> EnvSpec:
    try:
        return _ENVS[name]
    except KeyError:
        raise ConfigError(
            f"unknown environment {name!r}; available: {sorted(_ENVS)}"
        ) from None


def reset(env: EnvSpec, seed: int) -> State:
    """Seeded initial state draw. Identical seeds yield identical states."""
    rng = np.random.default_rng(seed)
    if env.name == "cartpole":
        return rng.uniform(-0.05, 0.05, size=4)
    if env.name == "mountaincar":
        return np.array([rng.uniform(-0.6, -0.4), 0.0])
    raise ConfigError(f"unknown environment {env.name!r}")


def _check_finite(s: State) -> None:
    if not np.all(np.isfinite(s)):
        raise NumericError(f"non-finite state: {s!r}")


def cartpole_step(s: State, a: int) -> tuple[State, float, bool]:
    """One Euler-integrated CartPole step. Reward +1; terminate on |x| or |theta| limit."""
    _check_finite(s)
    x, x_dot, theta, theta_dot = s
    force = _FORCE_MAG if a == 1 else -_FORCE_MAG
    cos_th = math.cos(theta)
    sin_th = math.sin(theta)

    temp = (force + _POLE_MASS_LENGTH * theta_dot**2 * sin_th) / _TOTAL_MASS
    theta_acc = (_GRAVITY * sin_th - cos_th * temp) / (
        _POLE_HALF_LENGTH * (4.0 / 3.0 - _MASS_POLE * cos_th**2 / _TOTAL_MASS)
    )
    x_acc = temp - _POLE_MASS_LENGTH * theta_acc * cos_th / _TOTAL_MASS

    x = x + _TAU * x_dot
    x_dot = x_dot + _TAU * x_acc
    theta = theta + _TAU * theta_dot
    theta_dot = theta_dot + _TAU * theta_acc

    next_s = np.array([x, x_dot, theta, theta_dot])
    terminated = bool(abs(x) > _X_LIMIT or abs(theta) > _THETA_LIMIT)
    return next_s, 1.0, terminated


def mountaincar_step(s: State, a: int) -> tuple[State, float, bool]:
    """One MountainCar step (two-action variant). Reward -1; terminate at the goal."""
    _check_finite(s)
    x, x_dot = s
    direction = 1.0 if a == 1 else -1.0
    x_dot = x_dot + direction * _MC_FORCE + math.cos(3 * x) * (-_MC_GRAVITY)
    x_dot = min(max(x_dot, -_MC_MAX_SPEED), _MC_MAX_SPEED)
    x = x + x_dot
    x = min(max(x, _MC_MIN_POS), _MC_MAX_POS)
    if x <= _MC_MIN_POS and x_dot < 0:
        x_dot = 0.0
    next_s = np.array([x, x_dot])
    terminated = bool(x >= _MC_GOAL_POS)
    return next_s, -1.0, terminated


_STEP_FNS = {"cartpole": cartpole_step, "mountaincar": mountaincar_step}


def step(env: EnvSpec, s: State, a: int) -> tuple[State, float, bool]:
    return _STEP_FNS[env.name](s, a)


@dataclass(frozen=True)
class Transition:
    state: State
    action: int
    reward: float
    next_state: State
    terminated: bool
    truncated: bool


@dataclass(frozen=True)
class Trajectory:
    transitions: tuple[Transition, ...]
    seed: int

    @property
    def G(self) -> float:
        """Undiscounted return: exact sum of transition rewards."""
        return sum(t.reward for t in self.transitions)

    def __len__(self) -> int:
        return len(self.transitions)

    def to_jsonl(self) -> str:
        lines = []
        for i, t in enumerate(self.transitions):
            lines.append(
                json.dumps(
                    {
                        "step": i,
                        "state": list(t.state),
                        "action": t.action,
                        "reward": t.reward,
                        "next_state": list(t.next_state),
                        "terminated": t.terminated,
                        "truncated": t.truncated,
                    }
                )
            )
        return "\n".join(lines) + "\n"


def rollout(env: EnvSpec, policy: "Policy", seed: int, max_steps: int | None = None) -> Trajectory:
    """Greedy episode: seeded reset, then step until termination or truncation."""
    if max_steps is None:
        max_steps = env.max_steps
    step_fn = _STEP_FNS[env.name]
    s = reset(env, seed)
    transitions: list[Transition] = []
    for i in range(max_steps):
        a = policy.act(s)
        next_s, r, terminated = step_fn(s, a)
        truncated = (i == max_steps - 1) and not terminated
        transitions.append(Transition(s, a, r, next_s, terminated, truncated))
        if terminated:
            break
        s = next_s
    return Trajectory(tuple(transitions), seed)
