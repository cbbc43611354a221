"""Built-in DQN trainer producing the black-box policies the pipeline explains.

Fully deterministic given the config seed: seeded weight init, seeded
exploration, seeded replay sampling, seeded episode resets. Only true
termination cuts the bootstrap; hitting the step cap does not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .envs import EnvSpec, reset, step
from .errors import ContractError, NumericError
from .mlp import Adam, Mlp
from .policies import MlpPolicy, Policy


@dataclass
class DqnConfig:
    gamma: float = 0.99
    lr: float = 1e-3
    replay_capacity: int = 50_000
    batch_size: int = 64
    target_sync: int = 500
    total_steps: int = 40_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 10_000
    hidden_sizes: tuple[int, ...] = (64, 64)
    seed: int = 0
    learn_start: int = 1_000
    # exploration actions are held for this many steps; >1 gives the
    # temporally-extended random pushes MountainCar needs to ever reach the goal
    explore_hold: int = 1
    # periodic greedy evaluation; the best snapshot is returned (0 disables)
    eval_every: int = 2_000
    eval_episodes: int = 5
    # per-feature scale applied to network inputs (None = no scaling)
    obs_scale: tuple[float, ...] | None = None
    # episode cap during training (None = env default)
    train_max_steps: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ContractError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.eps_end > self.eps_start:
            raise ContractError("eps_end must not exceed eps_start")
        if self.replay_capacity <= 0 or self.batch_size <= 0:
            raise ContractError("replay capacity and batch size must be positive")


class ReplayBuffer:
    """Fixed-capacity ring of transitions with FIFO eviction."""

    def __init__(self, capacity: int, feature_count: int):
        self.capacity = capacity
        self.size = 0
        self._next = 0
        self.states = np.zeros((capacity, feature_count))
        self.actions = np.zeros(capacity, dtype=int)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, feature_count))
        self.terminated = np.zeros(capacity, dtype=bool)

    def add(self, s: np.ndarray, a: int, r: float, s2: np.ndarray, terminated: bool) -> None:
        i = self._next
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_states[i] = s2
        self.terminated[i] = terminated
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.integers(0, self.size, size=batch_size)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.terminated[idx],
        )


def td_target(r: float, done: bool, gamma: float, max_next_q: float) -> float:
    """One-step Q-learning target; `done` means true termination, not truncation."""
    return r if done else r + gamma * max_next_q


def epsilon(step_idx: int, cfg: DqnConfig) -> float:
    """Linear schedule from eps_start to eps_end over eps_decay_steps, then flat."""
    if step_idx >= cfg.eps_decay_steps:
        return cfg.eps_end
    frac = step_idx / cfg.eps_decay_steps
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def td_loss_and_grads(
    net: Mlp,
    target_net: Mlp,
    states: np.ndarray,
    actions: np.ndarray,
    rewards: np.ndarray,
    next_states: np.ndarray,
    terminated: np.ndarray,
    gamma: float,
):
    """Mean-squared TD error and its analytic gradients."""
    batch = len(states)
    q, acts = net.forward_cached(states)
    max_next_q = target_net.forward(next_states).max(axis=1)
    targets = np.where(terminated, rewards, rewards + gamma * max_next_q)
    chosen = q[np.arange(batch), actions]
    err = chosen - targets
    loss = float(np.mean(err**2))
    d_out = np.zeros_like(q)
    d_out[np.arange(batch), actions] = 2.0 * err / batch
    d_w, d_b = net.backward(acts, d_out)
    return loss, d_w, d_b


@dataclass
class TrainResult:
    policy: MlpPolicy
    # rows of (global step, episode return, running loss, epsilon), one per episode
    log_rows: list[tuple[int, float, float, float]] = field(default_factory=list)


def make_policy(net: Mlp, env: EnvSpec, cfg: DqnConfig) -> MlpPolicy:
    """Greedy policy over the net; any obs scale is folded into the first layer
    so the saved JSON policy is self-contained."""
    if cfg.obs_scale is None:
        return MlpPolicy(net.copy(), env.feature_names)
    scale = np.asarray(cfg.obs_scale, dtype=float)
    folded = net.copy()
    folded.weights[0] = folded.weights[0] * scale[None, :]
    return MlpPolicy(folded, env.feature_names)


def _eval_mean_return(env: EnvSpec, net: Mlp, cfg: DqnConfig, episodes: int, seed_base: int) -> float:
    from .envs import rollout

    policy = make_policy(net, env, cfg)
    return float(np.mean([rollout(env, policy, seed_base + e).G for e in range(episodes)]))


def dqn_train(env: EnvSpec, cfg: DqnConfig) -> TrainResult:
    """Train a Q-network and return the greedy policy (best eval snapshot)."""
    rng = np.random.default_rng(cfg.seed)
    n = env.feature_count
    scale = np.ones(n) if cfg.obs_scale is None else np.asarray(cfg.obs_scale, dtype=float)
    sizes = [n, *cfg.hidden_sizes, env.action_count]
    net = Mlp.init(sizes, rng)
    target = net.copy()
    opt = Adam(net, cfg.lr)
    buf = ReplayBuffer(cfg.replay_capacity, n)
    log_rows: list[tuple[int, float, float, float]] = []

    max_steps = cfg.train_max_steps or env.max_steps
    best_net = net.copy()
    best_return = -np.inf

    s = reset(env, int(rng.integers(0, 2**31 - 1)))
    ep_return = 0.0
    ep_len = 0
    running_loss = 0.0
    hold_action = 0
    hold_left = 0

    for t in range(cfg.total_steps):
        eps = epsilon(t, cfg)
        if hold_left > 0:
            a = hold_action
            hold_left -= 1
        elif rng.random() < eps:
            a = int(rng.integers(0, env.action_count))
            hold_action = a
            hold_left = cfg.explore_hold - 1
        else:
            a = int(np.argmax(net.forward(s * scale)))
        s2, r, terminated = step(env, s, a)
        ep_return += r
        ep_len += 1
        truncated = ep_len >= max_steps and not terminated
        buf.add(s * scale, a, r, s2 * scale, terminated)

        if buf.size >= max(cfg.learn_start, cfg.batch_size):
            batch = buf.sample(rng, cfg.batch_size)
            loss, d_w, d_b = td_loss_and_grads(net, target, *batch, gamma=cfg.gamma)
            if not np.isfinite(loss):
                raise NumericError(f"TD loss diverged to {loss} at step {t}")
            opt.step(net, d_w, d_b)
            running_loss = 0.99 * running_loss + 0.01 * loss

        if (t + 1) % cfg.target_sync == 0:
            target = net.copy()

        if cfg.eval_every and (t + 1) % cfg.eval_every == 0:
            mean_ret = _eval_mean_return(env, net, cfg, cfg.eval_episodes, seed_base=10**6 + cfg.seed)
            if mean_ret >= best_return:
                best_return = mean_ret
                best_net = net.copy()

        if terminated or truncated:
            log_rows.append((t + 1, ep_return, running_loss, eps))
            s = reset(env, int(rng.integers(0, 2**31 - 1)))
            ep_return = 0.0
            ep_len = 0
            hold_left = 0
        else:
            s = s2

    final = best_net if cfg.eval_every and best_return > -np.inf else net
    return TrainResult(make_policy(final, env, cfg), log_rows)
