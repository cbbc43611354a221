import json

import numpy as np
import pytest

from shapdistill.envs import (
    CARTPOLE,
    MOUNTAINCAR,
    cartpole_step,
    get_env,
    mountaincar_step,
    reset,
    rollout,
)
from shapdistill.errors import ConfigError, NumericError
from shapdistill.policies import Policy


class ConstantPolicy(Policy):
    def __init__(self, action, feature_count, action_count=2):
        super().__init__("deterministic", feature_count, action_count)
        self.action = action

    def act(self, state):
        return self.action


def test_get_env_unknown_name():
    with pytest.raises(ConfigError):
        get_env("lunar-lander")


def test_reset_seeded_determinism():
    a = reset(CARTPOLE, 7)
    b = reset(CARTPOLE, 7)
    np.testing.assert_array_equal(a, b)


def test_reset_cartpole_range():
    s = reset(CARTPOLE, 7)
    assert np.all(np.abs(s) <= 0.05)


def test_reset_mountaincar_velocity_zero():
    for seed in range(5):
        s = reset(MOUNTAINCAR, seed)
        assert s[1] == 0.0
        assert -0.6 <= s[0] <= -0.4


def test_cartpole_step_zero_state_push_right():
    s2, r, term = cartpole_step(np.zeros(4), 1)
    np.testing.assert_allclose(s2, [0.0, 0.1951219512195122, 0.0, -0.2926829268292683], atol=1e-7)
    assert r == 1.0
    assert not term


def test_cartpole_zero_state_mirror_symmetry():
    right, _, _ = cartpole_step(np.zeros(4), 1)
    left, _, _ = cartpole_step(np.zeros(4), 0)
    np.testing.assert_allclose(left, right * np.array([1, -1, 1, -1]))


def test_cartpole_terminates_outside_x_limit():
    _, _, term = cartpole_step(np.array([2.5, 0, 0, 0]), 0)
    assert term
    _, _, term = cartpole_step(np.array([2.5, 0, 0, 0]), 1)
    assert term


def test_cartpole_nonfinite_state_rejected():
    with pytest.raises(NumericError):
        cartpole_step(np.array([np.nan, 0, 0, 0]), 0)


def test_mountaincar_step_hand_computed():
    s2, r, term = mountaincar_step(np.array([-0.5, 0.0]), 0)
    np.testing.assert_allclose(s2, [-0.5011768430041692, -0.0011768430041692573], atol=1e-12)
    assert r == -1.0
    assert not term


def test_mountaincar_goal_termination():
    s2, _, term = mountaincar_step(np.array([0.49, 0.07]), 1)
    assert term
    assert s2[0] >= 0.5


def test_mountaincar_wall_clipping():
    s2, _, _ = mountaincar_step(np.array([-1.2, -0.05]), 0)
    assert s2[0] >= -1.2
    assert s2[1] == 0.0


def test_mountaincar_bounds_hold_under_random_actions():
    rng = np.random.default_rng(0)
    s = reset(MOUNTAINCAR, 0)
    for _ in range(500):
        s, _, term = mountaincar_step(s, int(rng.integers(0, 2)))
        assert -1.2 <= s[0] <= 0.6
        assert -0.07 <= s[1] <= 0.07
        if term:
            s = reset(MOUNTAINCAR, 1)


def test_rollout_determinism():
    policy = ConstantPolicy(1, 4)
    t1 = rollout(CARTPOLE, policy, seed=3)
    t2 = rollout(CARTPOLE, policy, seed=3)
    assert t1.to_jsonl() == t2.to_jsonl()


def test_rollout_always_left_mountaincar_never_solves():
    policy = ConstantPolicy(0, 2)
    traj = rollout(MOUNTAINCAR, policy, seed=11)
    assert len(traj) == 200
    assert traj.G == -200.0
    assert traj.transitions[-1].truncated
    assert not traj.transitions[-1].terminated


def test_rollout_max_steps_one():
    traj = rollout(CARTPOLE, ConstantPolicy(0, 4), seed=0, max_steps=1)
    assert len(traj) == 1
    assert traj.transitions[0].truncated


def test_trajectory_return_is_reward_sum():
    traj = rollout(CARTPOLE, ConstantPolicy(1, 4), seed=5)
    assert traj.G == sum(t.reward for t in traj.transitions)


def test_trajectory_jsonl_schema():
    traj = rollout(CARTPOLE, ConstantPolicy(1, 4), seed=5, max_steps=3)
    lines = traj.to_jsonl().strip().split("\n")
    assert len(lines) == len(traj)
    row = json.loads(lines[0])
    assert set(row) == {"step", "state", "action", "reward", "next_state", "terminated", "truncated"}
    assert row["step"] == 0
