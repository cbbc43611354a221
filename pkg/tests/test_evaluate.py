import json

import numpy as np
import pytest

from shapdistill.envs import CARTPOLE, MOUNTAINCAR
from shapdistill.errors import ContractError
from shapdistill.evaluate import EvalStats, evaluate, export_report, fidelity
from shapdistill.policies import Policy


class ConstantPolicy(Policy):
    def __init__(self, action, feature_count=4, action_count=2):
        super().__init__("deterministic", feature_count, action_count)
        self.action = action

    def act(self, state):
        return self.action


class FlipPolicy(Policy):
    """The opposite action of a wrapped binary policy."""

    def __init__(self, inner):
        super().__init__("deterministic", inner.feature_count, inner.action_count)
        self.inner = inner

    def act(self, state):
        return 1 - self.inner.act(state)


def test_evaluate_determinism():
    p = ConstantPolicy(1)
    a = evaluate(CARTPOLE, p, episodes=3, seed_base=5)
    b = evaluate(CARTPOLE, p, episodes=3, seed_base=5)
    assert a == b


def test_evaluate_single_episode_zero_std():
    stats = evaluate(MOUNTAINCAR, ConstantPolicy(0, feature_count=2), episodes=1, seed_base=0)
    assert stats.std == 0.0
    assert stats.episodes == 1


def test_stats_consistency_with_returns():
    stats = EvalStats.from_returns([1.0, 2.0, 3.0, 6.0], seed_base=0)
    arr = np.array(stats.returns)
    assert abs(stats.mean - arr.mean()) < 1e-12
    assert abs(stats.std - arr.std()) < 1e-12
    assert stats.min == 1.0
    assert stats.max == 6.0


def test_fidelity_identity_and_complement():
    p = ConstantPolicy(1)
    states = np.random.default_rng(0).normal(size=(10, 4))
    assert fidelity(p, p, states).rate == 1.0
    assert fidelity(p, FlipPolicy(p), states).rate == 0.0


def test_fidelity_half_agreement():
    class ByIndex(Policy):
        def __init__(self):
            super().__init__("deterministic", 1, 2)

        def act(self, state):
            return int(state[0] > 1.5)

    states = np.array([[0.0], [1.0], [2.0], [3.0]])
    report = fidelity(ConstantPolicy(0, feature_count=1), ByIndex(), states)
    assert report.rate == 0.5
    assert report.agreements == 2


def test_fidelity_action_count_mismatch():
    with pytest.raises(ContractError):
        fidelity(ConstantPolicy(0), ConstantPolicy(0, action_count=3), np.zeros((2, 4)))


def test_export_report_roundtrip_and_byte_stability(tmp_path):
    stats = {
        "original": EvalStats.from_returns([500.0, 500.0], seed_base=7),
        "distilled": EvalStats.from_returns([499.0, 500.0], seed_base=7),
    }
    p = ConstantPolicy(1)
    states = np.zeros((4, 4))
    fid = fidelity(p, p, states)
    json_path, csv_path = tmp_path / "eval.json", tmp_path / "eval.csv"
    export_report(stats, fid, {"hyperplanes": []}, json_path, csv_path)
    first_json = json_path.read_bytes()
    first_csv = csv_path.read_bytes()
    export_report(stats, fid, {"hyperplanes": []}, json_path, csv_path)
    assert json_path.read_bytes() == first_json
    assert csv_path.read_bytes() == first_csv

    doc = json.loads(first_json)
    assert doc["policies"]["original"]["mean"] == 500.0
    assert doc["fidelity"]["rate"] == 1.0
    rows = first_csv.decode().strip().split("\n")
    assert rows[0] == "policy_id,episode,return"
    assert len(rows) == 1 + 4  # one row per episode per policy


def test_export_report_fidelity_optional(tmp_path):
    stats = {"original": EvalStats.from_returns([1.0], seed_base=0)}
    path = tmp_path / "eval.json"
    export_report(stats, None, None, path)
    doc = json.loads(path.read_text())
    assert "fidelity" not in doc
