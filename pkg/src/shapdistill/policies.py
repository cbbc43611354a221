"""Policy abstraction: black-box decision objects and the final linear policy.

Every policy answers three queries on a state vector:
  act            -> a single action index (greedy for stochastic policies)
  action_probs   -> a probability vector over actions (one-hot for deterministic)
  scalarize      -> one real number summarizing the decision: the action label
                    for deterministic policies, the expected action index for
                    stochastic ones (equals P(action 1) for binary actions)

Ties are always broken toward the lowest action index.
"""

from __future__ import annotations

import abc
import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError
from .mlp import Mlp

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"


class Policy(abc.ABC):
    """Immutable after construction; concurrent read-only queries are safe.

    Deterministic subclasses override act(); stochastic ones override
    action_probs(). The base class supplies the other query.
    """

    kind: str
    feature_count: int
    action_count: int

    def __init__(self, kind: str, feature_count: int, action_count: int):
        if kind not in (DETERMINISTIC, STOCHASTIC):
            raise ContractError(f"unknown policy kind {kind!r}")
        self.kind = kind
        self.feature_count = feature_count
        self.action_count = action_count

    def _check_state(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state, dtype=float)
        if state.shape != (self.feature_count,):
            raise ContractError(
                f"state has shape {state.shape}, policy expects ({self.feature_count},)"
            )
        return state

    def act(self, state: np.ndarray) -> int:
        if self.kind == STOCHASTIC:
            return int(np.argmax(self.action_probs(state)))
        raise NotImplementedError

    def action_probs(self, state: np.ndarray) -> np.ndarray:
        if self.kind == DETERMINISTIC:
            probs = np.zeros(self.action_count)
            probs[self.act(state)] = 1.0
            return probs
        raise NotImplementedError

    def scalarize(self, state: np.ndarray) -> float:
        if self.kind == DETERMINISTIC:
            return float(self.act(state))
        probs = self.action_probs(state)
        return float(np.arange(self.action_count) @ probs)


class MlpPolicy(Policy):
    """Greedy deterministic policy over the Q-values of a small MLP."""

    def __init__(self, net: Mlp, feature_names: tuple[str, ...]):
        super().__init__(DETERMINISTIC, net.layer_sizes[0], net.layer_sizes[-1])
        self.net = net
        self.feature_names = tuple(feature_names)

    def act(self, state: np.ndarray) -> int:
        state = self._check_state(state)
        return int(np.argmax(self.net.forward(state)))


class SoftmaxMlpPolicy(Policy):
    """Stochastic policy: softmax over the MLP's output logits."""

    def __init__(self, net: Mlp, feature_names: tuple[str, ...]):
        super().__init__(STOCHASTIC, net.layer_sizes[0], net.layer_sizes[-1])
        self.net = net
        self.feature_names = tuple(feature_names)

    def action_probs(self, state: np.ndarray) -> np.ndarray:
        state = self._check_state(state)
        logits = self.net.forward(state)
        z = np.exp(logits - logits.max())
        return z / z.sum()


@dataclass(frozen=True)
class Hyperplane:
    """Oriented linear boundary for one action pair: f_ij(s) = w.s + b.

    f_ij(s) > 0 selects action i; f_ij(s) <= 0 selects action j.
    """

    w: np.ndarray
    b: float
    pair: tuple[int, int]

    def __post_init__(self):
        i, j = self.pair
        if not i < j:
            raise ContractError(f"hyperplane pair must satisfy i < j, got {self.pair}")
        if not np.linalg.norm(self.w) > 0:
            raise ContractError("hyperplane normal must be nonzero")

    def value(self, state: np.ndarray) -> float:
        return float(self.w @ state + self.b)

    def decide(self, state: np.ndarray) -> int:
        i, j = self.pair
        return i if self.value(state) > 0 else j

    def formula(self, feature_names: tuple[str, ...]) -> str:
        i, j = self.pair
        parts = []
        for c, name in zip(self.w, feature_names):
            sign = "-" if c < 0 else "+"
            parts.append(f"{sign} {abs(c):.6g}*{name}")
        sign = "-" if self.b < 0 else "+"
        parts.append(f"{sign} {abs(self.b):.6g}")
        body = " ".join(parts)
        if body.startswith("+ "):
            body = body[2:]
        elif body.startswith("- "):
            body = "-" + body[2:]
        return f"f{i}{j} = {body}"


class InterpretablePolicy(Policy):
    """Closed-form policy: one oriented hyperplane per unordered action pair.

    For k = 2 the single boundary decides directly. For k > 2 each boundary
    votes (i if positive else j) and the most-voted action wins with
    lowest-index tie-break; the pairwise composition is an extension beyond
    the two-action environments this was designed on.
    """

    def __init__(self, hyperplanes: list[Hyperplane], action_count: int, feature_names: tuple[str, ...]):
        if not hyperplanes:
            raise ContractError("interpretable policy needs at least one hyperplane")
        n = len(hyperplanes[0].w)
        super().__init__(DETERMINISTIC, n, action_count)
        self.feature_names = tuple(feature_names)
        self.hyperplanes = {h.pair: h for h in hyperplanes}
        expected = set(combinations(range(action_count), 2))
        if set(self.hyperplanes) != expected:
            missing = expected - set(self.hyperplanes)
            raise ContractError(f"incomplete hyperplane set; missing pairs {sorted(missing)}")
        for h in hyperplanes:
            if len(h.w) != n:
                raise ContractError("hyperplanes disagree on feature dimension")

    def act(self, state: np.ndarray) -> int:
        state = self._check_state(state)
        if self.action_count == 2:
            return self.hyperplanes[(0, 1)].decide(state)
        votes = np.zeros(self.action_count, dtype=int)
        for h in self.hyperplanes.values():
            votes[h.decide(state)] += 1
        return int(np.argmax(votes))

    def formulas(self) -> list[str]:
        return [self.hyperplanes[p].formula(self.feature_names) for p in sorted(self.hyperplanes)]


def save_policy(policy: Policy, path: str | Path) -> None:
    """Write a policy as a JSON document (MLP-backed or interpretable)."""
    if isinstance(policy, InterpretablePolicy):
        doc = {
            "type": "interpretable",
            "action_count": policy.action_count,
            "feature_names": list(policy.feature_names),
            "hyperplanes": [
                {
                    "i": p[0],
                    "j": p[1],
                    "w": policy.hyperplanes[p].w.tolist(),
                    "b": float(policy.hyperplanes[p].b),
                    "formula": policy.hyperplanes[p].formula(policy.feature_names),
                }
                for p in sorted(policy.hyperplanes)
            ],
        }
    elif isinstance(policy, (MlpPolicy, SoftmaxMlpPolicy)):
        net = policy.net
        doc = {
            "type": "mlp",
            "kind": policy.kind,
            "layer_sizes": net.layer_sizes,
            "weights": [w.reshape(-1).tolist() for w in net.weights],  # row-major
            "biases": [b.tolist() for b in net.biases],
            "activation": "relu",
            "action_count": policy.action_count,
            "feature_names": list(policy.feature_names),
        }
    else:
        raise ConfigError(f"cannot serialize policy of type {type(policy).__name__}")
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_policy(path: str | Path) -> Policy:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load policy from {path}: {exc}") from exc
    if doc.get("type") == "interpretable":
        planes = [
            Hyperplane(np.array(h["w"], dtype=float), float(h["b"]), (h["i"], h["j"]))
            for h in doc["hyperplanes"]
        ]
        return InterpretablePolicy(planes, doc["action_count"], tuple(doc["feature_names"]))
    if doc.get("type") == "mlp":
        sizes = doc["layer_sizes"]
        weights = [
            np.array(flat, dtype=float).reshape(out, inp)
            for flat, inp, out in zip(doc["weights"], sizes[:-1], sizes[1:])
        ]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
        net = Mlp(sizes, weights, biases)
        cls = MlpPolicy if doc["kind"] == DETERMINISTIC else SoftmaxMlpPolicy
        return cls(net, tuple(doc["feature_names"]))
    raise ConfigError(f"unknown policy document type {doc.get('type')!r} in {path}")
