"""On-manifold Shapley attribution of state features to a policy's decision.

The characteristic value of a feature coalition is the expected scalarized
policy output when only the coalition's features are observed; the
expectation runs over the on-policy state distribution, estimated by
k-nearest neighbors in the std-normalized coalition subspace of a dataset of
visited states. This keeps the fill-in of unobserved features on the
visited-state manifold instead of assuming feature independence.

A ShapleyRecord pairs each explained state with its Shapley vector; the
RecordStore keeps the bidirectional pairing so Shapley-space points can be
mapped back to the states that produced them.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from itertools import permutations as iter_permutations
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .envs import EnvSpec, rollout
from .errors import ContractError
from .policies import Policy

Coalition = frozenset


@dataclass(frozen=True)
class StateDataset:
    """States visited under a policy, with per-feature normalization stats."""

    states: np.ndarray  # (m, n)
    mean: np.ndarray
    std: np.ndarray  # std of a constant feature is stored as 1
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_states(cls, states: np.ndarray, meta: dict | None = None) -> "StateDataset":
        states = np.asarray(states, dtype=float)
        if states.ndim != 2 or len(states) == 0:
            raise ContractError("dataset needs a nonempty (m, n) state matrix")
        mean = states.mean(axis=0)
        std = states.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        return cls(states, mean, std, meta or {})

    def __len__(self) -> int:
        return len(self.states)

    @property
    def feature_count(self) -> int:
        return self.states.shape[1]


def build_dataset(env: EnvSpec, policy: Policy, n_traj: int, seed: int) -> StateDataset:
    """Concatenate all states visited over n_traj seeded greedy rollouts."""
    if n_traj < 1:
        raise ContractError("n_traj must be >= 1")
    states = []
    for e in range(n_traj):
        traj = rollout(env, policy, seed + e)
        states.extend(t.state for t in traj.transitions)
    if not states:
        raise ContractError("rollouts produced no states")
    meta = {"env": env.name, "n_traj": n_traj, "seed": seed}
    return StateDataset.from_states(np.array(states), meta)


@dataclass(frozen=True)
class ShapleyRecord:
    state: np.ndarray
    shapley: np.ndarray  # one contribution per feature
    action: int
    v_full: float  # scalarized policy output at the state
    v_empty: float  # dataset-average scalarized output (the baseline)


class RecordStore:
    """Ordered ShapleyRecords with nearest-vector lookup (the inverse map)."""

    def __init__(self, records: Sequence[ShapleyRecord], meta: dict | None = None):
        if not records:
            raise ContractError("record store must be nonempty")
        self.records = list(records)
        self.meta = meta or {}
        self._vectors = np.array([r.shapley for r in self.records])
        self._states = np.array([r.state for r in self.records])

    def __len__(self) -> int:
        return len(self.records)

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def states(self) -> np.ndarray:
        return self._states

    @property
    def actions(self) -> np.ndarray:
        return np.array([r.action for r in self.records])

    def inverse_lookup(self, phi: np.ndarray) -> ShapleyRecord:
        return self.records[self.inverse_lookup_index(phi)]

    def inverse_lookup_index(self, phi: np.ndarray) -> int:
        """Index of the record whose Shapley vector is nearest to phi.

        Equidistant ties resolve to the lowest record index.
        """
        phi = np.asarray(phi, dtype=float)
        d = np.linalg.norm(self._vectors - phi, axis=1)
        return int(np.argmin(d))

    # -- persistence ---------------------------------------------------

    def to_csv(self, path: str | Path, feature_names: Sequence[str], meta_path: str | Path | None = None) -> None:
        n = len(feature_names)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = [*feature_names, *(f"phi_{name}" for name in feature_names), "action", "v_full", "v_empty"]
        writer.writerow(header)
        for r in self.records:
            writer.writerow(
                [
                    *(repr(float(x)) for x in r.state),
                    *(repr(float(x)) for x in r.shapley),
                    r.action,
                    repr(float(r.v_full)),
                    repr(float(r.v_empty)),
                ]
            )
        Path(path).write_text(buf.getvalue())
        if meta_path is not None:
            Path(meta_path).write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path, meta_path: str | Path | None = None) -> "RecordStore":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        n = (len(header) - 3) // 2
        records = []
        for row in rows[1:]:
            state = np.array([float(x) for x in row[:n]])
            shapley = np.array([float(x) for x in row[n : 2 * n]])
            action = int(row[2 * n])
            v_full, v_empty = float(row[2 * n + 1]), float(row[2 * n + 2])
            records.append(ShapleyRecord(state, shapley, action, v_full, v_empty))
        meta = {}
        if meta_path is not None and Path(meta_path).exists():
            meta = json.loads(Path(meta_path).read_text())
        return cls(records, meta)


def exact_shapley(value_fn: Callable[[int], float], n: int) -> np.ndarray:
    """Exact Shapley values of a set function given by membership bitmask.

    phi_i = sum over coalitions C not containing i of
    |C|!(n-|C|-1)!/n! * (v(C u {i}) - v(C)).
    """
    v = np.array([value_fn(mask) for mask in range(2**n)])
    fact = [math.factorial(i) for i in range(n + 1)]
    weights = [fact[c] * fact[n - c - 1] / fact[n] for c in range(n)]
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        for mask in range(2**n):
            if mask & bit:
                continue
            c = bin(mask).count("1")
            phi[i] += weights[c] * (v[mask | bit] - v[mask])
    return phi


def sampled_shapley(
    value_fn: Callable[[int], float],
    n: int,
    permutations: int,
    rng: np.random.Generator,
    exhaustive: bool = False,
) -> np.ndarray:
    """Monte-Carlo Shapley: average marginal contribution over feature
    orderings. exhaustive=True walks every n! ordering exactly once, which
    degenerates to the exact value."""
    if permutations < 1 and not exhaustive:
        raise ContractError("permutations must be >= 1")
    cache: dict[int, float] = {}

    def v(mask: int) -> float:
        if mask not in cache:
            cache[mask] = value_fn(mask)
        return cache[mask]

    if exhaustive:
        orderings: Iterable[Sequence[int]] = iter_permutations(range(n))
        count = math.factorial(n)
    else:
        orderings = (rng.permutation(n) for _ in range(permutations))
        count = permutations

    phi = np.zeros(n)
    for order in orderings:
        mask = 0
        for i in order:
            before = v(mask)
            mask |= 1 << int(i)
            phi[int(i)] += v(mask) - before
    phi /= count
    return phi


class Explainer:
    """Caches the dataset-wide scalarizations and answers coalition queries.

    Build one per (dataset, policy, knn_k) and reuse it; the per-call module
    functions below construct a throwaway instance for convenience.
    """

    MAX_EXACT_FEATURES = 20

    def __init__(self, ds: StateDataset, policy: Policy, knn_k: int):
        if not 1 <= knn_k <= len(ds):
            raise ContractError(f"knn_k must be in [1, {len(ds)}], got {knn_k}")
        self.ds = ds
        self.policy = policy
        self.knn_k = knn_k
        self.n = ds.feature_count
        self._normed = ds.states / ds.std
        self._scal = np.array([policy.scalarize(s) for s in ds.states])
        self.v_empty = float(self._scal.mean())

    def characteristic(self, s: np.ndarray, coalition: Iterable[int]) -> float:
        """v(C): expected scalarized output given only the coalition features."""
        idx = sorted(set(coalition))
        if any(i < 0 or i >= self.n for i in idx):
            raise ContractError(f"coalition indices out of range for n={self.n}: {idx}")
        if len(idx) == self.n:
            return self.policy.scalarize(s)
        if not idx:
            return self.v_empty
        q = np.asarray(s, dtype=float)[idx] / self.ds.std[idx]
        d = np.linalg.norm(self._normed[:, idx] - q, axis=1)
        neighbors = np.argsort(d, kind="stable")[: self.knn_k]
        return float(self._scal[neighbors].mean())

    def _value_fn(self, s: np.ndarray) -> Callable[[int], float]:
        def v(mask: int) -> float:
            members = [i for i in range(self.n) if mask >> i & 1]
            return self.characteristic(s, members)

        return v

    def shapley_exact(self, s: np.ndarray) -> ShapleyRecord:
        """Exact Shapley values by full coalition enumeration (n <= 20)."""
        n = self.n
        if n > self.MAX_EXACT_FEATURES:
            raise ContractError(
                f"exact enumeration over 2^{n} coalitions is infeasible; use shapley_sampled"
            )
        s = np.asarray(s, dtype=float)
        v = self._value_fn(s)
        phi = exact_shapley(v, n)
        return ShapleyRecord(s, phi, self.policy.act(s), float(v(2**n - 1)), self.v_empty)

    def shapley_sampled(
        self, s: np.ndarray, permutations: int, seed: int, exhaustive: bool = False
    ) -> ShapleyRecord:
        """Monte-Carlo Shapley over sampled feature orderings; seeded and
        unbiased for the exact value. exhaustive=True enumerates all n!."""
        s = np.asarray(s, dtype=float)
        rng = np.random.default_rng(seed)
        v = self._value_fn(s)
        phi = sampled_shapley(v, self.n, permutations, rng, exhaustive)
        return ShapleyRecord(s, phi, self.policy.act(s), float(v(2**self.n - 1)), self.v_empty)


def characteristic_value(
    ds: StateDataset, policy: Policy, s: np.ndarray, coalition: Iterable[int], knn_k: int
) -> float:
    return Explainer(ds, policy, knn_k).characteristic(s, coalition)


def shapley_exact(ds: StateDataset, policy: Policy, s: np.ndarray, knn_k: int) -> ShapleyRecord:
    return Explainer(ds, policy, knn_k).shapley_exact(s)


def shapley_sampled(
    ds: StateDataset,
    policy: Policy,
    s: np.ndarray,
    knn_k: int,
    permutations: int,
    seed: int,
    exhaustive: bool = False,
) -> ShapleyRecord:
    return Explainer(ds, policy, knn_k).shapley_sampled(s, permutations, seed, exhaustive)


def explain_states(
    ds: StateDataset,
    policy: Policy,
    states: Sequence[np.ndarray] | np.ndarray,
    mode: str = "exact",
    knn_k: int = 20,
    permutations: int = 200,
    seed: int = 0,
) -> RecordStore:
    """One ShapleyRecord per input state (duplicates kept), in input order."""
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[None, :]
    if len(states) == 0:
        raise ContractError("explain_states needs at least one state")
    explainer = Explainer(ds, policy, knn_k)
    records = []
    for i, s in enumerate(states):
        if mode == "exact":
            records.append(explainer.shapley_exact(s))
        elif mode == "sampled":
            records.append(explainer.shapley_sampled(s, permutations, seed + i))
        else:
            raise ContractError(f"unknown explanation mode {mode!r}")
    meta = {
        "mode": mode,
        "knn_k": knn_k,
        "permutations": permutations if mode == "sampled" else None,
        "seed": seed,
        "dataset": ds.meta,
    }
    return RecordStore(records, meta)
