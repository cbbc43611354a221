"""Shapley-vector decision-boundary distillation.

Pipeline: k-means over the store's Shapley vectors (one cluster per action),
pick the records most equidistant between each cluster pair, map them back to
their originating states through the store, fit a total-least-squares
hyperplane to those boundary states, and orient it so the positive side is
the lower-indexed action's region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations

import numpy as np

from .errors import ContractError, DegenerateFitError
from .policies import Hyperplane, InterpretablePolicy
from .shapley import RecordStore


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray  # cluster index per vector
    centroids: np.ndarray  # (k, n)
    inertia: float  # sum of squared distances to assigned centroids
    iterations: int

    @property
    def k(self) -> int:
        return len(self.centroids)

    def sizes(self) -> list[int]:
        return [int(np.sum(self.assignments == c)) for c in range(self.k)]


def _farthest_point_seeds(vectors: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """First seed drawn at random, then greedily the point farthest from the
    chosen set. Ties resolve to the lowest index."""
    chosen = [int(rng.integers(0, len(vectors)))]
    min_d = np.linalg.norm(vectors - vectors[chosen[0]], axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(min_d))
        chosen.append(nxt)
        min_d = np.minimum(min_d, np.linalg.norm(vectors - vectors[nxt], axis=1))
    return vectors[chosen].copy()


def kmeans(
    vectors: np.ndarray, k: int, seed: int = 0, max_iters: int = 100, tol: float = 1e-9
) -> Clustering:
    """Lloyd's algorithm with farthest-point seeding; deterministic given seed."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim != 2:
        raise ContractError("kmeans expects a (m, n) matrix of vectors")
    if k < 1:
        raise ContractError("k must be >= 1")
    if len(vectors) < k:
        raise ContractError(f"need at least k={k} vectors, got {len(vectors)}")

    rng = np.random.default_rng(seed)
    centroids = _farthest_point_seeds(vectors, k, rng)
    assignments = np.zeros(len(vectors), dtype=int)
    iterations = 0
    for iterations in range(1, max_iters + 1):
        d2 = ((vectors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignments = np.argmin(d2, axis=1)
        new_centroids = centroids.copy()
        for c in range(k):
            members = vectors[assignments == c]
            if len(members) > 0:
                new_centroids[c] = members.mean(axis=0)
            else:
                # repair: seize the point farthest from its assigned centroid
                far = int(np.argmax(d2[np.arange(len(vectors)), assignments]))
                new_centroids[c] = vectors[far]
                assignments[far] = c
        shift = float(np.linalg.norm(new_centroids - centroids))
        centroids = new_centroids
        if shift < tol:
            break
    d2 = ((vectors[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignments = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(len(vectors)), assignments].sum())
    return Clustering(assignments, centroids, inertia, iterations)


def relabel_clusters_by_action(clustering: Clustering, actions: np.ndarray) -> Clustering:
    """Permute cluster labels so cluster c mostly holds records of action c.

    Exact search over label permutations (k is the action count, always small).
    """
    k = clustering.k
    counts = np.zeros((k, k), dtype=int)  # counts[cluster, action]
    for c, a in zip(clustering.assignments, actions):
        if 0 <= a < k:
            counts[c, a] += 1
    best_perm = None
    best_score = -1
    for perm in permutations(range(k)):  # perm[cluster] = new label
        score = sum(counts[c, perm[c]] for c in range(k))
        if score > best_score:
            best_score = score
            best_perm = perm
    mapping = np.array(best_perm)
    new_assignments = mapping[clustering.assignments]
    new_centroids = np.empty_like(clustering.centroids)
    for c in range(k):
        new_centroids[mapping[c]] = clustering.centroids[c]
    return Clustering(new_assignments, new_centroids, clustering.inertia, clustering.iterations)


def boundary_score(phi: np.ndarray, mu_i: np.ndarray, mu_j: np.ndarray) -> float:
    """Equidistance score: | ||phi-mu_i||^2 - ||phi-mu_j||^2 |. Zero on the bisector."""
    phi = np.asarray(phi, dtype=float)
    di = float(((phi - mu_i) ** 2).sum())
    dj = float(((phi - mu_j) ** 2).sum())
    return abs(di - dj)


@dataclass(frozen=True)
class BoundaryPair:
    """Boundary selection for one action pair: the most centroid-equidistant
    records among the two clusters, and their recovered states."""

    pair: tuple[int, int]
    record_indices: np.ndarray
    scores: np.ndarray  # nondecreasing
    states: np.ndarray  # states recovered via the store's inverse map
    vectors: np.ndarray
    truncated: bool  # m exceeded the candidate count


def select_boundary_points(
    store: RecordStore, clustering: Clustering, i: int, j: int, m: int
) -> BoundaryPair:
    """The m records of clusters i/j with the smallest equidistance scores.

    Ties break toward the lower record index. If fewer than m candidates
    exist, all are returned with the truncated flag set.
    """
    if m < 1:
        raise ContractError("m must be >= 1")
    assign = clustering.assignments
    candidates = np.flatnonzero((assign == i) | (assign == j))
    if not np.any(assign == i) or not np.any(assign == j):
        raise ContractError(f"clusters {i} and {j} must both be nonempty")
    mu_i, mu_j = clustering.centroids[i], clustering.centroids[j]
    scores = np.array([boundary_score(store.vectors[c], mu_i, mu_j) for c in candidates])
    order = np.lexsort((candidates, scores))
    truncated = m > len(candidates)
    take = order[: min(m, len(candidates))]
    selected = candidates[take]
    vectors = store.vectors[selected]
    states = np.array([store.inverse_lookup(v).state for v in vectors])
    return BoundaryPair((i, j), selected, scores[take], states, vectors, truncated)


def fit_hyperplane(states: np.ndarray) -> tuple[np.ndarray, float]:
    """Total-least-squares hyperplane through a point cloud.

    w is the unit eigenvector of the state covariance with the smallest
    eigenvalue, b = -w . centroid; this minimizes the summed squared
    orthogonal distances.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim != 2:
        raise ContractError("fit_hyperplane expects a (m, n) state matrix")
    m, n = states.shape
    if m < n:
        raise ContractError(f"need at least n={n} states to fit a hyperplane, got {m}")
    center = states.mean(axis=0)
    centered = states - center
    cov = centered.T @ centered / m
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[-1] <= 1e-15:
        raise DegenerateFitError("all states identical; no hyperplane is defined")
    w = eigvecs[:, 0]
    # deterministic sign convention; orientation is decided separately
    lead = np.argmax(np.abs(w))
    if w[lead] < 0:
        w = -w
    b = float(-w @ center)
    return w, b


def orient_hyperplane(
    w: np.ndarray, b: float, store: RecordStore, clustering: Clustering, i: int, j: int
) -> Hyperplane:
    """Flip the plane so most cluster-i member states land on the positive side.

    An exact 50/50 split leaves the plane unchanged.
    """
    members = store.states[clustering.assignments == i]
    if len(members) == 0:
        raise ContractError(f"cluster {i} is empty; cannot orient")
    positive = int(np.sum(members @ w + b > 0))
    if 2 * positive < len(members):
        w, b = -w, -b
    return Hyperplane(np.asarray(w, dtype=float), float(b), (min(i, j), max(i, j)))


@dataclass
class DistillConfig:
    kmeans_seed: int = 0
    max_iters: int = 100
    tol: float = 1e-9
    m_boundary: int | None = None  # default max(2n, 16)


@dataclass
class DistillResult:
    policy: InterpretablePolicy
    clustering: Clustering
    pairs: list[BoundaryPair] = field(default_factory=list)

    def report(self, feature_names: tuple[str, ...]) -> dict:
        """JSON-serializable distillation report."""
        return {
            "clustering": {
                "centroids": self.clustering.centroids.tolist(),
                "inertia": self.clustering.inertia,
                "sizes": self.clustering.sizes(),
                "iterations": self.clustering.iterations,
            },
            "boundary_points": [
                {
                    "pair": list(p.pair),
                    "record_indices": [int(x) for x in p.record_indices],
                    "scores": p.scores.tolist(),
                    "shapley_vectors": p.vectors.tolist(),
                    "states": p.states.tolist(),
                    "truncated": p.truncated,
                }
                for p in self.pairs
            ],
            "hyperplanes": [
                {
                    "i": pair[0],
                    "j": pair[1],
                    "w": self.policy.hyperplanes[pair].w.tolist(),
                    "b": float(self.policy.hyperplanes[pair].b),
                    "formula": self.policy.hyperplanes[pair].formula(feature_names),
                }
                for pair in sorted(self.policy.hyperplanes)
            ],
        }


def distill(
    store: RecordStore,
    k: int,
    config: DistillConfig | None = None,
    feature_names: tuple[str, ...] | None = None,
) -> DistillResult:
    """Full boundary-distillation pass: cluster, select, inverse-map, fit, orient."""
    config = config or DistillConfig()
    if k < 2:
        raise ContractError("distillation needs at least two actions")
    n = store.vectors.shape[1]
    if feature_names is None:
        feature_names = tuple(f"s{i}" for i in range(n))
    m = config.m_boundary if config.m_boundary is not None else max(2 * n, 16)

    try:
        clustering = kmeans(
            store.vectors, k, seed=config.kmeans_seed, max_iters=config.max_iters, tol=config.tol
        )
    except ContractError as exc:
        raise ContractError(f"clustering stage failed: {exc}") from exc
    clustering = relabel_clusters_by_action(clustering, store.actions)

    planes: list[Hyperplane] = []
    pairs: list[BoundaryPair] = []
    for i, j in combinations(range(k), 2):
        try:
            pair = select_boundary_points(store, clustering, i, j, m)
            w, b = fit_hyperplane(pair.states)
            planes.append(orient_hyperplane(w, b, store, clustering, i, j))
            pairs.append(pair)
        except (ContractError, DegenerateFitError) as exc:
            raise type(exc)(f"boundary stage failed for pair ({i}, {j}): {exc}") from exc

    policy = InterpretablePolicy(planes, k, feature_names)
    return DistillResult(policy, clustering, pairs)
