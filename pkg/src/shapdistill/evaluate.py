"""Seeded episodic evaluation, fidelity measurement, and report export.

Original and distilled policies are always compared on identical seed
sequences so the comparison is noise-matched. Standard deviation is the
population std, matching typical RL reporting.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .envs import EnvSpec, rollout
from .errors import ContractError
from .policies import Policy


@dataclass(frozen=True)
class EvalStats:
    episodes: int
    returns: tuple[float, ...]
    mean: float
    std: float  # population
    min: float
    max: float
    seed_base: int

    @classmethod
    def from_returns(cls, returns: Sequence[float], seed_base: int) -> "EvalStats":
        arr = np.asarray(returns, dtype=float)
        return cls(
            episodes=len(arr),
            returns=tuple(float(x) for x in arr),
            mean=float(arr.mean()),
            std=float(arr.std()),
            min=float(arr.min()),
            max=float(arr.max()),
            seed_base=seed_base,
        )

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
            "seed_base": self.seed_base,
            "returns": list(self.returns),
        }


@dataclass(frozen=True)
class FidelityReport:
    n_states: int
    agreements: int

    @property
    def rate(self) -> float:
        return self.agreements / self.n_states

    def to_dict(self) -> dict:
        return {"n_states": self.n_states, "agreements": self.agreements, "rate": self.rate}


def evaluate(env: EnvSpec, policy: Policy, episodes: int, seed_base: int) -> EvalStats:
    """Greedy returns over `episodes` rollouts; episode e uses seed seed_base + e."""
    if episodes < 1:
        raise ContractError("episodes must be >= 1")
    returns = [rollout(env, policy, seed_base + e).G for e in range(episodes)]
    return EvalStats.from_returns(returns, seed_base)


def fidelity(original: Policy, distilled: Policy, states: np.ndarray) -> FidelityReport:
    """Fraction of states on which the two policies pick the same action."""
    states = np.asarray(states, dtype=float)
    if len(states) == 0:
        raise ContractError("fidelity needs at least one state")
    if original.action_count != distilled.action_count:
        raise ContractError(
            f"action counts differ: {original.action_count} vs {distilled.action_count}"
        )
    agreements = sum(
        1 for s in states if original.act(s) == distilled.act(s)
    )
    return FidelityReport(len(states), agreements)


def export_report(
    stats: Mapping[str, EvalStats],
    fidelity_report: FidelityReport | None,
    distill_report: dict | None,
    json_path: str | Path,
    csv_path: str | Path | None = None,
    provenance: dict | None = None,
) -> None:
    """Write the evaluation summary as JSON plus per-episode CSV plot data.

    Field order is fixed so reruns on identical inputs are byte-identical.
    """
    doc: dict = {}
    if provenance:
        doc["provenance"] = provenance
    doc["policies"] = {pid: stats[pid].to_dict() for pid in sorted(stats)}
    if fidelity_report is not None:
        doc["fidelity"] = fidelity_report.to_dict()
    if distill_report is not None:
        doc["boundaries"] = distill_report.get("hyperplanes", [])
    try:
        Path(json_path).write_text(json.dumps(doc, indent=2) + "\n")
        if csv_path is not None:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["policy_id", "episode", "return"])
            for pid in sorted(stats):
                for e, ret in enumerate(stats[pid].returns):
                    writer.writerow([pid, e, repr(ret)])
            Path(csv_path).write_text(buf.getvalue())
    except OSError as exc:
        raise ContractError(f"cannot write report to {exc.filename}: {exc}") from exc
