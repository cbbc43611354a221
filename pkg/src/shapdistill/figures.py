"""Matplotlib renderings saved next to the delimited report files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .distill import DistillResult
from .evaluate import EvalStats
from .shapley import RecordStore

_CLUSTER_COLORS = ["tab:blue", "tab:orange", "tab:green", "tab:purple", "tab:brown"]


def plot_returns(stats: Mapping[str, EvalStats], path: str | Path, title: str = "") -> None:
    """Per-policy episodic returns: bars with population-std error bars."""
    fig, ax = plt.subplots(figsize=(5, 4))
    names = sorted(stats)
    means = [stats[n].mean for n in names]
    stds = [stats[n].std for n in names]
    ax.bar(names, means, yerr=stds, capsize=6, color="tab:blue", alpha=0.8)
    ax.set_ylabel("episode return")
    if title:
        ax.set_title(title)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_shapley_clusters(
    store: RecordStore, result: DistillResult, path: str | Path, title: str = ""
) -> None:
    """Shapley vectors in their first two components, colored by cluster, with
    the selected boundary points in red."""
    fig, ax = plt.subplots(figsize=(5, 4))
    vecs = store.vectors
    dims = (0, 1) if vecs.shape[1] >= 2 else (0, 0)
    for c in range(result.clustering.k):
        mask = result.clustering.assignments == c
        ax.scatter(
            vecs[mask, dims[0]],
            vecs[mask, dims[1]],
            s=8,
            alpha=0.5,
            color=_CLUSTER_COLORS[c % len(_CLUSTER_COLORS)],
            label=f"action {c}",
        )
    for pair in result.pairs:
        ax.scatter(
            pair.vectors[:, dims[0]],
            pair.vectors[:, dims[1]],
            s=20,
            color="red",
            marker="x",
            label=f"boundary {pair.pair}",
        )
    ax.set_xlabel(f"shapley component {dims[0]}")
    ax.set_ylabel(f"shapley component {dims[1]}")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_training_log(log_rows, path: str | Path, title: str = "") -> None:
    """Episode returns over training steps."""
    fig, ax = plt.subplots(figsize=(5, 4))
    if log_rows:
        steps = [r[0] for r in log_rows]
        returns = [r[1] for r in log_rows]
        ax.plot(steps, returns, lw=0.8)
    ax.set_xlabel("training step")
    ax.set_ylabel("episode return")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
