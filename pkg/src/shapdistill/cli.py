"""Config-driven orchestration of the full distillation pipeline.

Subcommands: train, rollout, explain, distill, evaluate, pipeline. Each stage
reads the previous stage's files from the output directory, so stages can be
rerun individually; `pipeline` runs everything and is idempotent given fixed
seeds. All intermediate artifacts are plain CSV/JSON (plus rendered PNG
figures), and every JSON artifact embeds the config hash and master seed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import figures, shapley
from .distill import DistillConfig
from .distill import distill as run_distill
from .dqn import DqnConfig, dqn_train
from .evaluate import evaluate as run_evaluate
from .evaluate import export_report, fidelity
from .bridge import BridgedPolicy
from .envs import get_env, rollout
from .errors import (
    BridgeError,
    ConfigError,
    NumericError,
    ShapDistillError,
    StageOrderError,
)
from .policies import Policy, load_policy, save_policy

EXIT_CODES = {
    ConfigError: 2,
    StageOrderError: 3,
    NumericError: 4,
    BridgeError: 5,
}

_DEFAULTS = {
    "environment": None,
    "master_seed": 0,
    "output_dir": "runs/out",
    "policy": {"source": "builtin-dqn", "path": None, "command": None, "dqn": {}},
    "explain": {"n_traj": 100, "n_states": 1000, "mode": "exact", "knn_k": 20, "permutations": 200},
    "distill": {"m_boundary": None, "kmeans_seed": None, "max_iters": 100, "tol": 1e-9},
    "evaluate": {"episodes": 10, "seed_base": None},
}


def _merge(defaults: dict, overrides: dict) -> dict:
    out = dict(defaults)
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path: str | Path, seed_override: int | None = None, out_override: str | None = None) -> dict:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    cfg = _merge(_DEFAULTS, raw)
    if seed_override is not None:
        cfg["master_seed"] = seed_override
    if out_override is not None:
        cfg["output_dir"] = out_override
    elif os.environ.get("SHAPDISTILL_OUT"):
        cfg["output_dir"] = os.environ["SHAPDISTILL_OUT"]
    if not cfg.get("environment"):
        raise ConfigError("config is missing the 'environment' field")
    get_env(cfg["environment"])  # validate early
    if cfg["policy"]["source"] not in ("builtin-dqn", "file", "bridge"):
        raise ConfigError(f"unknown policy source {cfg['policy']['source']!r}")
    return cfg


def config_hash(cfg: dict) -> str:
    # output_dir determines where artifacts land, not what they contain
    canon = json.dumps(
        {k: v for k, v in cfg.items() if k != "output_dir"},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def provenance(cfg: dict) -> dict:
    return {"config_sha256": config_hash(cfg), "master_seed": cfg["master_seed"]}


# deterministic per-stage seed offsets from the master seed
def _seed(cfg: dict, stage: str) -> int:
    offsets = {"train": 0, "rollout": 1_000, "explain": 2_000, "kmeans": 3_000, "evaluate": 500_000}
    return int(cfg["master_seed"]) + offsets[stage]


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise StageOrderError(f"missing artifact {path}; run the '{producer}' stage first")
    return path


def _load_original_policy(cfg: dict, out: Path) -> Policy:
    source = cfg["policy"]["source"]
    env = get_env(cfg["environment"])
    if source == "builtin-dqn":
        return load_policy(_require(out / "policy.json", "train"))
    if source == "file":
        path = cfg["policy"]["path"]
        if not path:
            raise ConfigError("policy.source is 'file' but policy.path is unset")
        return load_policy(path)
    command = cfg["policy"]["command"]
    if not command:
        raise ConfigError("policy.source is 'bridge' but policy.command is unset")
    return BridgedPolicy.launch(
        list(command), expected_features=env.feature_count, expected_actions=env.action_count
    )


def _close(policy: Policy) -> None:
    if isinstance(policy, BridgedPolicy):
        policy.close()


def stage_train(cfg: dict, out: Path) -> None:
    env = get_env(cfg["environment"])
    if cfg["policy"]["source"] != "builtin-dqn":
        print("train: policy source is external; nothing to train")
        return
    dqn_cfg = DqnConfig(seed=_seed(cfg, "train"), **cfg["policy"]["dqn"])
    result = dqn_train(env, dqn_cfg)
    save_policy(result.policy, out / "policy.json")
    doc = json.loads((out / "policy.json").read_text())
    doc["provenance"] = provenance(cfg)
    (out / "policy.json").write_text(json.dumps(doc, indent=2) + "\n")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "episode_return", "loss", "epsilon"])
    for row in result.log_rows:
        writer.writerow([row[0], repr(row[1]), repr(row[2]), repr(row[3])])
    (out / "train_log.csv").write_text(buf.getvalue())
    figures.plot_training_log(result.log_rows, out / "train_returns.png", title=env.name)
    print(f"train: wrote {out / 'policy.json'}")


def stage_rollout(cfg: dict, out: Path) -> None:
    env = get_env(cfg["environment"])
    policy = _load_original_policy(cfg, out)
    try:
        n_traj = int(cfg["explain"]["n_traj"])
        seed = _seed(cfg, "rollout")
        ds = shapley.build_dataset(env, policy, n_traj, seed)
        with open(out / "trajectories.jsonl", "w") as fh:
            for e in range(n_traj):
                fh.write(rollout(env, policy, seed + e).to_jsonl())
    finally:
        _close(policy)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(env.feature_names))
    for s in ds.states:
        writer.writerow([repr(float(x)) for x in s])
    (out / "dataset.csv").write_text(buf.getvalue())
    meta = {"provenance": provenance(cfg), **ds.meta}
    (out / "dataset.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"rollout: {len(ds)} states from {n_traj} trajectories -> {out / 'dataset.csv'}")


def _load_dataset(cfg: dict, out: Path) -> shapley.StateDataset:
    path = _require(out / "dataset.csv", "rollout")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    states = np.array([[float(x) for x in row] for row in rows[1:]])
    meta = {}
    if (out / "dataset.meta.json").exists():
        meta = json.loads((out / "dataset.meta.json").read_text())
    return shapley.StateDataset.from_states(states, meta)


def stage_explain(cfg: dict, out: Path) -> None:
    env = get_env(cfg["environment"])
    ds = _load_dataset(cfg, out)
    policy = _load_original_policy(cfg, out)
    try:
        ecfg = cfg["explain"]
        n_states = int(ecfg["n_states"])
        seed = _seed(cfg, "explain")
        rng = np.random.default_rng(seed)
        if n_states >= len(ds):
            chosen = ds.states
        else:
            chosen = ds.states[rng.choice(len(ds), size=n_states, replace=False)]
        store = shapley.explain_states(
            ds,
            policy,
            chosen,
            mode=ecfg["mode"],
            knn_k=int(ecfg["knn_k"]),
            permutations=int(ecfg["permutations"]),
            seed=seed,
        )
    finally:
        _close(policy)
    store.meta["provenance"] = provenance(cfg)
    store.to_csv(out / "records.csv", env.feature_names, out / "records.meta.json")
    print(f"explain: {len(store)} records -> {out / 'records.csv'}")


def stage_distill(cfg: dict, out: Path) -> None:
    env = get_env(cfg["environment"])
    store = shapley.RecordStore.from_csv(
        _require(out / "records.csv", "explain"), out / "records.meta.json"
    )
    dcfg = cfg["distill"]
    kmeans_seed = dcfg["kmeans_seed"]
    if kmeans_seed is None:
        kmeans_seed = _seed(cfg, "kmeans")
    config = DistillConfig(
        kmeans_seed=int(kmeans_seed),
        max_iters=int(dcfg["max_iters"]),
        tol=float(dcfg["tol"]),
        m_boundary=None if dcfg["m_boundary"] is None else int(dcfg["m_boundary"]),
    )
    result = run_distill(store, env.action_count, config, env.feature_names)
    report = {"provenance": provenance(cfg), **result.report(env.feature_names)}
    (out / "distill-report.json").write_text(json.dumps(report, indent=2) + "\n")
    save_policy(result.policy, out / "distilled-policy.json")
    figures.plot_shapley_clusters(store, result, out / "shapley_clusters.png", title=env.name)
    for formula in result.policy.formulas():
        print(f"distill: {formula}")
    print(f"distill: wrote {out / 'distill-report.json'}")


def stage_evaluate(cfg: dict, out: Path) -> None:
    env = get_env(cfg["environment"])
    distilled = load_policy(_require(out / "distilled-policy.json", "distill"))
    ds = _load_dataset(cfg, out)
    original = _load_original_policy(cfg, out)
    try:
        episodes = int(cfg["evaluate"]["episodes"])
        seed_base = cfg["evaluate"]["seed_base"]
        if seed_base is None:
            seed_base = _seed(cfg, "evaluate")
        stats = {
            "original": run_evaluate(env, original, episodes, int(seed_base)),
            "distilled": run_evaluate(env, distilled, episodes, int(seed_base)),
        }
        fid = fidelity(original, distilled, ds.states)
    finally:
        _close(original)
    distill_report = json.loads((out / "distill-report.json").read_text())
    export_report(
        stats, fid, distill_report, out / "eval.json", out / "eval.csv", provenance(cfg)
    )
    figures.plot_returns(stats, out / "returns.png", title=env.name)
    for pid in sorted(stats):
        st = stats[pid]
        print(f"evaluate: {pid}: mean={st.mean:.2f} std={st.std:.2f} min={st.min:.0f} max={st.max:.0f}")
    print(f"evaluate: fidelity={fid.rate:.4f} -> {out / 'eval.json'}")


STAGES = {
    "train": stage_train,
    "rollout": stage_rollout,
    "explain": stage_explain,
    "distill": stage_distill,
    "evaluate": stage_evaluate,
}


def run(subcommand: str, cfg: dict) -> None:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    if subcommand == "pipeline":
        for name in ("train", "rollout", "explain", "distill", "evaluate"):
            STAGES[name](cfg, out)
    else:
        STAGES[subcommand](cfg, out)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="shapdistill",
        description="Distill black-box RL policies into closed-form linear policies.",
    )
    parser.add_argument(
        "subcommand", choices=[*STAGES, "pipeline"], help="pipeline stage to run"
    )
    parser.add_argument("--config", required=True, help="YAML pipeline config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        run(args.subcommand, cfg)
    except ShapDistillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for err_type, code in EXIT_CODES.items():
            if isinstance(exc, err_type):
                return code
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
