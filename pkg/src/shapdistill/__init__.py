"""shapdistill: turn black-box RL policies into closed-form linear policies.

The pipeline explains a policy with on-manifold Shapley values, clusters the
Shapley vectors by action, locates the records most equidistant between
cluster centroids, maps them back to their originating states, and fits an
oriented hyperplane per action pair; the resulting interpretable policy is
evaluated against the original for return and fidelity.
"""

from .distill import DistillConfig, DistillResult, distill, fit_hyperplane, kmeans
from .dqn import DqnConfig, dqn_train
from .envs import CARTPOLE, MOUNTAINCAR, EnvSpec, get_env, reset, rollout
from .evaluate import EvalStats, FidelityReport, evaluate, fidelity
from .policies import (
    Hyperplane,
    InterpretablePolicy,
    MlpPolicy,
    Policy,
    load_policy,
    save_policy,
)
from .shapley import (
    Explainer,
    RecordStore,
    ShapleyRecord,
    StateDataset,
    build_dataset,
    explain_states,
    shapley_exact,
    shapley_sampled,
)

__all__ = [
    "CARTPOLE",
    "MOUNTAINCAR",
    "DistillConfig",
    "DistillResult",
    "DqnConfig",
    "EnvSpec",
    "EvalStats",
    "Explainer",
    "FidelityReport",
    "Hyperplane",
    "InterpretablePolicy",
    "MlpPolicy",
    "Policy",
    "RecordStore",
    "ShapleyRecord",
    "StateDataset",
    "build_dataset",
    "distill",
    "dqn_train",
    "evaluate",
    "explain_states",
    "fidelity",
    "fit_hyperplane",
    "get_env",
    "kmeans",
    "load_policy",
    "reset",
    "rollout",
    "save_policy",
    "shapley_exact",
    "shapley_sampled",
]

__version__ = "0.1.0"
