"""Distillation of collected trajectories into task-conditioned policies."""

from distillab.distill.categorical import (
    ACTION_DIMS,
    SERIALIZED_COLUMNS,
    CategoricalARPolicy,
    CategoricalHead,
    categorical_loss_and_grads,
    log_softmax,
)
from distillab.distill.diffusion import (
    DiffusionPolicy,
    DiffusionSchedule,
    cosine_alpha_bar,
    diffusion_loss_and_grads,
    timestep_embedding,
)
from distillab.distill.discretize import DiscretizerSpec, discretize, undiscretize
from distillab.distill.evaluate import as_env_policy, evaluate, format_report, report_records
from distillab.distill.train import (
    DistillConfig,
    DistillError,
    TrainingDivergedError,
    dataset_rows,
    load_policy,
    make_policy,
    save_policy,
    train,
)

__all__ = [
    "ACTION_DIMS",
    "SERIALIZED_COLUMNS",
    "CategoricalARPolicy",
    "CategoricalHead",
    "DiffusionPolicy",
    "DiffusionSchedule",
    "DiscretizerSpec",
    "DistillConfig",
    "DistillError",
    "TrainingDivergedError",
    "as_env_policy",
    "categorical_loss_and_grads",
    "cosine_alpha_bar",
    "dataset_rows",
    "diffusion_loss_and_grads",
    "discretize",
    "evaluate",
    "format_report",
    "load_policy",
    "log_softmax",
    "make_policy",
    "report_records",
    "save_policy",
    "timestep_embedding",
    "train",
    "undiscretize",
]
