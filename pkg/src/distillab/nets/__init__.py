"""From-scratch dense networks: forward/backward passes, Adam, checkpoints."""

from distillab.nets.dense import DenseNet, GradientTape, ShapeError
from distillab.nets.gradcheck import finite_difference_grads, max_relative_error
from distillab.nets.optim import AdamState, TrainingError, optimize_step
from distillab.nets.checkpoint import (
    CheckpointError,
    CorruptCheckpointError,
    VersionError,
    load_arrays,
    load_checkpoint,
    save_arrays,
    save_checkpoint,
)

__all__ = [
    "AdamState",
    "CheckpointError",
    "CorruptCheckpointError",
    "DenseNet",
    "GradientTape",
    "ShapeError",
    "TrainingError",
    "VersionError",
    "finite_difference_grads",
    "max_relative_error",
    "load_arrays",
    "load_checkpoint",
    "optimize_step",
    "save_arrays",
    "save_checkpoint",
]
