"""Adaptive-moment (Adam) parameter updates over flat parameter lists."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TrainingError(RuntimeError):
    """Raised when an update would poison parameters (NaN/inf gradients)."""


@dataclass
class AdamState:
    """Optimizer state for one ordered list of parameter arrays."""

    learning_rate: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], learning_rate: float = 3e-4, **kwargs) -> "AdamState":
        return cls(
            learning_rate=learning_rate,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,
        )

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        """Update ``params`` in place from matching ``grads``."""
        if len(params) != len(self.m):
            raise ValueError(f"optimizer tracks {len(self.m)} arrays, got {len(params)}")
        for i, g in enumerate(grads):
            if not np.all(np.isfinite(g)):
                raise TrainingError(
                    f"non-finite gradient in array {i} (shape {g.shape}): "
                    f"min={np.nanmin(g)}, max={np.nanmax(g)}"
                )
        self.step_count += 1
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= (self.learning_rate / bias1) * m / (np.sqrt(v / bias2) + self.eps)


def optimize_step(net, tape, opt: AdamState) -> None:
    """One Adam step on a DenseNet from its populated gradient tape."""
    opt.step(net.params(), tape.arrays())
