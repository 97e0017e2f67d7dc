"""Uniform action discretization for the autoregressive categorical head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DiscretizerSpec:
    """Uniform bins over a closed interval; out-of-range values clamp to the edge bins."""

    bins: int = 256
    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError(f"need at least 2 bins, got {self.bins}")
        if not self.high > self.low:
            raise ValueError(f"degenerate range [{self.low}, {self.high}]")

    @property
    def width(self) -> float:
        return (self.high - self.low) / self.bins


def discretize(values, spec: DiscretizerSpec) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=np.float64), spec.low, spec.high)
    idx = np.floor((v - spec.low) / spec.width).astype(np.int64)
    return np.clip(idx, 0, spec.bins - 1)


def undiscretize(indices, spec: DiscretizerSpec) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    return spec.low + (idx + 0.5) * spec.width
