"""Central finite-difference oracle for verifying hand-written gradients."""

from __future__ import annotations

import numpy as np

from distillab.nets.dense import DenseNet, GradientTape


def finite_difference_grads(net: DenseNet, x: np.ndarray, upstream: np.ndarray, h: float = 1e-5) -> GradientTape:
    """Numerically differentiate loss = sum(forward(x) * upstream) per parameter.

    Perturbs every scalar parameter by +/- h and takes the central quotient.
    Meant for small double-precision nets; cost is two forward passes per
    parameter.
    """

    def loss() -> float:
        return float(np.sum(net.forward(x) * upstream))

    tape = net.zero_tape()
    for p, g in zip(net.params(), tape.arrays()):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            hi = loss()
            flat_p[i] = orig - h
            lo = loss()
            flat_p[i] = orig
            flat_g[i] = (hi - lo) / (2.0 * h)
    return tape


def max_relative_error(analytic, numeric, floor: float = 1e-6) -> float:
    """Worst elementwise |a - n| / max(|a|, |n|, floor).

    Accepts GradientTapes or bare arrays (or lists of arrays).
    """
    a_arrays = analytic.arrays() if isinstance(analytic, GradientTape) else analytic
    n_arrays = numeric.arrays() if isinstance(numeric, GradientTape) else numeric
    if isinstance(a_arrays, np.ndarray):
        a_arrays, n_arrays = [a_arrays], [n_arrays]
    worst = 0.0
    for a, n in zip(a_arrays, n_arrays):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
