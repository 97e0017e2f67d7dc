"""Dense feed-forward networks with hand-written reverse-mode gradients.

Everything downstream (actors, critics, classifiers, distillation heads)
is built from ``DenseNet``.  The forward pass caches layer inputs on the
net itself; ``backward`` consumes that cache, so a net is single-threaded
during an update.  Parameters and gradients are plain numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")

LN_EPS = 1e-5


class ShapeError(ValueError):
    """Input or gradient shape inconsistent with the network."""


def xavier_uniform(n_in: int, n_out: int, rng: np.random.Generator, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-bound, bound, size=(n_in, n_out)).astype(dtype)


@dataclass
class GradientTape:
    """Per-parameter gradient buffers mirroring a DenseNet's shapes.

    ``input_grad`` carries the loss gradient w.r.t. the network input; the
    actor update and composite heads need it to chain through sub-networks.
    """

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    input_grad: np.ndarray | None = None
    ln_gain_grads: list[np.ndarray] = field(default_factory=list)
    ln_bias_grads: list[np.ndarray] = field(default_factory=list)

    def arrays(self) -> list[np.ndarray]:
        # order must mirror DenseNet.params()
        out = []
        for w, b in zip(self.weight_grads, self.bias_grads):
            out.append(w)
            out.append(b)
        for g, b in zip(self.ln_gain_grads, self.ln_bias_grads):
            out.append(g)
            out.append(b)
        return out

    def scale(self, factor: float) -> "GradientTape":
        for g in self.arrays():
            g *= factor
        if self.input_grad is not None:
            self.input_grad *= factor
        return self

    def add(self, other: "GradientTape") -> "GradientTape":
        for mine, theirs in zip(self.arrays(), other.arrays()):
            mine += theirs
        return self


@dataclass
class DenseNet:
    """MLP with per-layer activation in {tanh, relu, identity}.

    ``widths`` lists layer sizes input-first, e.g. ``[8, 16, 4]`` is an
    8-in 4-out net with one 16-unit hidden layer.  ``activations`` has one
    entry per weight layer (``len(widths) - 1``).

    With ``layer_norm`` every hidden layer normalizes its pre-activation
    across features (learned gain/bias) before the nonlinearity; the output
    layer is never normalized.  This bounds value extrapolation far outside
    the training data, which plain relu stacks do not.
    """

    widths: list[int]
    activations: list[str]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    ln_gains: list[np.ndarray] = field(default_factory=list)
    ln_biases: list[np.ndarray] = field(default_factory=list)
    _cache: list[np.ndarray] | None = field(default=None, repr=False)
    _pre_acts: list[np.ndarray] | None = field(default=None, repr=False)
    _ln_xhat: list | None = field(default=None, repr=False)
    _ln_inv_std: list | None = field(default=None, repr=False)

    @classmethod
    def create(
        cls,
        widths: list[int],
        activations: list[str] | str = "tanh",
        rng: np.random.Generator | None = None,
        dtype=np.float32,
        final_activation: str | None = None,
        layer_norm: bool = False,
    ) -> "DenseNet":
        """Xavier-uniform weights, zero biases.

        A single activation string applies to every hidden layer with an
        identity output layer unless ``final_activation`` overrides it.
        """
        if len(widths) < 2:
            raise ShapeError("need at least an input and an output width")
        n_layers = len(widths) - 1
        if isinstance(activations, str):
            acts = [activations] * (n_layers - 1) + [final_activation or "identity"]
        else:
            acts = list(activations)
        if len(acts) != n_layers:
            raise ShapeError(f"expected {n_layers} activations, got {len(acts)}")
        for a in acts:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        rng = rng or np.random.default_rng(0)
        weights = [xavier_uniform(widths[i], widths[i + 1], rng, dtype) for i in range(n_layers)]
        biases = [np.zeros(widths[i + 1], dtype=dtype) for i in range(n_layers)]
        gains, ln_biases = [], []
        if layer_norm:
            gains = [np.ones(widths[i + 1], dtype=dtype) for i in range(n_layers - 1)]
            ln_biases = [np.zeros(widths[i + 1], dtype=dtype) for i in range(n_layers - 1)]
        return cls(list(widths), acts, weights, biases, gains, ln_biases)

    @property
    def dtype(self):
        return self.weights[0].dtype

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        for g, b in zip(self.ln_gains, self.ln_biases):
            out.append(g)
            out.append(b)
        return out

    def copy(self) -> "DenseNet":
        return DenseNet(
            list(self.widths),
            list(self.activations),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            [g.copy() for g in self.ln_gains],
            [b.copy() for b in self.ln_biases],
        )

    def copy_params_from(self, other: "DenseNet") -> None:
        for mine, theirs in zip(self.params(), other.params()):
            mine[...] = theirs

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Run the net; caches intermediates for ``backward``.

        Accepts a single feature vector or a (batch, features) matrix and
        returns the matching shape.
        """
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.shape[1] != self.widths[0]:
            raise ShapeError(f"input has {x.shape[1]} features, net expects {self.widths[0]}")
        cache = [x]
        pre_acts = []
        ln_xhat: list = []
        ln_inv_std: list = []
        h = x
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            z = h @ w + b
            if i < len(self.ln_gains):
                mu = z.mean(axis=1, keepdims=True)
                centered = z - mu
                inv_std = 1.0 / np.sqrt((centered**2).mean(axis=1, keepdims=True) + LN_EPS)
                xhat = centered * inv_std
                z = self.ln_gains[i] * xhat + self.ln_biases[i]
                ln_xhat.append(xhat)
                ln_inv_std.append(inv_std)
            else:
                ln_xhat.append(None)
                ln_inv_std.append(None)
            pre_acts.append(z)
            if act == "tanh":
                h = np.tanh(z)
            elif act == "relu":
                h = np.maximum(z, 0.0)
            else:
                h = z
            cache.append(h)
        self._cache = cache
        self._pre_acts = pre_acts
        self._ln_xhat = ln_xhat
        self._ln_inv_std = ln_inv_std
        return cache[-1][0] if squeeze else cache[-1]

    def backward(self, upstream_grad: np.ndarray) -> GradientTape:
        """Backprop ``dL/d(output)`` to parameter and input gradients.

        Requires a preceding ``forward`` on the same net; the cached
        activations from that call define the linearization point.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        g = np.asarray(upstream_grad, dtype=self.dtype)
        if g.ndim == 1:
            g = g[None, :]
        if g.shape != self._cache[-1].shape:
            raise ShapeError(
                f"upstream grad shape {g.shape} does not match output {self._cache[-1].shape}"
            )
        weight_grads: list[np.ndarray] = [None] * len(self.weights)  # type: ignore[list-item]
        bias_grads: list[np.ndarray] = [None] * len(self.biases)  # type: ignore[list-item]
        gain_grads: list[np.ndarray] = [None] * len(self.ln_gains)  # type: ignore[list-item]
        ln_bias_grads: list[np.ndarray] = [None] * len(self.ln_biases)  # type: ignore[list-item]
        for i in reversed(range(len(self.weights))):
            act = self.activations[i]
            if act == "tanh":
                g = g * (1.0 - self._cache[i + 1] ** 2)
            elif act == "relu":
                g = g * (self._pre_acts[i] > 0)
            if i < len(self.ln_gains):
                xhat = self._ln_xhat[i]
                gain_grads[i] = (g * xhat).sum(axis=0)
                ln_bias_grads[i] = g.sum(axis=0)
                dxhat = g * self.ln_gains[i]
                g = self._ln_inv_std[i] * (
                    dxhat
                    - dxhat.mean(axis=1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
                )
            weight_grads[i] = self._cache[i].T @ g
            bias_grads[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return GradientTape(weight_grads, bias_grads, input_grad=g,
                            ln_gain_grads=gain_grads, ln_bias_grads=ln_bias_grads)

    def zero_tape(self) -> GradientTape:
        return GradientTape(
            [np.zeros_like(w) for w in self.weights],
            [np.zeros_like(b) for b in self.biases],
            ln_gain_grads=[np.zeros_like(g) for g in self.ln_gains],
            ln_bias_grads=[np.zeros_like(b) for b in self.ln_biases],
        )
