"""Autoregressive categorical action head over discretized action bins.

A shared trunk embeds (observation, task embedding); one classification
head per action dimension consumes the trunk features plus the bins of
all previously decoded dimensions. The context enters each head as a
one-hot block, which the implementation realizes as a row gather on the
corresponding weight slab; the math is identical to concatenating
one-hots but costs O(batch * bins) instead of a dense matmul, and no
gradient flows into the (data-given) context during teacher forcing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from distillab.distill.discretize import DiscretizerSpec, undiscretize
from distillab.nets.dense import DenseNet, xavier_uniform
from distillab.seeding import derive_rng

# decoding order of the native action channels
ACTION_DIMS = ("dx", "dy", "dz", "dyaw", "gripper")
# columns of the stored 7-float action rows that carry those channels
SERIALIZED_COLUMNS = (0, 1, 2, 5, 6)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@dataclass
class CategoricalHead:
    """Affine map from trunk features plus gathered context rows to bin logits."""

    w_trunk: np.ndarray  # (trunk_dim, bins)
    bias: np.ndarray  # (bins,)
    ctx: list = field(default_factory=list)  # one (bins, bins) slab per previous dim

    def logits(self, trunk_out: np.ndarray, prev_bins: np.ndarray) -> np.ndarray:
        out = trunk_out @ self.w_trunk + self.bias
        for j, slab in enumerate(self.ctx):
            out = out + slab[prev_bins[:, j]]
        return out

    def params(self) -> list:
        return [self.w_trunk, self.bias, *self.ctx]


@dataclass
class CategoricalARPolicy:
    trunk: DenseNet
    heads: list  # one CategoricalHead per action dim
    task_table: np.ndarray  # (n_tasks, emb_dim), zero-init so unseen ids stay neutral
    spec: DiscretizerSpec
    obs_dim: int

    @classmethod
    def create(
        cls,
        obs_dim: int,
        n_tasks: int,
        act_dims: int = len(ACTION_DIMS),
        spec: DiscretizerSpec | None = None,
        hidden=(128, 128),
        emb_dim: int = 8,
        seed: int = 0,
        dtype=np.float32,
    ) -> "CategoricalARPolicy":
        spec = spec or DiscretizerSpec()
        rng = derive_rng(seed, "categorical-init")
        trunk = DenseNet.create(
            (obs_dim + emb_dim, *hidden), activations="relu",
            final_activation="relu", rng=rng, dtype=dtype,
        )
        trunk_dim = hidden[-1]
        heads = [
            CategoricalHead(
                w_trunk=xavier_uniform(trunk_dim, spec.bins, rng, dtype),
                bias=np.zeros(spec.bins, dtype=dtype),
                ctx=[np.zeros((spec.bins, spec.bins), dtype=dtype) for _ in range(d)],
            )
            for d in range(act_dims)
        ]
        table = np.zeros((n_tasks, emb_dim), dtype=dtype)
        return cls(trunk=trunk, heads=heads, task_table=table, spec=spec, obs_dim=obs_dim)

    @property
    def act_dims(self) -> int:
        return len(self.heads)

    @property
    def emb_dim(self) -> int:
        return self.task_table.shape[1]

    def params(self) -> list:
        out = self.trunk.params()
        for head in self.heads:
            out.extend(head.params())
        out.append(self.task_table)
        return out

    def trunk_input(self, obs: np.ndarray, task_ids: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(obs)
        emb = self.task_table[np.asarray(task_ids, dtype=np.int64)]
        return np.concatenate([obs, np.atleast_2d(emb)], axis=1).astype(self.trunk.weights[0].dtype)

    def head_log_probs(self, obs: np.ndarray, task_ids: np.ndarray, bins: np.ndarray) -> list:
        """Teacher-forced per-dimension log-probabilities (list of (N, bins))."""
        trunk_out = self.trunk.forward(self.trunk_input(obs, task_ids))
        return [log_softmax(h.logits(trunk_out, bins[:, :d])) for d, h in enumerate(self.heads)]

    def sample_bins(self, obs: np.ndarray, task_id: int, rng=None, temperature: float = 0.0) -> np.ndarray:
        """Decode one action dim by dim; temperature 0 is greedy and deterministic."""
        trunk_out = self.trunk.forward(self.trunk_input(obs, np.array([task_id])))
        bins = np.zeros((1, self.act_dims), dtype=np.int64)
        for d, head in enumerate(self.heads):
            logits = head.logits(trunk_out, bins[:, :d])[0].astype(np.float64)
            if temperature > 0.0 and rng is not None:
                p = np.exp(log_softmax((logits / temperature)[None, :])[0])
                bins[0, d] = rng.choice(self.spec.bins, p=p / p.sum())
            else:
                bins[0, d] = int(np.argmax(logits))
        return bins[0]

    def sample(self, obs: np.ndarray, task_id: int, rng=None, temperature: float = 0.0) -> np.ndarray:
        return undiscretize(self.sample_bins(obs, task_id, rng, temperature), self.spec)


def categorical_loss_and_grads(policy: CategoricalARPolicy, obs, task_ids, bins):
    """Mean over samples of the summed per-dim cross-entropies, plus gradients.

    Gradient list lines up with ``policy.params()``.
    """
    n = len(bins)
    task_ids = np.asarray(task_ids, dtype=np.int64)
    x = policy.trunk_input(obs, task_ids)
    trunk_out = policy.trunk.forward(x)
    dtype = trunk_out.dtype

    loss = 0.0
    d_trunk_out = np.zeros_like(trunk_out)
    head_grads: list[np.ndarray] = []
    per_dim_nll = []
    for d, head in enumerate(policy.heads):
        context = bins[:, :d]
        logp = log_softmax(head.logits(trunk_out, context).astype(np.float64))
        picked = logp[np.arange(n), bins[:, d]]
        per_dim_nll.append(float(-picked.mean()))
        loss -= float(picked.sum())
        dlogits = np.exp(logp)
        dlogits[np.arange(n), bins[:, d]] -= 1.0
        dlogits = (dlogits / n).astype(dtype)
        head_grads.append(trunk_out.T @ dlogits)
        head_grads.append(dlogits.sum(axis=0))
        for j in range(d):
            slab_grad = np.zeros_like(head.ctx[j])
            np.add.at(slab_grad, context[:, j], dlogits)
            head_grads.append(slab_grad)
        d_trunk_out += dlogits @ head.w_trunk.T
    loss /= n

    tape = policy.trunk.backward(d_trunk_out)
    table_grad = np.zeros_like(policy.task_table)
    np.add.at(table_grad, task_ids, tape.input_grad[:, policy.obs_dim:])

    grads = tape.arrays() + head_grads + [table_grad]
    aux = {"per_dim_nll": per_dim_nll}
    return loss, grads, aux
