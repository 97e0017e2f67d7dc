"""Supervised distillation of trajectory datasets into generalist policies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from distillab.distill.categorical import (
    SERIALIZED_COLUMNS,
    CategoricalARPolicy,
    CategoricalHead,
    categorical_loss_and_grads,
)
from distillab.distill.diffusion import DiffusionPolicy, DiffusionSchedule, diffusion_loss_and_grads
from distillab.distill.discretize import DiscretizerSpec, discretize
from distillab.envs.scenes import VARIANT_IDS
from distillab.nets.checkpoint import load_arrays, net_from_arrays, net_to_arrays, save_arrays
from distillab.nets.optim import AdamState, TrainingError
from distillab.seeding import derive_rng

HEAD_KINDS = ("categorical", "diffusion")


class DistillError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite; training state is not worth keeping."""


@dataclass(frozen=True)
class DistillConfig:
    head: str = "categorical"
    epochs: int = 30
    batch_size: int = 256
    learning_rate: float = 1e-3
    val_split: float = 0.1
    hidden: tuple = (128, 128)
    emb_dim: int = 8
    bins: int = 256
    diffusion_steps: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.head not in HEAD_KINDS:
            raise DistillError(f"unknown head {self.head!r}, expected one of {HEAD_KINDS}")
        if not 0.0 < self.val_split < 1.0:
            raise DistillError(f"val_split must lie in (0, 1), got {self.val_split}")
        if self.epochs < 1 or self.batch_size < 1:
            raise DistillError("epochs and batch_size must be positive")


def dataset_rows(dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten episodes into (observations, native 5-dim actions, task ids)."""
    episodes = dataset.episodes
    if not episodes:
        raise DistillError("cannot distill from an empty dataset")
    obs = np.concatenate([ep.observations[:-1] for ep in episodes]).astype(np.float32)
    acts = np.concatenate([ep.actions[:, SERIALIZED_COLUMNS] for ep in episodes]).astype(np.float64)
    tasks = np.concatenate([np.full(ep.duration_steps, ep.task_id, dtype=np.int64) for ep in episodes])
    return obs, acts, tasks


def make_policy(config: DistillConfig, obs_dim: int, n_tasks: int = len(VARIANT_IDS)):
    if config.head == "categorical":
        return CategoricalARPolicy.create(
            obs_dim, n_tasks, spec=DiscretizerSpec(bins=config.bins),
            hidden=config.hidden, emb_dim=config.emb_dim, seed=config.seed,
        )
    return DiffusionPolicy.create(
        obs_dim, n_tasks, hidden=config.hidden, emb_dim=config.emb_dim,
        steps=config.diffusion_steps, seed=config.seed,
    )


def train(dataset, config: DistillConfig):
    """Minimize the configured behavior-cloning loss; keep the best-validation weights.

    Returns (policy, report); report carries per-epoch train/val losses.
    """
    obs, acts, tasks = dataset_rows(dataset)
    n_rows = len(obs)
    rng = derive_rng(config.seed, "distill")
    perm = rng.permutation(n_rows)
    n_val = max(1, int(round(config.val_split * n_rows)))
    if n_val >= n_rows:
        raise DistillError(f"validation split {config.val_split} leaves no training rows of {n_rows}")
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    policy = make_policy(config, obs_dim=obs.shape[1])
    params = policy.params()
    opt = AdamState.for_params(params, learning_rate=config.learning_rate)

    if config.head == "categorical":
        bins = discretize(acts, policy.spec)

        def batch_loss(idx, update_rng):
            return categorical_loss_and_grads(policy, obs[idx], tasks[idx], bins[idx])

        def val_loss():
            total = 0.0
            for chunk in np.array_split(val_idx, max(1, len(val_idx) // 1024)):
                loss, _, _ = categorical_loss_and_grads(policy, obs[chunk], tasks[chunk], bins[chunk])
                total += loss * len(chunk)
            return total / len(val_idx)
    else:
        # fixed noise draws make validation losses comparable across epochs
        val_rng = derive_rng(config.seed, "distill", "val-noise")
        val_t = val_rng.integers(1, policy.schedule.steps + 1, size=len(val_idx))
        val_eps = val_rng.standard_normal((len(val_idx), policy.act_dims))

        def batch_loss(idx, update_rng):
            return diffusion_loss_and_grads(policy, obs[idx], tasks[idx], acts[idx], update_rng)

        def val_loss():
            loss, _, _ = diffusion_loss_and_grads(
                policy, obs[val_idx], tasks[val_idx], acts[val_idx], None, t=val_t, eps=val_eps,
            )
            return loss

    curves = []
    best = (float("inf"), -1, None)
    for epoch in range(config.epochs):
        epoch_rng = derive_rng(config.seed, "distill", "epoch", epoch)
        order = epoch_rng.permutation(train_idx)
        losses = []
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads, _ = batch_loss(idx, epoch_rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
            try:
                opt.step(params, grads)
            except TrainingError as exc:
                raise TrainingDivergedError(str(exc)) from exc
            losses.append(loss)
        v = val_loss()
        curves.append({"epoch": epoch, "train_loss": float(np.mean(losses)), "val_loss": float(v)})
        if v < best[0]:
            best = (v, epoch, [p.copy() for p in params])

    for p, snap in zip(params, best[2]):
        p[...] = snap
    report = {
        "head": config.head,
        "rows": n_rows,
        "best_epoch": best[1],
        "best_val_loss": float(best[0]),
        "curves": curves,
    }
    return policy, report


# -- trained-policy checkpoints ------------------------------------------


def save_policy(policy, path, extra_meta: dict | None = None) -> None:
    if isinstance(policy, CategoricalARPolicy):
        trunk_spec, arrays = net_to_arrays(policy.trunk, "trunk")
        meta = {
            "kind": "distilled_policy",
            "head": "categorical",
            "trunk": trunk_spec,
            "obs_dim": policy.obs_dim,
            "spec": {"bins": policy.spec.bins, "low": policy.spec.low, "high": policy.spec.high},
            "act_dims": policy.act_dims,
            "extra": extra_meta or {},
        }
        for d, head in enumerate(policy.heads):
            arrays[f"head{d}.w"] = head.w_trunk
            arrays[f"head{d}.b"] = head.bias
            for j, slab in enumerate(head.ctx):
                arrays[f"head{d}.ctx{j}"] = slab
    elif isinstance(policy, DiffusionPolicy):
        den_spec, arrays = net_to_arrays(policy.denoiser, "denoiser")
        meta = {
            "kind": "distilled_policy",
            "head": "diffusion",
            "denoiser": den_spec,
            "obs_dim": policy.obs_dim,
            "act_dims": policy.act_dims,
            "range": [policy.low, policy.high],
            "steps": policy.schedule.steps,
            "extra": extra_meta or {},
        }
        arrays["alpha_bar"] = policy.schedule.alpha_bar
        arrays["betas"] = policy.schedule.betas
    else:
        raise DistillError(f"not a distilled policy: {type(policy)!r}")
    arrays["task_table"] = policy.task_table
    save_arrays(path, meta, arrays)


def load_policy(path):
    meta, arrays = load_arrays(path)
    if meta.get("kind") != "distilled_policy":
        raise DistillError(f"{path}: not a distilled policy checkpoint")
    if meta["head"] == "categorical":
        spec = DiscretizerSpec(**meta["spec"])
        heads = []
        for d in range(meta["act_dims"]):
            heads.append(
                CategoricalHead(
                    w_trunk=arrays[f"head{d}.w"],
                    bias=arrays[f"head{d}.b"],
                    ctx=[arrays[f"head{d}.ctx{j}"] for j in range(d)],
                )
            )
        return CategoricalARPolicy(
            trunk=net_from_arrays(meta["trunk"], arrays, "trunk"),
            heads=heads,
            task_table=arrays["task_table"],
            spec=spec,
            obs_dim=meta["obs_dim"],
        )
    schedule = DiffusionSchedule(steps=meta["steps"], alpha_bar=arrays["alpha_bar"], betas=arrays["betas"])
    low, high = meta["range"]
    return DiffusionPolicy(
        denoiser=net_from_arrays(meta["denoiser"], arrays, "denoiser"),
        schedule=schedule,
        task_table=arrays["task_table"],
        obs_dim=meta["obs_dim"],
        act_dims=meta["act_dims"],
        low=low,
        high=high,
    )
