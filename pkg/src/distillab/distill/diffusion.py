"""DDPM action head: cosine noise schedule, epsilon-prediction, ancestral sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from distillab.nets.dense import DenseNet
from distillab.seeding import derive_rng

TIME_EMB_DIM = 8


def cosine_alpha_bar(steps: int, s: float = 0.008) -> np.ndarray:
    """Cumulative signal fractions for t = 0..steps; strictly decreasing from 1."""
    t = np.arange(steps + 1, dtype=np.float64)
    f = np.cos(((t / steps + s) / (1.0 + s)) * math.pi / 2.0) ** 2
    return f / f[0]


@dataclass(frozen=True)
class DiffusionSchedule:
    steps: int
    alpha_bar: np.ndarray  # (steps + 1,), alpha_bar[0] = 1
    betas: np.ndarray  # (steps + 1,), betas[0] unused

    @classmethod
    def cosine(cls, steps: int = 50, s: float = 0.008) -> "DiffusionSchedule":
        ab = cosine_alpha_bar(steps, s)
        betas = np.zeros(steps + 1)
        betas[1:] = np.clip(1.0 - ab[1:] / ab[:-1], 0.0, 0.999)
        return cls(steps=steps, alpha_bar=ab, betas=betas)


def timestep_embedding(t: np.ndarray, steps: int, dim: int = TIME_EMB_DIM) -> np.ndarray:
    """Sinusoidal features of t/steps at geometrically spaced frequencies."""
    half = dim // 2
    freqs = np.exp(np.arange(half) * (-math.log(1000.0) / max(half - 1, 1)))
    angles = (np.asarray(t, dtype=np.float64)[:, None] / steps) * freqs[None, :] * 2.0 * math.pi
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


@dataclass
class DiffusionPolicy:
    denoiser: DenseNet  # input (noised action, t embedding, obs, task emb) -> epsilon-hat
    schedule: DiffusionSchedule
    task_table: np.ndarray  # zero-init so unseen ids stay neutral
    obs_dim: int
    act_dims: int
    low: float = -1.0
    high: float = 1.0

    @classmethod
    def create(
        cls,
        obs_dim: int,
        n_tasks: int,
        act_dims: int = 5,
        hidden=(128, 128),
        emb_dim: int = 8,
        steps: int = 50,
        seed: int = 0,
        dtype=np.float32,
    ) -> "DiffusionPolicy":
        rng = derive_rng(seed, "diffusion-init")
        denoiser = DenseNet.create(
            (act_dims + TIME_EMB_DIM + obs_dim + emb_dim, *hidden, act_dims),
            activations="relu", rng=rng, dtype=dtype,
        )
        return cls(
            denoiser=denoiser,
            schedule=DiffusionSchedule.cosine(steps),
            task_table=np.zeros((n_tasks, emb_dim), dtype=dtype),
            obs_dim=obs_dim,
            act_dims=act_dims,
        )

    @property
    def emb_dim(self) -> int:
        return self.task_table.shape[1]

    def params(self) -> list:
        return self.denoiser.params() + [self.task_table]

    def denoiser_input(self, noised, t, obs, task_ids) -> np.ndarray:
        temb = timestep_embedding(t, self.schedule.steps)
        emb = self.task_table[np.asarray(task_ids, dtype=np.int64)]
        x = np.concatenate([np.atleast_2d(noised), temb, np.atleast_2d(obs), np.atleast_2d(emb)], axis=1)
        return x.astype(self.denoiser.weights[0].dtype)

    def predict_noise(self, noised, t, obs, task_ids) -> np.ndarray:
        return self.denoiser.forward(self.denoiser_input(noised, t, obs, task_ids)).astype(np.float64)

    def sample(self, obs: np.ndarray, task_id: int, rng: np.random.Generator) -> np.ndarray:
        """Ancestral sampling from pure noise down to t=1; result clipped to range."""
        sched = self.schedule
        obs = np.atleast_2d(obs)
        x = rng.standard_normal((1, self.act_dims))
        for t in range(sched.steps, 0, -1):
            eps_hat = self.predict_noise(x, np.array([t]), obs, np.array([task_id]))
            ab_t, ab_prev = sched.alpha_bar[t], sched.alpha_bar[t - 1]
            beta = sched.betas[t]
            x = (x - beta / math.sqrt(1.0 - ab_t) * eps_hat) / math.sqrt(1.0 - beta)
            if t > 1:
                sigma = math.sqrt(beta * (1.0 - ab_prev) / (1.0 - ab_t))
                x = x + sigma * rng.standard_normal(x.shape)
        return np.clip(x[0], self.low, self.high)


def diffusion_loss_and_grads(policy: DiffusionPolicy, obs, task_ids, actions, rng: np.random.Generator,
                             t=None, eps=None):
    """Standard epsilon-prediction objective: noise the action, regress the noise.

    Loss is the batch mean of the summed squared error over action dims, so
    an all-zero denoiser scores approximately act_dims. ``t`` and ``eps``
    override the random draws (fixed validation batches, schedule tests).
    """
    actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
    n = len(actions)
    task_ids = np.asarray(task_ids, dtype=np.int64)
    if t is None:
        t = rng.integers(1, policy.schedule.steps + 1, size=n)
    if eps is None:
        eps = rng.standard_normal(actions.shape)
    ab = policy.schedule.alpha_bar[t][:, None]
    noised = np.sqrt(ab) * actions + np.sqrt(1.0 - ab) * eps

    x = policy.denoiser_input(noised, t, obs, task_ids)
    eps_hat = policy.denoiser.forward(x).astype(np.float64)
    err = eps_hat - eps
    loss = float(np.mean(np.sum(err**2, axis=1)))

    upstream = (2.0 * err / n).astype(policy.denoiser.weights[0].dtype)
    tape = policy.denoiser.backward(upstream)
    table_grad = np.zeros_like(policy.task_table)
    emb_offset = policy.act_dims + TIME_EMB_DIM + policy.obs_dim
    np.add.at(table_grad, task_ids, tape.input_grad[:, emb_offset:])

    grads = tape.arrays() + [table_grad]
    return loss, grads, {"mse_per_dim": loss / policy.act_dims}
