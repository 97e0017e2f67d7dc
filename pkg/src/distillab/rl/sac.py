"""Soft actor-critic core: squashed Gaussian actor, twin critics, entropy tuning.

Gradients are derived by hand against the dense-net backward pass; every
loss function takes its sampling noise explicitly so the math is exactly
reproducible (and finite-difference checkable) for a fixed noise draw.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from distillab.nets import AdamState, DenseNet, TrainingError, optimize_step
from distillab.seeding import derive_rng

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6


def bounded_log_std(raw: np.ndarray) -> np.ndarray:
    """Smoothly map an unbounded head output into [LOG_STD_MIN, LOG_STD_MAX]."""
    return LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (np.tanh(raw) + 1.0)


def bounded_log_std_grad(raw: np.ndarray) -> np.ndarray:
    return 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (1.0 - np.tanh(raw) ** 2)


@dataclass
class ActorSample:
    mean: np.ndarray
    raw_std: np.ndarray
    log_std: np.ndarray
    pre_tanh: np.ndarray
    actions: np.ndarray
    log_prob: np.ndarray  # (N,)


def actor_forward(net: DenseNet, obs: np.ndarray, noise=None, eps: float = SQUASH_EPS) -> ActorSample:
    """Run the actor head; ``noise`` is the standard-normal draw (None = mean action)."""
    obs = np.asarray(obs)
    out = net.forward(obs).astype(np.float64)
    act_dim = out.shape[1] // 2
    mean, raw_std = out[:, :act_dim], out[:, act_dim:]
    log_std = bounded_log_std(raw_std)
    std = np.exp(log_std)
    if noise is None:
        u = mean.copy()
        z = np.zeros_like(mean)
    else:
        z = np.asarray(noise, dtype=np.float64)
        u = mean + std * z
    a = np.tanh(u)
    log_prob = np.sum(
        -0.5 * z**2 - log_std - 0.5 * math.log(2.0 * math.pi) - np.log(1.0 - a**2 + eps),
        axis=1,
    )
    return ActorSample(mean=mean, raw_std=raw_std, log_std=log_std, pre_tanh=u, actions=a, log_prob=log_prob)


def _critic_eval(net: DenseNet, obs: np.ndarray, actions: np.ndarray):
    """Q values and per-sample action gradients dQ_n/da_n."""
    dtype = net.weights[0].dtype
    x = np.concatenate([obs, actions], axis=1).astype(dtype)
    q = net.forward(x)[:, 0].astype(np.float64)
    tape = net.backward(np.ones((len(q), 1), dtype=dtype))
    g_a = tape.input_grad[:, obs.shape[1]:].astype(np.float64)
    return q, g_a


def min_over_critics(qs: np.ndarray, grads: np.ndarray):
    """Per-sample min and the action gradient routed through the argmin critic."""
    which = np.argmin(qs, axis=0)
    idx = np.arange(qs.shape[1])
    return qs[which, idx], grads[which, idx]


def actor_loss_and_grads(actor_net, critic_nets, obs, alpha, noise, eps=SQUASH_EPS):
    """Policy loss mean(alpha * log pi - min Q) and its actor tape.

    The critic nets are forwarded here, so call this after any critic
    update that relies on its own forward cache.
    """
    obs = np.asarray(obs)
    sample = actor_forward(actor_net, obs, noise=noise, eps=eps)
    qs, gs = [], []
    for c in critic_nets:
        q, g_a = _critic_eval(c, obs, sample.actions)
        qs.append(q)
        gs.append(g_a)
    min_q, g_a = min_over_critics(np.stack(qs), np.stack(gs))

    a = sample.actions
    u_minus_mean = sample.pre_tanh - sample.mean
    one_m_a2 = 1.0 - a**2
    squash = 2.0 * a * one_m_a2 / (one_m_a2 + eps)
    dlogpi_dmean = squash
    dlogpi_dlogstd = -1.0 + squash * u_minus_mean
    da_dmean = one_m_a2
    da_dlogstd = one_m_a2 * u_minus_mean

    n = len(obs)
    d_mean = (alpha * dlogpi_dmean - g_a * da_dmean) / n
    d_logstd = (alpha * dlogpi_dlogstd - g_a * da_dlogstd) / n
    d_raw = d_logstd * bounded_log_std_grad(sample.raw_std)
    upstream = np.concatenate([d_mean, d_raw], axis=1)
    tape = actor_net.backward(upstream.astype(actor_net.weights[0].dtype))

    loss = float(np.mean(alpha * sample.log_prob - min_q))
    aux = {
        "log_prob_mean": float(np.mean(sample.log_prob)),
        "min_q_mean": float(np.mean(min_q)),
        "action_abs_mean": float(np.mean(np.abs(a))),
    }
    return loss, tape, aux


def critic_targets(target_nets, actor_net, batch, alpha, discount, noise, eps=SQUASH_EPS, clip=None):
    """Bellman backup y = r + gamma * (1 - done) * (min Q_target - alpha * log pi).

    ``clip`` optionally clamps the backup into a known feasible return
    range; with sparse {0, 1} rewards and a single terminal success the
    true Q sits in [0, 1], and clamping keeps bootstrap extrapolation at
    out-of-distribution actions from inflating values.
    """
    nxt = actor_forward(actor_net, batch.next_observations, noise=noise, eps=eps)
    tqs = []
    for t in target_nets:
        dtype = t.weights[0].dtype
        x = np.concatenate([batch.next_observations, nxt.actions], axis=1).astype(dtype)
        tqs.append(t.forward(x)[:, 0].astype(np.float64))
    tq = np.min(np.stack(tqs), axis=0)
    r = np.asarray(batch.rewards, dtype=np.float64)
    done = np.asarray(batch.dones, dtype=np.float64)
    if getattr(batch, "discounts", None) is not None:
        discount = np.asarray(batch.discounts, dtype=np.float64)
    y = r + discount * (1.0 - done) * (tq - alpha * nxt.log_prob)
    if clip is not None:
        y = np.clip(y, clip[0], clip[1])
    return y


def critic_loss_and_grads(critic_nets, targets_y, batch):
    """Summed per-critic MSE against a fixed backup; returns (loss, tapes, aux)."""
    y = np.asarray(targets_y, dtype=np.float64)
    n = len(y)
    loss = 0.0
    tapes = []
    q_means = []
    for c in critic_nets:
        dtype = c.weights[0].dtype
        x = np.concatenate([batch.observations, batch.actions], axis=1).astype(dtype)
        q = c.forward(x)[:, 0].astype(np.float64)
        err = q - y
        loss += float(np.mean(err**2))
        tapes.append(c.backward((2.0 * err / n)[:, None].astype(dtype)))
        q_means.append(float(np.mean(q)))
    return loss, tapes, {"q_means": q_means, "target_mean": float(np.mean(y))}


def alpha_loss_and_grad(log_alpha: float, log_prob_mean: float, target_entropy: float):
    gap = log_prob_mean + target_entropy
    return -log_alpha * gap, -gap


def polyak_update(target_net: DenseNet, online_net: DenseNet, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    for tw, ow in zip(target_net.weights, online_net.weights):
        tw *= 1.0 - tau
        tw += tau * ow
    for tb, ob in zip(target_net.biases, online_net.biases):
        tb *= 1.0 - tau
        tb += tau * ob


@dataclass
class _ScalarAdam:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: float = 0.0
    v: float = 0.0

    def step(self, value: float, grad: float) -> float:
        self.step_count += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.step_count)
        v_hat = self.v / (1.0 - self.beta2**self.step_count)
        return value - self.learning_rate * m_hat / (math.sqrt(v_hat) + self.eps)


@dataclass
class SACAgent:
    actor: DenseNet
    critics: list
    targets: list
    actor_opt: AdamState
    critic_opts: list
    log_alpha: float
    alpha_opt: _ScalarAdam
    discount: float
    tau: float
    target_entropy: float
    fixed_alpha: float | None = None
    target_clip: tuple | None = None
    act_dim: int = field(default=0)

    @classmethod
    def create(
        cls,
        obs_dim: int,
        act_dim: int,
        hidden=(256, 256),
        seed: int = 0,
        actor_lr: float = 3e-4,
        critic_lr: float = 3e-4,
        alpha_lr: float = 3e-4,
        discount: float = 0.97,
        tau: float = 0.005,
        init_alpha: float = 0.1,
        fixed_alpha: float | None = None,
        n_critics: int = 2,
        target_entropy: float | None = None,
        target_clip: tuple | None = None,
        activations: str = "relu",
        critic_layer_norm: bool = True,
        dtype=np.float32,
    ) -> "SACAgent":
        rng = derive_rng(seed, "sac-init")
        actor = DenseNet.create((obs_dim, *hidden, 2 * act_dim), activations=activations, rng=rng, dtype=dtype)
        # layer-normed critics keep bootstrapped values from running away on
        # out-of-distribution actions; without this the demo-seeded value
        # bubble inflates to the clamp and the policy surfs the artifact
        critics = [
            DenseNet.create(
                (obs_dim + act_dim, *hidden, 1), activations=activations, rng=rng,
                dtype=dtype, layer_norm=critic_layer_norm,
            )
            for _ in range(n_critics)
        ]
        targets = [copy.deepcopy(c) for c in critics]
        return cls(
            actor=actor,
            critics=critics,
            targets=targets,
            actor_opt=AdamState.for_params(actor.params(), learning_rate=actor_lr),
            critic_opts=[AdamState.for_params(c.params(), learning_rate=critic_lr) for c in critics],
            log_alpha=math.log(init_alpha),
            alpha_opt=_ScalarAdam(learning_rate=alpha_lr),
            discount=discount,
            tau=tau,
            # entropy held near zero rather than the conventional -act_dim:
            # on narrow-success-ridge contact tasks, letting the policy go
            # near-deterministic floods the replay with jammed-contact data
            # and the value ridge washes out of the critics
            target_entropy=0.0 if target_entropy is None else target_entropy,
            fixed_alpha=fixed_alpha,
            target_clip=target_clip,
            act_dim=act_dim,
        )

    @property
    def alpha(self) -> float:
        if self.fixed_alpha is not None:
            return self.fixed_alpha
        return math.exp(self.log_alpha)

    def act(self, obs: np.ndarray, rng=None, deterministic: bool = False) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float32)[None]
        noise = None if deterministic else rng.standard_normal((1, self.act_dim))
        return actor_forward(self.actor, obs, noise=noise).actions[0]

    def critic_step(self, batch, rng: np.random.Generator) -> dict:
        """One clipped double-Q update plus a polyak target step."""
        next_noise = rng.standard_normal((len(batch), self.act_dim))
        y = critic_targets(
            self.targets, self.actor, batch, self.alpha, self.discount, next_noise,
            clip=self.target_clip,
        )
        critic_loss, tapes, aux = critic_loss_and_grads(self.critics, y, batch)
        if not math.isfinite(critic_loss):
            raise TrainingError(f"critic loss became non-finite: {critic_loss}, targets mean {aux['target_mean']}")
        for c, tape, opt in zip(self.critics, tapes, self.critic_opts):
            optimize_step(c, tape, opt)
        for t, c in zip(self.targets, self.critics):
            polyak_update(t, c, self.tau)
        return {
            "critic_loss": critic_loss,
            "q_mean": float(np.mean(aux["q_means"])),
            "target_mean": aux["target_mean"],
        }

    def actor_step(self, batch, rng: np.random.Generator) -> dict:
        """One policy update followed by the temperature update."""
        noise = rng.standard_normal((len(batch), self.act_dim))
        actor_loss, tape, aux = actor_loss_and_grads(
            self.actor, self.critics, batch.observations, self.alpha, noise
        )
        if not math.isfinite(actor_loss):
            raise TrainingError(
                f"actor loss became non-finite: {actor_loss}, log-prob mean {aux['log_prob_mean']}"
            )
        optimize_step(self.actor, tape, self.actor_opt)
        if self.fixed_alpha is None:
            _, grad = alpha_loss_and_grad(self.log_alpha, aux["log_prob_mean"], self.target_entropy)
            self.log_alpha = self.alpha_opt.step(self.log_alpha, grad)
        return {
            "actor_loss": actor_loss,
            "alpha": self.alpha,
            "entropy": -aux["log_prob_mean"],
            "min_q_mean": aux["min_q_mean"],
        }

    def update(self, batch, rng: np.random.Generator) -> dict:
        """Convenience single-batch step: critics, actor, temperature, polyak."""
        metrics = self.critic_step(batch, rng)
        metrics.update(self.actor_step(batch, rng))
        return metrics
