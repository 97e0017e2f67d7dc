"""Seeded evaluation of distilled policies on simulated scenes."""

from __future__ import annotations

import numpy as np

from distillab.collect.episodes import run_episode
from distillab.distill.categorical import ACTION_DIMS, CategoricalARPolicy
from distillab.envs.env import Action, ManipulationEnv
from distillab.envs.features import build_observation
from distillab.seeding import derive_rng, derive_seed

assert len(ACTION_DIMS) == 5


def as_env_policy(policy, seed: int = 0, temperature: float = 0.0, action_repeat: int = 1):
    """Adapt a distilled policy to the ``policy(env) -> Action`` interface.

    ``action_repeat`` holds each sampled action for that many control ticks,
    which trades reaction speed for fewer (slow) sampling passes.
    """
    rng = derive_rng(seed, "policy-sample")
    held = {"vec": None}

    def policy_fn(env) -> Action:
        if held["vec"] is None or env.state.step_index % action_repeat == 0:
            obs = build_observation(env.state, env.scene)
            if isinstance(policy, CategoricalARPolicy):
                vec = policy.sample(obs.features, obs.task_id, temperature=temperature, rng=rng)
            else:
                vec = policy.sample(obs.features, obs.task_id, rng)
            held["vec"] = np.asarray(vec, dtype=np.float64)
        v = held["vec"]
        return Action(delta=v[:4].copy(), gripper=1 if v[4] > 0.0 else 0)

    return policy_fn


def evaluate(
    policy,
    env_configs,
    n_per_variant: int,
    seed: int = 0,
    temperature: float = 0.0,
    action_repeat: int = 1,
) -> dict:
    """Run ``n_per_variant`` seeded episodes on each scene configuration.

    Episode seeds depend only on (seed, variant, index), never on the policy,
    so two policies evaluated with the same seed face identical scene draws.
    Returns per-variant and pooled success statistics.
    """
    if n_per_variant < 1:
        raise ValueError("n_per_variant must be positive")
    per_variant = {}
    pooled_success = 0
    pooled_trials = 0
    pooled_cycle = []
    for cfg in env_configs:
        env = ManipulationEnv(cfg)
        fn = as_env_policy(
            policy,
            seed=derive_seed(seed, "sampler", cfg.variant_id),
            temperature=temperature,
            action_repeat=action_repeat,
        )
        successes = 0
        cycle_times = []
        for i in range(n_per_variant):
            ep = run_episode(env, derive_seed(seed, "eval-scene", cfg.variant_id, i), fn, "eval")
            if ep.success:
                successes += 1
                cycle_times.append(ep.cycle_time_s)
        block = {
            "task_kind": cfg.task_kind,
            "trials": n_per_variant,
            "successes": successes,
            "success_rate": successes / n_per_variant,
        }
        if cycle_times:
            block["mean_cycle_time_seconds"] = float(np.mean(cycle_times))
        per_variant[cfg.variant_id] = block
        pooled_success += successes
        pooled_trials += n_per_variant
        pooled_cycle.extend(cycle_times)
    overall = {
        "trials": pooled_trials,
        "successes": pooled_success,
        "success_rate": pooled_success / pooled_trials,
    }
    if pooled_cycle:
        overall["mean_cycle_time_seconds"] = float(np.mean(pooled_cycle))
    return {"per_variant": per_variant, "overall": overall}


def format_report(results: dict, title: str = "evaluation") -> str:
    """Human-readable success table for one evaluation run."""
    lines = [title, "-" * len(title)]
    rows = list(results["per_variant"].items()) + [("overall", results["overall"])]
    width = max(len(name) for name, _ in rows)
    for name, block in rows:
        cycle = block.get("mean_cycle_time_seconds")
        cycle_txt = f"  cycle {cycle:6.2f}s" if cycle is not None else ""
        lines.append(
            f"{name:<{width}}  {block['successes']:>3}/{block['trials']:<3}"
            f"  {100.0 * block['success_rate']:5.1f}%{cycle_txt}"
        )
    return "\n".join(lines)


def report_records(results: dict, **labels) -> list[dict]:
    """Flatten evaluation results into line-delimited record dicts."""
    records = []
    for variant, block in results["per_variant"].items():
        records.append({"scope": "variant", "variant_id": variant, **block, **labels})
    records.append({"scope": "overall", **results["overall"], **labels})
    return records
