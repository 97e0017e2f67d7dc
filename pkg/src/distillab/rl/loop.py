"""Specialist RL training loop: env stepping, interventions, eval, logging."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from distillab.envs import make_env
from distillab.envs.env import Action
from distillab.envs.features import build_observation
from distillab.nets.checkpoint import save_checkpoint
from distillab.rl.buffers import ReplayBuffers, Transition, sample_batch
from distillab.rl.sac import SACAgent, _critic_eval, actor_forward
from distillab.seeding import derive_rng, derive_seed


class RLConfigError(ValueError):
    pass


def native_act_dim(task_kind: str, assembly_stage: str = "full") -> int:
    """Learner action width: gripper channel only where grasping is part of the task."""
    if task_kind == "pick_place":
        return 5
    if task_kind == "assembly" and assembly_stage == "full":
        return 5
    return 4


def native_to_env_action(a: np.ndarray, env_config) -> Action:
    """Learner action -> env action; deltas are cap-normalized on both sides."""
    a = np.clip(np.asarray(a, dtype=np.float64), -1.0, 1.0)
    gripper = 1 if len(a) == 4 or a[4] > 0.0 else 0
    return Action(delta=a[:4].copy(), gripper=gripper)


def env_action_to_native(act: Action, env_config, act_dim: int) -> np.ndarray:
    v = np.empty(act_dim, dtype=np.float32)
    v[0:4] = np.clip(act.delta, -1.0, 1.0)
    if act_dim == 5:
        v[4] = 1.0 if act.gripper else -1.0
    return v


@dataclass(frozen=True)
class RLConfig:
    task_kind: str
    variant_id: str
    discount: float = 0.97
    batch_size: int = 256
    utd: int = 4  # critic updates per environment step
    n_critics: int = 2
    tau: float = 0.005
    target_entropy: float | None = None  # None = 0.0 (keep exploration alive)
    critic_layer_norm: bool = True
    max_env_steps: int = 200_000
    hidden: tuple = (256, 256)
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    alpha_lr: float = 3e-4
    init_alpha: float = 0.1
    fixed_alpha: float | None = None
    target_clip: tuple | None = (0.0, 1.05)  # feasible-return clamp for sparse 0/1 reward
    # matched n-step backup views on both buffers; asymmetric n biases the
    # critic toward whichever side bootstraps with the larger gamma^n
    demo_nstep: int = 3
    agent_nstep: int = 3
    warmup_steps: int = 1000
    agent_buffer_capacity: int = 200_000
    stuck_patience: int = 15  # consecutive stuck-contact ticks before rescue
    rescue_after: int | None = 60  # episode ticks without resolution before an overdue rescue
    intervention_steps: int = 60  # rescue step cap; rescues run until the task resolves
    eval_interval: int = 5000
    eval_episodes: int = 20
    success_threshold: float = 0.9
    log_interval: int = 1000
    assembly_stage: str = "insert"
    grasp_jitter: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise RLConfigError(f"discount must lie in (0, 1), got {self.discount}")
        if self.batch_size % 2 != 0:
            raise RLConfigError(f"batch_size must be even, got {self.batch_size}")
        if self.utd < 1 or self.n_critics < 1:
            raise RLConfigError("utd and n_critics must be at least 1")

    @property
    def act_dim(self) -> int:
        return native_act_dim(self.task_kind, self.assembly_stage)

    def make_env(self):
        kwargs = {"grasp_jitter": self.grasp_jitter}
        if self.task_kind == "assembly":
            kwargs["assembly_stage"] = self.assembly_stage
        return make_env(self.task_kind, self.variant_id, **kwargs)

    def make_buffers(self, obs_dim: int = 18) -> ReplayBuffers:
        return ReplayBuffers.create(
            obs_dim,
            self.act_dim,
            agent_capacity=self.agent_buffer_capacity,
            discount=self.discount,
            demo_nstep=self.demo_nstep,
            agent_nstep=self.agent_nstep,
        )


def update(agent: SACAgent, buffers: ReplayBuffers, config: RLConfig, rng: np.random.Generator) -> dict:
    """UTD critic updates followed by one actor/temperature update."""
    metrics = {}
    batch = None
    for _ in range(config.utd):
        batch = sample_batch(buffers, config.batch_size, rng)
        metrics.update(agent.critic_step(batch, rng))
    metrics.update(agent.actor_step(batch, rng))
    return metrics


def evaluate_policy(policy, env, episodes: int, seed_key) -> dict:
    """Success rate of ``policy(env) -> Action`` over seeded episodes."""
    successes = 0
    steps_on_success = []
    for i in range(episodes):
        obs = env.reset(derive_seed(*seed_key, i))
        done = False
        while not done:
            res = env.step(policy(env))
            done = res.done
        if res.success:
            successes += 1
            steps_on_success.append(env.state.step_index)
    out = {"success_rate": successes / episodes, "episodes": episodes}
    if steps_on_success:
        out["mean_steps_to_success"] = float(np.mean(steps_on_success))
    return out


def actor_policy(agent: SACAgent, env_config):
    """Deterministic (mean-action) policy handle for evaluation."""

    def policy(env) -> Action:
        features = build_observation(env.state, env.scene).features
        a = agent.act(features, deterministic=True)
        return native_to_env_action(a, env_config)

    return policy


def run_training(env, config: RLConfig, classifier, oracle, buffers: ReplayBuffers, run_dir=None) -> dict:
    """Train a specialist on one task variant.

    ``oracle`` is a rescue policy handle ``oracle(env) -> Action`` invoked
    when contact stays stuck for ``config.stuck_patience`` consecutive
    ticks; its transitions are stored in the demo buffer with
    source=intervention. Rewards and stored done flags come from the
    classifier on next_observation, never from the env's own success flag.
    Returns the trained agent plus the training log; if the step budget
    runs out below the success threshold the result carries
    ``converged=False`` and the best checkpoint seen.
    """
    act_dim = config.act_dim
    agent = SACAgent.create(
        obs_dim=18,
        act_dim=act_dim,
        hidden=config.hidden,
        seed=config.seed,
        actor_lr=config.actor_lr,
        critic_lr=config.critic_lr,
        alpha_lr=config.alpha_lr,
        discount=config.discount,
        tau=config.tau,
        init_alpha=config.init_alpha,
        fixed_alpha=config.fixed_alpha,
        n_critics=config.n_critics,
        target_entropy=config.target_entropy,
        target_clip=config.target_clip,
        critic_layer_norm=config.critic_layer_norm,
    )
    eval_env = config.make_env()
    policy_rng = derive_rng(config.seed, "policy-noise")
    update_rng = derive_rng(config.seed, "updates")

    run_path = Path(run_dir) if run_dir is not None else None
    log_file = None
    if run_path is not None:
        run_path.mkdir(parents=True, exist_ok=True)
        log_file = open(run_path / "train_log.jsonl", "w")

    log = []

    def emit(record):
        log.append(record)
        if log_file is not None:
            log_file.write(json.dumps(record) + "\n")
            log_file.flush()

    env_steps = 0
    episode_index = 0
    intervention_blocks = 0
    best_success = -1.0
    converged = False
    window_metrics = []
    next_eval = config.eval_interval
    next_log = config.log_interval

    # fixed probe over the seeded demonstrations: q_demo anchors the critic
    # to known-good state-action pairs, q_demo_pi shows whether the actor's
    # own action at those states is valued anywhere near them
    probe_n = min(256, len(buffers.demo_buffer))
    probe_obs = buffers.demo_buffer.obs[:probe_n].copy()
    probe_act = buffers.demo_buffer.act[:probe_n].copy()

    def demo_probe() -> dict:
        q_sa = np.min([_critic_eval(c, probe_obs, probe_act)[0] for c in agent.critics], axis=0)
        pi_actions = actor_forward(agent.actor, probe_obs).actions
        q_pi = np.min([_critic_eval(c, probe_obs, pi_actions)[0] for c in agent.critics], axis=0)
        return {"q_demo": float(np.mean(q_sa)), "q_demo_pi": float(np.mean(q_pi))}

    pending: list[Transition] = []

    def as_transition(obs, action, res, source) -> Transition:
        next_obs = res.observation.features
        reward = classifier.reward(next_obs)
        fatal = res.done and not res.success and "failed" in res.info
        return Transition(
            observation=obs, action=action, reward=reward,
            next_observation=next_obs, done=reward >= 0.5 or fatal, source=source,
        )

    def flush_agent():
        # agent transitions land as contiguous runs so n-step views line up
        if pending:
            buffers.agent_buffer.add_segment(pending, source="agent")
            pending.clear()

    def learn():
        nonlocal window_metrics
        if env_steps > config.warmup_steps and len(buffers.agent_buffer) >= config.batch_size // 2:
            window_metrics.append(update(agent, buffers, config, update_rng))

    while env_steps < config.max_env_steps and not converged:
        obs = env.reset(derive_seed(config.seed, "episode", episode_index)).features
        episode_index += 1
        stuck_run = 0
        done = False
        while not done and env_steps < config.max_env_steps and not converged:
            if env_steps < config.warmup_steps:
                a = policy_rng.uniform(-1.0, 1.0, act_dim)
            else:
                a = agent.act(obs, rng=policy_rng)
            res = env.step(native_to_env_action(a, env.config))
            env_steps += 1
            tr = as_transition(obs, a, res, "agent")
            pending.append(tr)
            obs = tr.next_observation
            done = res.done
            stuck_run = stuck_run + 1 if "stuck_contact" in res.info else 0
            learn()

            # rescues fire on a jammed contact or on an episode that has run
            # long without resolving; either way the agent regains control
            # (or a fresh episode starts) once the rescue block ends
            overdue = (
                config.rescue_after is not None
                and env.state.step_index >= config.rescue_after
            )
            if (
                not done
                and oracle is not None
                and env_steps >= config.warmup_steps
                and (stuck_run >= config.stuck_patience or overdue)
            ):
                reason = "stuck" if stuck_run >= config.stuck_patience else "overdue"
                intervention_blocks += 1
                stuck_run = 0
                flush_agent()
                segment = []
                for _ in range(config.intervention_steps):
                    if done or env_steps >= config.max_env_steps:
                        break
                    act = oracle(env)
                    res = env.step(act)
                    env_steps += 1
                    tr = as_transition(obs, env_action_to_native(act, env.config, act_dim),
                                       res, "intervention")
                    segment.append(tr)
                    obs = tr.next_observation
                    done = res.done
                    learn()
                    if tr.done:
                        break
                # only rescues that actually finish the task join the demo
                # side of the symmetric sampling; an unfinished rescue is
                # ordinary experience, not a demonstration
                rescued = bool(segment) and segment[-1].done and segment[-1].reward >= 0.5
                if segment:
                    target = buffers.demo_buffer if rescued else buffers.agent_buffer
                    target.add_segment(segment, source="intervention")
                emit({"type": "intervention", "step": env_steps, "reason": reason,
                      "rescued": rescued, "length": len(segment)})

            if env_steps >= next_log:
                next_log += config.log_interval
                record = {"type": "train", "step": env_steps, "episodes": episode_index,
                          "interventions": intervention_blocks}
                if window_metrics:
                    for key in window_metrics[0]:
                        record[key] = float(np.mean([m[key] for m in window_metrics]))
                window_metrics = []
                if probe_n:
                    record.update(demo_probe())
                emit(record)

            if env_steps >= next_eval:
                next_eval += config.eval_interval
                stats = evaluate_policy(
                    actor_policy(agent, eval_env.config),
                    eval_env,
                    config.eval_episodes,
                    (config.seed, "eval"),
                )
                emit({"type": "eval", "step": env_steps, "interventions": intervention_blocks,
                      "success_rate": stats["success_rate"],
                      "mean_steps": stats.get("mean_steps_to_success")})
                if stats["success_rate"] > best_success:
                    best_success = stats["success_rate"]
                    if run_path is not None:
                        save_checkpoint(agent.actor, agent.actor_opt, run_path / "best_actor.ckpt",
                                        extra_meta={"step": env_steps, "success_rate": best_success})
                if stats["success_rate"] >= config.success_threshold:
                    converged = True

        flush_agent()

    emit({"type": "done", "step": env_steps, "episodes": episode_index,
          "interventions": intervention_blocks, "converged": converged,
          "best_success": best_success})
    if run_path is not None:
        save_checkpoint(agent.actor, agent.actor_opt, run_path / "final_actor.ckpt",
                        extra_meta={"step": env_steps})
        (run_path / "result.json").write_text(json.dumps({
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()},
            "converged": converged,
            "best_success": best_success,
            "env_steps": env_steps,
            "interventions": intervention_blocks,
        }, indent=2))
        log_file.close()

    return {
        "agent": agent,
        "converged": converged,
        "failure": not converged,
        "best_success": best_success,
        "env_steps": env_steps,
        "episodes": episode_index,
        "interventions": intervention_blocks,
        "log": log,
    }
