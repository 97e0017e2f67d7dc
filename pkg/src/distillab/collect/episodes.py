"""Episode container and the single-episode runner shared by the pipeline."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from distillab.envs import variant_index
from distillab.envs.env import Action, ManipulationEnv

STAGES = ("grasp", "transport", "insert")
STAGE_INDEX = {name: i for i, name in enumerate(STAGES)}

# handoff window between the grasp and insertion stages of assembly
HANDOFF_LATERAL = 0.025
HANDOFF_SLACK = 0.005


class EpisodeError(ValueError):
    pass


def serialize_action(act: Action, config) -> np.ndarray:
    """Pack an env action as 7 cap-normalized floats in [-1, 1].

    Layout (dx, dy, dz, droll, dpitch, dyaw, gripper); roll and pitch are
    always zero in this planar setup, gripper is +1 close / -1 open.
    Action deltas are already expressed in cap units, so this is a pure
    re-layout plus the gripper sign convention.
    """
    v = np.zeros(7, dtype=np.float32)
    v[0:3] = act.delta[0:3]
    v[5] = act.delta[3]
    v[6] = 1.0 if act.gripper else -1.0
    return np.clip(v, -1.0, 1.0)


def deserialize_action(vec: np.ndarray, config) -> Action:
    vec = np.asarray(vec, dtype=np.float64)
    delta = np.clip(vec[[0, 1, 2, 5]], -1.0, 1.0)
    return Action(delta=delta, gripper=1 if vec[6] > 0.0 else 0)


def stage_of(state, scene) -> str:
    """Which stage of the task a transition belongs to, from its start state."""
    if state.held_object is None and state.phase in ("approach", "contact"):
        return "grasp"
    target = scene.socket_position
    lat = float(np.hypot(*(state.ee_position[:2] - np.asarray(target))))
    return "transport" if lat > HANDOFF_LATERAL else "insert"


@dataclass
class Episode:
    """One rollout: aligned observation/action/reward arrays plus provenance."""

    task_kind: str
    variant_id: str
    provenance: str  # rl | demo | mixed (oracle allowed for reference rollouts)
    seed: int
    observations: np.ndarray  # (T+1, D) float32
    actions: np.ndarray  # (T, 7) float32 serialized (dx,dy,dz,0,0,dyaw,grip)
    rewards: np.ndarray  # (T,) float32, sparse {0, 1}
    stages: np.ndarray  # (T,) uint8 index into STAGES
    success: bool
    control_hz: float
    tags: dict = field(default_factory=dict)  # event tag -> count

    @property
    def task_id(self) -> int:
        return variant_index(self.variant_id)

    @property
    def duration_steps(self) -> int:
        return len(self.actions)

    @property
    def cycle_time_s(self) -> float | None:
        return self.duration_steps / self.control_hz if self.success else None

    def validate(self) -> "Episode":
        T = len(self.actions)
        if len(self.observations) != T + 1 or len(self.rewards) != T or len(self.stages) != T:
            raise EpisodeError(
                f"misaligned episode arrays: obs {len(self.observations)}, "
                f"actions {T}, rewards {len(self.rewards)}, stages {len(self.stages)}"
            )
        if T == 0:
            raise EpisodeError("empty episode")
        if bool(self.rewards[-1] == 1.0) != self.success:
            raise EpisodeError("success flag does not match the final transition")
        if not set(np.unique(self.rewards)) <= {0.0, 1.0}:
            raise EpisodeError("rewards must be sparse {0, 1}")
        return self


def run_episode(
    env: ManipulationEnv,
    seed: int,
    policy,
    provenance: str,
    stop=None,
) -> Episode:
    """Roll one episode with ``policy(env) -> Action``.

    ``stop(state, scene) -> bool`` optionally ends the episode early and
    counts as success for that stage (used to cut grasp-stage segments at
    the handoff window); the final transition is then granted the sparse
    reward so episode invariants stay uniform.
    """
    obs = env.reset(seed)
    observations = [obs.features]
    actions, rewards, stages = [], [], []
    tag_counts: Counter = Counter()
    success = False
    while True:
        stages.append(STAGE_INDEX[stage_of(env.state, env.scene)])
        act = policy(env)
        res = env.step(act)
        actions.append(serialize_action(act, env.config))
        rewards.append(res.reward)
        observations.append(res.observation.features)
        tag_counts.update(res.info)
        if stop is not None and stop(env.state, env.scene):
            success = True
            rewards[-1] = 1.0  # stage completion is this segment's sparse reward
            env._done = True
            break
        if res.done:
            success = res.success
            break
    return Episode(
        task_kind=env.config.task_kind,
        variant_id=env.config.variant_id,
        provenance=provenance,
        seed=seed,
        observations=np.stack(observations).astype(np.float32),
        actions=np.stack(actions),
        rewards=np.asarray(rewards, dtype=np.float32),
        stages=np.asarray(stages, dtype=np.uint8),
        success=success,
        control_hz=env.config.control_hz,
        tags=dict(tag_counts),
    ).validate()


def grasp_handoff_reached(state, scene) -> bool:
    """Grasp-stage end: part in hand, over the insertion start window."""
    if state.held_object is None:
        return False
    lat = float(np.hypot(*(state.ee_position[:2] - np.asarray(scene.socket_position))))
    return lat <= HANDOFF_LATERAL and state.ee_position[2] > scene.config.socket_lip_height
