"""Replay storage: agent ring buffer, append-only demo buffer, symmetric sampling.

Both buffers store raw one-step transitions (sparse 0/1 reward). Training
batches are built from a parallel "backup view": segments added as a run
of consecutive transitions can precompute n-step aggregates, which
propagates the sparse terminal reward n steps per backup instead of one.
Both buffers must use the same n, otherwise a systematically smaller
bootstrap factor on one side biases the critic toward the other side's
actions whenever values are near-uniform. Single ``add`` calls always
write a one-step view.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

SOURCES = ("agent", "demo", "intervention")
SOURCE_CODE = {name: i for i, name in enumerate(SOURCES)}


class BufferError(ValueError):
    pass


@dataclass
class Transition:
    observation: np.ndarray
    action: np.ndarray
    reward: float
    next_observation: np.ndarray
    done: bool
    source: str = "agent"


@dataclass
class Batch:
    """Training view of sampled transitions.

    ``rewards`` and ``next_observations`` are backup aggregates (equal to
    the raw transition for one-step entries); ``discounts`` carries the
    per-sample bootstrap factor gamma^n.
    """

    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_observations: np.ndarray
    dones: np.ndarray
    sources: np.ndarray  # uint8 codes into SOURCES
    discounts: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.observations)


def segment_views(transitions, discount: float, nstep: int):
    """n-step aggregates for a consecutive run of transitions.

    The window for index t spans transitions t..t+n-1, truncated at the run
    end or at the first done. Yields (return, landing observation, done at
    landing, gamma^m) per transition.
    """
    T = len(transitions)
    views = []
    for t in range(T):
        ret, disc, m = 0.0, 1.0, 0
        for k in range(t, min(t + nstep, T)):
            ret += disc * float(transitions[k].reward)
            disc *= discount
            m = k
            if transitions[k].done:
                break
        views.append((ret, transitions[m].next_observation, float(transitions[m].done), disc))
    return views


class _ArrayStore:
    """Raw transition arrays plus the parallel backup-view arrays."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, discount: float, nstep: int = 1):
        if capacity <= 0:
            raise BufferError(f"capacity must be positive, got {capacity}")
        if not 0.0 < discount < 1.0:
            raise BufferError(f"discount must lie in (0, 1), got {discount}")
        if nstep < 1:
            raise BufferError(f"nstep must be at least 1, got {nstep}")
        self.discount = discount
        self.nstep = nstep
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rew = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=np.float32)
        self.src = np.zeros(capacity, dtype=np.uint8)
        # backup view (n-step aggregates; mirrors the raw columns for n=1)
        self.v_ret = np.zeros(capacity, dtype=np.float32)
        self.v_next = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.v_done = np.zeros(capacity, dtype=np.float32)
        self.v_disc = np.zeros(capacity, dtype=np.float32)
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def act_dim(self) -> int:
        return self.act.shape[1]

    def _write(self, i, obs, action, reward, next_obs, done, source) -> None:
        if reward not in (0.0, 1.0):
            raise BufferError(f"reward must be sparse 0/1, got {reward}")
        self.obs[i] = obs
        self.act[i] = action
        self.rew[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.src[i] = SOURCE_CODE[source]
        self.v_ret[i] = reward
        self.v_next[i] = next_obs
        self.v_done[i] = float(done)
        self.v_disc[i] = self.discount

    def _write_view(self, i, view) -> None:
        ret, v_next, v_done, v_disc = view
        self.v_ret[i] = ret
        self.v_next[i] = v_next
        self.v_done[i] = v_done
        self.v_disc[i] = v_disc

    def add_transition(self, tr: Transition) -> None:
        self.add(tr.observation, tr.action, tr.reward, tr.next_observation, tr.done, tr.source)

    def gather(self, idx: np.ndarray) -> Batch:
        return Batch(
            observations=self.obs[idx],
            actions=self.act[idx],
            rewards=self.v_ret[idx],
            next_observations=self.v_next[idx],
            dones=self.v_done[idx],
            sources=self.src[idx],
            discounts=self.v_disc[idx],
        )

    def sample(self, rng: np.random.Generator, batch_size: int) -> Batch:
        if self._size == 0:
            raise BufferError("cannot sample from an empty buffer")
        return self.gather(rng.integers(0, self._size, size=batch_size))

    @property
    def sources(self) -> np.ndarray:
        return self.src[: self._size]


class RingBuffer(_ArrayStore):
    """Fixed capacity; once full, new transitions overwrite the oldest."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, discount: float = 0.97,
                 nstep: int = 1):
        super().__init__(capacity, obs_dim, act_dim, discount, nstep=nstep)
        self.capacity = capacity
        self._cursor = 0

    def add(self, obs, action, reward, next_obs, done, source="agent") -> None:
        self._write(self._cursor, obs, action, reward, next_obs, done, source)
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def add_segment(self, transitions, source="agent") -> int:
        transitions = list(transitions)
        views = segment_views(transitions, self.discount, self.nstep)
        for tr, view in zip(transitions, views):
            i = self._cursor
            self.add(tr.observation, tr.action, tr.reward, tr.next_observation, tr.done, source)
            self._write_view(i, view)
        return len(transitions)


class AppendBuffer(_ArrayStore):
    """Append-only store; grows geometrically and never evicts.

    ``nstep`` controls the backup view written by ``add_segment``: windows
    of up to n consecutive transitions are aggregated into
    (return, landing observation, gamma^n). Single ``add`` calls always
    write a one-step view.
    """

    def __init__(self, obs_dim: int, act_dim: int, discount: float = 0.97,
                 nstep: int = 1, initial_capacity: int = 1024):
        super().__init__(initial_capacity, obs_dim, act_dim, discount, nstep=nstep)

    def _grow_if_full(self) -> None:
        if self._size == len(self.rew):
            for name in ("obs", "act", "rew", "next_obs", "done", "src",
                         "v_ret", "v_next", "v_done", "v_disc"):
                old = getattr(self, name)
                grown = np.zeros((len(old) * 2, *old.shape[1:]), dtype=old.dtype)
                grown[: len(old)] = old
                setattr(self, name, grown)

    def add(self, obs, action, reward, next_obs, done, source="demo") -> None:
        self._grow_if_full()
        self._write(self._size, obs, action, reward, next_obs, done, source)
        self._size += 1

    def add_segment(self, transitions, source="demo") -> int:
        """Append a consecutive run of transitions and write n-step views."""
        transitions = list(transitions)
        views = segment_views(transitions, self.discount, self.nstep)
        for tr, view in zip(transitions, views):
            self._grow_if_full()
            i = self._size
            self._write(i, tr.observation, tr.action, tr.reward,
                        tr.next_observation, tr.done, source)
            self._write_view(i, view)
            self._size += 1
        return len(transitions)


@dataclass
class ReplayBuffers:
    agent_buffer: RingBuffer
    demo_buffer: AppendBuffer

    @classmethod
    def create(cls, obs_dim: int, act_dim: int, agent_capacity: int = 200_000,
               discount: float = 0.97, demo_nstep: int = 1, agent_nstep: int = 1) -> "ReplayBuffers":
        return cls(
            agent_buffer=RingBuffer(agent_capacity, obs_dim, act_dim, discount=discount,
                                    nstep=agent_nstep),
            demo_buffer=AppendBuffer(obs_dim, act_dim, discount=discount, nstep=demo_nstep),
        )


def sample_batch(buffers: ReplayBuffers, batch_size: int, rng: np.random.Generator) -> Batch:
    """Draw a batch split exactly 50/50 between agent and demo buffers.

    Both halves are drawn uniformly with replacement, so small buffers
    still fill their quota.
    """
    if batch_size % 2 != 0:
        raise BufferError(f"batch_size must be even for a symmetric split, got {batch_size}")
    if len(buffers.agent_buffer) == 0 or len(buffers.demo_buffer) == 0:
        raise BufferError("symmetric sampling needs both buffers non-empty")
    half = batch_size // 2
    a = buffers.agent_buffer.sample(rng, half)
    d = buffers.demo_buffer.sample(rng, half)
    return Batch(
        observations=np.concatenate([a.observations, d.observations]),
        actions=np.concatenate([a.actions, d.actions]),
        rewards=np.concatenate([a.rewards, d.rewards]),
        next_observations=np.concatenate([a.next_observations, d.next_observations]),
        dones=np.concatenate([a.dones, d.dones]),
        sources=np.concatenate([a.sources, d.sources]),
        discounts=np.concatenate([a.discounts, d.discounts]),
    )


def episode_to_transitions(episode, act_dim: int, reward_fn=None, source="demo"):
    """Yield Transitions from an episode, in the learner's native action layout.

    The serialized 7-vector is reduced to (dx, dy, dz, dyaw) plus a gripper
    channel when ``act_dim == 5``. Rewards are recomputed by
    ``reward_fn(next_obs)`` when given, so the learner never sees the env's
    privileged success flag; done is set on rewarded transitions and on
    fatal final transitions, while a plain horizon timeout stays
    bootstrappable.
    """
    cols = [0, 1, 2, 5] if act_dim == 4 else [0, 1, 2, 5, 6]
    timeout = episode.tags.get("timeout", 0) > 0
    T = episode.duration_steps
    for t in range(T):
        next_obs = episode.observations[t + 1]
        if reward_fn is not None:
            reward = float(reward_fn(next_obs))
        else:
            reward = float(episode.rewards[t])
        fatal_end = t == T - 1 and not episode.success and not timeout
        done = reward >= 0.5 or fatal_end
        yield Transition(
            observation=episode.observations[t],
            action=episode.actions[t][cols],
            reward=reward,
            next_observation=next_obs,
            done=done,
            source=source,
        )


def seed_demo_buffer(buffers: ReplayBuffers, episodes, reward_fn=None) -> ReplayBuffers:
    """Append demonstration episodes to the demo buffer with source=demo."""
    episodes = list(episodes)
    if not episodes:
        warnings.warn("seeding demo buffer with zero episodes", stacklevel=2)
        return buffers
    keys = {(ep.task_kind, ep.variant_id) for ep in episodes}
    if len(keys) > 1:
        raise BufferError(f"demo episodes span multiple tasks: {sorted(keys)}")
    act_dim = buffers.demo_buffer.act_dim
    for ep in episodes:
        buffers.demo_buffer.add_segment(
            episode_to_transitions(ep, act_dim, reward_fn, source="demo"), source="demo"
        )
    return buffers
