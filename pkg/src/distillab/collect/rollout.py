"""Batch rollout of a policy into a TrajectoryDataset, with failure filtering."""

from __future__ import annotations

from distillab.collect.dataset import TrajectoryDataset
from distillab.collect.episodes import run_episode
from distillab.envs.env import ManipulationEnv
from distillab.seeding import derive_seed

# when filtering failures, give up after this many times the requested count
ATTEMPT_CAP_FACTOR = 5


class ShortfallError(RuntimeError):
    """Filtered collection hit the attempt cap before reaching the target.

    Carries the partial dataset and the attempt count so a caller can
    keep what was gathered.
    """

    def __init__(self, message: str, dataset: TrajectoryDataset, attempts: int):
        super().__init__(message)
        self.dataset = dataset
        self.attempts = attempts


def rollout(
    policy,
    env_config,
    n_episodes: int,
    filter_failures: bool = False,
    seed: int = 0,
    provenance: str = "rl",
) -> TrajectoryDataset:
    """Collect ``n_episodes`` episodes of ``policy(env) -> Action``.

    With ``filter_failures`` only successful episodes count toward the
    target and failures are discarded. Episode seeds are derived from the
    attempt index, so a parallel fan-out that partitions attempt indices
    across workers reproduces the serial episode order.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    env = ManipulationEnv(env_config)
    cap = ATTEMPT_CAP_FACTOR * n_episodes if filter_failures else n_episodes
    kept, attempts = [], 0
    while len(kept) < n_episodes and attempts < cap:
        episode = run_episode(env, derive_seed(seed, "rollout", attempts), policy, provenance)
        attempts += 1
        if episode.success or not filter_failures:
            kept.append(episode)
    accounting = {"attempts": attempts, "requested": n_episodes}
    dataset = TrajectoryDataset.from_episodes(kept, extra_manifest=accounting)
    if len(kept) < n_episodes:
        raise ShortfallError(
            f"collected {len(kept)}/{n_episodes} successes after {attempts} attempts (cap {cap})",
            dataset,
            attempts,
        )
    return dataset
