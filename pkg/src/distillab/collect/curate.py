"""Dataset curation: per-variant balancing, stage composition, summary stats."""

from __future__ import annotations

import numpy as np

from distillab.collect.dataset import DatasetError, TrajectoryDataset
from distillab.collect.episodes import HANDOFF_SLACK, STAGE_INDEX
from distillab.envs.features import GROSS_SCALE
from distillab.envs.scenes import make_scene_config
from distillab.seeding import derive_rng


class BalanceError(DatasetError):
    pass


class ComposeError(DatasetError):
    pass


def balance(datasets: dict[str, TrajectoryDataset], per_variant_quota: int, seed: int = 0) -> TrajectoryDataset:
    """Merge per-variant datasets down to exactly ``per_variant_quota`` each.

    Selection is a seeded uniform draw without replacement; the same seed
    always picks the same episodes. Episode order within a variant is
    preserved and variants are concatenated in sorted order.
    """
    if per_variant_quota < 1:
        raise ValueError("per_variant_quota must be at least 1")
    short = {v: len(ds.episodes) for v, ds in datasets.items() if len(ds.episodes) < per_variant_quota}
    if short:
        detail = ", ".join(f"{v} has {n}" for v, n in sorted(short.items()))
        raise BalanceError(f"variants under quota {per_variant_quota}: {detail}")
    picked = []
    for variant in sorted(datasets):
        episodes = datasets[variant].episodes
        rng = derive_rng(seed, "balance", variant)
        chosen = rng.choice(len(episodes), size=per_variant_quota, replace=False)
        picked.extend(episodes[i] for i in sorted(chosen))
    return TrajectoryDataset.from_episodes(picked)


def _handoff_offsets(episode) -> tuple[bool, float]:
    """(part in hand, per-axis lateral offset from the socket) at episode end.

    While a part is held the observation's coarse channels encode the
    ee-to-socket offset, so the handoff pose can be read straight off the
    final observation.
    """
    final = np.asarray(episode.observations[-1], dtype=np.float64)
    held = final[16] > 0.5
    offset = float(np.max(np.abs(final[0:2] * GROSS_SCALE)))
    return held, offset


def compose_multistage(grasp_demos: TrajectoryDataset, insert_rl: TrajectoryDataset) -> TrajectoryDataset:
    """Join grasp-stage demos with insertion-stage rollouts into one dataset.

    Every grasp demo must end holding the part inside the lateral window
    the insertion stage randomizes its starts over, otherwise the two
    stages do not line up into one continuous task; offenders are listed
    by index. The merged manifest reports provenance as mixed.
    """
    offenders = []
    for i, ep in enumerate(grasp_demos.episodes):
        if STAGE_INDEX["grasp"] not in ep.stages:
            offenders.append(f"grasp episode {i}: no grasp-stage transitions")
            continue
        start_cfg = make_scene_config(ep.task_kind, ep.variant_id, assembly_stage="insert")
        half_width = start_cfg.start_randomization / 2
        held, offset = _handoff_offsets(ep)
        if not held:
            offenders.append(f"grasp episode {i}: ends without the part in hand")
        elif offset > half_width + HANDOFF_SLACK:
            offenders.append(
                f"grasp episode {i}: ends {offset:.3f} m from the socket, "
                f"outside the {half_width:.3f} m insertion start window"
            )
    for i, ep in enumerate(insert_rl.episodes):
        if STAGE_INDEX["insert"] not in ep.stages:
            offenders.append(f"insertion episode {i}: no insert-stage transitions")
    if offenders:
        raise ComposeError("stage boundary mismatch: " + "; ".join(offenders))
    return TrajectoryDataset.from_episodes(grasp_demos.episodes + insert_rl.episodes)


def stats(dataset: TrajectoryDataset) -> dict:
    """Success rate and cycle time, overall and per variant.

    Cycle time averages successful episodes only and is omitted from the
    result when a group has no successes.
    """
    if not dataset.episodes:
        raise DatasetError("stats on an empty dataset")

    def block(episodes) -> dict:
        successes = [ep for ep in episodes if ep.success]
        out = {
            "n_episodes": len(episodes),
            "success_rate": len(successes) / len(episodes),
        }
        if successes:
            out["mean_cycle_time_seconds"] = float(np.mean([ep.cycle_time_s for ep in successes]))
        return out

    groups: dict[str, list] = {}
    for ep in dataset.episodes:
        groups.setdefault(ep.variant_id, []).append(ep)
    result = block(dataset.episodes)
    result["per_variant"] = {variant: block(eps) for variant, eps in sorted(groups.items())}
    return result
