from distillab.collect.curate import BalanceError, ComposeError, balance, compose_multistage, stats
from distillab.collect.dataset import (
    DATASET_FORMAT_VERSION,
    DatasetError,
    TrajectoryDataset,
    build_manifest,
    manifest_mirror_path,
    read_dataset,
    write_dataset,
)
from distillab.collect.episodes import (
    Episode,
    EpisodeError,
    STAGES,
    deserialize_action,
    grasp_handoff_reached,
    run_episode,
    serialize_action,
    stage_of,
)
from distillab.collect.rollout import ATTEMPT_CAP_FACTOR, ShortfallError, rollout

__all__ = [
    "ATTEMPT_CAP_FACTOR",
    "BalanceError",
    "ComposeError",
    "DATASET_FORMAT_VERSION",
    "DatasetError",
    "Episode",
    "EpisodeError",
    "STAGES",
    "ShortfallError",
    "TrajectoryDataset",
    "balance",
    "build_manifest",
    "compose_multistage",
    "deserialize_action",
    "grasp_handoff_reached",
    "manifest_mirror_path",
    "read_dataset",
    "rollout",
    "run_episode",
    "serialize_action",
    "stage_of",
    "stats",
    "write_dataset",
]
