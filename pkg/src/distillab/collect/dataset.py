"""Episode collections with a self-describing manifest and a binary file format.

A dataset file reuses the versioned array container (magic, JSON header,
packed little-endian payloads, CRC): the header carries the format
version, dims, control rate, variant table, and per-episode metadata;
the arrays hold each episode's transitions. A plain-text mirror of the
manifest is written next to the file for quick inspection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from distillab.collect.episodes import Episode
from distillab.nets.checkpoint import load_arrays, save_arrays

DATASET_FORMAT_VERSION = 1


class DatasetError(ValueError):
    pass


def build_manifest(episodes) -> dict:
    """Summary counts recomputed from the episodes themselves."""
    manifest: dict = {
        "format_version": DATASET_FORMAT_VERSION,
        "n_episodes": len(episodes),
    }
    if not episodes:
        manifest.update(
            obs_dim=None,
            act_dim=None,
            control_hz=None,
            per_variant={},
            per_provenance={},
            provenance=None,
            n_success=0,
        )
        return manifest
    dims = {(ep.observations.shape[1], ep.actions.shape[1], float(ep.control_hz)) for ep in episodes}
    if len(dims) > 1:
        raise DatasetError(f"episodes disagree on dims or control rate: {sorted(dims)}")
    obs_dim, act_dim, control_hz = dims.pop()
    per_variant: dict[str, int] = {}
    per_provenance: dict[str, int] = {}
    for ep in episodes:
        per_variant[ep.variant_id] = per_variant.get(ep.variant_id, 0) + 1
        per_provenance[ep.provenance] = per_provenance.get(ep.provenance, 0) + 1
    manifest.update(
        obs_dim=int(obs_dim),
        act_dim=int(act_dim),
        control_hz=control_hz,
        per_variant=dict(sorted(per_variant.items())),
        per_provenance=dict(sorted(per_provenance.items())),
        provenance=next(iter(per_provenance)) if len(per_provenance) == 1 else "mixed",
        n_success=sum(1 for ep in episodes if ep.success),
    )
    return manifest


@dataclass
class TrajectoryDataset:
    """Episodes plus the manifest that must stay in sync with them."""

    episodes: list[Episode]
    manifest: dict = field(default_factory=dict)

    @classmethod
    def from_episodes(cls, episodes, extra_manifest: dict | None = None) -> "TrajectoryDataset":
        episodes = [ep.validate() for ep in episodes]
        dataset = cls(list(episodes), build_manifest(episodes))
        if extra_manifest:
            dataset.manifest.update(extra_manifest)
        return dataset

    def __len__(self) -> int:
        return len(self.episodes)

    def validate(self) -> "TrajectoryDataset":
        """Recount everything and compare against the recorded manifest.

        Extra manifest keys (collection accounting and the like) are
        allowed; the recomputed keys must match exactly.
        """
        for key, want in build_manifest(self.episodes).items():
            got = self.manifest.get(key, "<missing>")
            if got != want:
                raise DatasetError(f"manifest mismatch at {key!r}: recorded {got!r}, actual {want!r}")
        return self


def _manifest_text(manifest: dict) -> str:
    lines = [
        "trajectory dataset manifest",
        f"format version: {manifest['format_version']}",
        f"episodes: {manifest['n_episodes']} (successes: {manifest['n_success']})",
        f"dims: obs {manifest['obs_dim']}, act {manifest['act_dim']}, control {manifest['control_hz']} Hz",
        f"provenance: {manifest['provenance']}",
    ]
    for prov, count in manifest["per_provenance"].items():
        lines.append(f"  {prov}: {count}")
    lines.append("variants:")
    for variant, count in manifest["per_variant"].items():
        lines.append(f"  {variant}: {count}")
    extras = sorted(set(manifest) - set(build_manifest([])) - {"per_variant", "per_provenance"})
    for key in extras:
        lines.append(f"{key}: {manifest[key]}")
    return "\n".join(lines) + "\n"


def manifest_mirror_path(path) -> Path:
    return Path(str(path) + ".manifest.txt")


def write_dataset(dataset: TrajectoryDataset, path) -> None:
    dataset.validate()
    manifest = dataset.manifest
    meta = {
        "kind": "trajectory_dataset",
        "header": {
            "format_version": manifest["format_version"],
            "obs_dim": manifest["obs_dim"],
            "act_dim": manifest["act_dim"],
            "control_hz": manifest["control_hz"],
            "variants": sorted(manifest["per_variant"]),
        },
        "manifest": manifest,
        "episodes": [
            {
                "task_kind": ep.task_kind,
                "variant_id": ep.variant_id,
                "provenance": ep.provenance,
                "seed": int(ep.seed),
                "success": bool(ep.success),
                "control_hz": float(ep.control_hz),
                "tags": {name: int(count) for name, count in sorted(ep.tags.items())},
            }
            for ep in dataset.episodes
        ],
    }
    arrays: dict[str, np.ndarray] = {}
    for i, ep in enumerate(dataset.episodes):
        arrays[f"ep{i}.obs"] = ep.observations
        arrays[f"ep{i}.act"] = ep.actions
        arrays[f"ep{i}.rew"] = ep.rewards
        arrays[f"ep{i}.stages"] = ep.stages
    save_arrays(path, meta, arrays)
    manifest_mirror_path(path).write_text(_manifest_text(manifest))


def read_dataset(path) -> TrajectoryDataset:
    meta, arrays = load_arrays(path)
    if meta.get("kind") != "trajectory_dataset":
        raise DatasetError(f"{path}: not a trajectory dataset (kind={meta.get('kind')!r})")
    version = meta.get("header", {}).get("format_version")
    if version is None or version > DATASET_FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported dataset format version {version!r}")
    episodes = []
    for i, entry in enumerate(meta["episodes"]):
        episodes.append(
            Episode(
                task_kind=entry["task_kind"],
                variant_id=entry["variant_id"],
                provenance=entry["provenance"],
                seed=entry["seed"],
                observations=arrays[f"ep{i}.obs"],
                actions=arrays[f"ep{i}.act"],
                rewards=arrays[f"ep{i}.rew"],
                stages=arrays[f"ep{i}.stages"],
                success=entry["success"],
                control_hz=entry["control_hz"],
                tags=dict(entry["tags"]),
            ).validate()
        )
    return TrajectoryDataset(episodes, dict(meta["manifest"])).validate()
