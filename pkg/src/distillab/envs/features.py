"""Observation features: proprioception relative to the active target.

The stand-in for the source system's wrist camera is a coarse + fine
encoding of the offset between the tip and whatever the policy should
currently be moving toward (socket, object, or bowl). Coarse channels
span the workspace; fine channels saturate outside a 2 cm / 0.1 rad
neighborhood so near-contact positioning stays well resolved.
"""

from __future__ import annotations

import math

import numpy as np

from distillab.envs import scenes as sc

FEATURE_DIM = 18
GROSS_SCALE = 0.35  # meters mapped to one unit in the coarse channels
FINE_SCALE = 0.02
FINE_YAW_SCALE = 0.1
GROSS_YAW_SCALE = math.pi / 4


def current_target(state, scene: sc.Scene) -> tuple[np.ndarray, float]:
    """Where the tip should head right now, with the matching yaw."""
    cfg = scene.config
    sx, sy = scene.socket_position
    if cfg.task_kind in ("insertion", "connector"):
        return np.array([sx, sy, 0.0]), scene.socket_yaw
    if cfg.task_kind == "assembly":
        if state.held_object is not None or cfg.assembly_stage == "insert":
            return np.array([sx, sy, 0.0]), scene.socket_yaw
        ox, oy = scene.object_position
        return np.array([ox, oy, 0.0]), 0.0
    # pick_place: the object until it is held, then the bowl
    if state.held_object is not None:
        return np.array([sc.BOWL_CENTER[0], sc.BOWL_CENTER[1], 0.0]), 0.0
    ox, oy = scene.object_position
    return np.array([ox, oy, 0.0]), 0.0


def feature_vector(state, scene: sc.Scene) -> np.ndarray:
    cfg = scene.config
    target, target_yaw = current_target(state, scene)
    rel = state.ee_position - target
    yaw_err = (state.ee_yaw - target_yaw + math.pi) % (2 * math.pi) - math.pi
    f = np.empty(FEATURE_DIM, dtype=np.float64)
    f[0:3] = np.clip(rel / GROSS_SCALE, -1.0, 1.0)
    f[3:6] = np.clip(rel / FINE_SCALE, -1.0, 1.0)
    f[6] = np.clip(yaw_err / GROSS_YAW_SCALE, -1.0, 1.0)
    f[7] = np.clip(yaw_err / FINE_YAW_SCALE, -1.0, 1.0)
    f[8:11] = np.clip(state.ee_velocity[:3] / cfg.translation_cap, -1.0, 1.0)
    f[11] = np.clip(state.ee_velocity[3] / cfg.yaw_cap, -1.0, 1.0)
    f[12:15] = np.clip(state.wrench / 3.0, -1.0, 1.0)
    f[15] = 1.0 if state.gripper == "closed" else 0.0
    f[16] = 1.0 if state.held_object is not None else 0.0
    f[17] = state.step_index / cfg.episode_horizon
    return f.astype(np.float32)


def build_observation(state, scene: sc.Scene):
    from distillab.envs.env import Observation

    return Observation(
        features=feature_vector(state, scene),
        task_id=sc.variant_index(scene.config.variant_id),
    )


def relative_position_from_features(features: np.ndarray) -> np.ndarray:
    """Tip offset from the target, recovered from the fine channels.

    Exact while the tip is within the fine window (2 cm per axis),
    saturated beyond it. Works on single vectors or (N, dim) batches.
    """
    features = np.asarray(features)
    return features[..., 3:6] * FINE_SCALE
