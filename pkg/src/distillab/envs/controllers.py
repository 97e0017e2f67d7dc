"""Scripted controllers: a near-optimal oracle and a sloppy demonstrator.

The oracle is a proportional controller over task subgoals (align, descend,
grasp, transport, release) and doubles as the correctness oracle for the
environment geometry. The demonstrator reuses the oracle's direction field
but shrinks magnitudes toward the center of the action space, adds tremor,
pauses, descends before it is properly aligned, and occasionally closes the
gripper early. It stands in for human teleoperation wherever demonstration
data is required.
"""

from __future__ import annotations

import math

import numpy as np

from distillab.envs import scenes as sc
from distillab.envs.env import Action, EnvState, wrap_angle
from distillab.seeding import derive_rng

# demonstrator character; tuned so it still finishes well within the horizon
DEMO_SHRINK = 0.35
DEMO_TREMOR = 0.08
DEMO_PAUSE_P = 0.15
DEMO_LOOSE_ALIGN = 0.012  # descends once this close, far sloppier than the fit tolerance
DEMO_PREMATURE_CLOSE_P = 0.02

_ALIGN_MARGIN = 0.6  # oracle commits to descent at this fraction of the tolerance


def _clip(v: float) -> float:
    return float(np.clip(v, -1.0, 1.0))


def _insert_deltas(state: EnvState, scene: sc.Scene, align_radius: float, align_yaw: float) -> np.ndarray:
    """P-control toward the socket: align laterally and in yaw, then descend."""
    cfg = scene.config
    lat = state.ee_position[:2] - np.asarray(scene.socket_position)
    r = float(np.hypot(*lat))
    yaw_err = wrap_angle(state.ee_yaw - scene.socket_yaw)
    z = state.ee_position[2]
    hover = cfg.socket_lip_height + 0.01
    dx = _clip(-lat[0] / cfg.translation_cap)
    dy = _clip(-lat[1] / cfg.translation_cap)
    dyaw = _clip(-yaw_err / cfg.yaw_cap)
    if r <= align_radius and abs(yaw_err) <= align_yaw:
        dz = -1.0
    else:
        dz = _clip((hover - z) / cfg.translation_cap)
    return np.array([dx, dy, dz, dyaw])


def _grasp_deltas(state: EnvState, scene: sc.Scene, align_radius: float) -> tuple[np.ndarray, int]:
    """Approach the object, descend over it, close at grasp height."""
    cfg = scene.config
    lat = state.ee_position[:2] - np.asarray(scene.object_position)
    r = float(np.hypot(*lat))
    z = state.ee_position[2]
    dx = _clip(-lat[0] / cfg.translation_cap)
    dy = _clip(-lat[1] / cfg.translation_cap)
    if r <= align_radius:
        dz = _clip((0.015 - z) / cfg.translation_cap)
    else:
        dz = _clip((0.05 - z) / cfg.translation_cap)
    gripper = 1 if (r <= align_radius and z <= sc.GRASP_Z) else 0
    return np.array([dx, dy, dz, 0.0]), gripper


def _place_deltas(state: EnvState, scene: sc.Scene) -> tuple[np.ndarray, int]:
    """Carry to the bowl and release low enough not to bounce out."""
    cfg = scene.config
    lat = state.ee_position[:2] - np.asarray(sc.BOWL_CENTER)
    r = float(np.hypot(*lat))
    z = state.ee_position[2]
    dx = _clip(-lat[0] / cfg.translation_cap)
    dy = _clip(-lat[1] / cfg.translation_cap)
    if r > 0.02:
        dz = _clip((0.08 - z) / cfg.translation_cap)
        gripper = 1
    else:
        dz = _clip((0.04 - z) / cfg.translation_cap)
        gripper = 0 if z <= sc.DROP_Z_MAX - 0.01 else 1
    return np.array([dx, dy, dz, 0.0]), gripper


def _base_action(state: EnvState, scene: sc.Scene, align_frac: float, loose: bool) -> Action:
    cfg = scene.config
    align_r = DEMO_LOOSE_ALIGN if loose else align_frac * cfg.socket_tolerance
    align_y = (2.0 if loose else align_frac) * cfg.yaw_tolerance
    if cfg.task_kind in ("insertion", "connector"):
        return Action(_insert_deltas(state, scene, align_r, align_y), gripper=1)
    if cfg.task_kind == "assembly":
        if state.held_object is not None:
            return Action(_insert_deltas(state, scene, align_r, align_y), gripper=1)
        grasp_r = (1.2 if loose else _ALIGN_MARGIN) * 0.01
        delta, grip = _grasp_deltas(state, scene, grasp_r)
        return Action(delta, gripper=grip)
    # pick_place
    if state.held_object is None:
        grasp_r = (1.2 if loose else _ALIGN_MARGIN) * cfg.socket_tolerance
        delta, grip = _grasp_deltas(state, scene, grasp_r)
        return Action(delta, gripper=grip)
    delta, grip = _place_deltas(state, scene)
    return Action(delta, gripper=grip)


def oracle_action(
    state: EnvState,
    scene: sc.Scene,
    noise_scale: float = 0.0,
    rng: np.random.Generator | None = None,
) -> Action:
    """Near-optimal scripted action; optional Gaussian perturbation."""
    act = _base_action(state, scene, _ALIGN_MARGIN, loose=False)
    if noise_scale > 0.0:
        if rng is None:
            raise ValueError("noise_scale > 0 requires an rng")
        delta = np.clip(act.delta + rng.normal(0.0, noise_scale, size=4), -1.0, 1.0)
        return Action(delta, gripper=act.gripper)
    return act


def demo_action(state: EnvState, scene: sc.Scene, seed: int) -> Action:
    """Center-clustered, trembling, pausing stand-in for human teleoperation."""
    rng = derive_rng(seed, "demo", state.step_index)
    base = _base_action(state, scene, _ALIGN_MARGIN, loose=True)
    gripper = base.gripper
    if rng.uniform() < DEMO_PAUSE_P:
        delta = np.zeros(4)
    else:
        scale = DEMO_SHRINK * (1.0 + rng.uniform(-0.2, 0.2))
        delta = base.delta * scale + rng.normal(0.0, DEMO_TREMOR, size=4)
        delta = np.clip(delta, -1.0, 1.0)
    cfg = scene.config
    if cfg.task_kind in ("pick_place", "assembly") and state.held_object is None and gripper == 0:
        lat = float(np.hypot(*(state.ee_position[:2] - np.asarray(scene.object_position))))
        near = lat <= 2.5 * max(cfg.socket_tolerance, 0.01) and state.ee_position[2] <= sc.GRASP_Z + 0.02
        if near and rng.uniform() < DEMO_PREMATURE_CLOSE_P:
            gripper = 1
    return Action(delta, gripper=gripper)


def scripted_policy(kind: str, seed: int = 0, noise_scale: float = 0.0):
    """Uniform callable interface: policy(env) -> Action for the current state."""
    if kind == "oracle":
        rng = derive_rng(seed, "oracle_noise") if noise_scale > 0 else None

        def policy(env):
            return oracle_action(env.state, env.scene, noise_scale=noise_scale, rng=rng)

    elif kind == "demo":

        def policy(env):
            return demo_action(env.state, env.scene, seed)

    else:
        raise ValueError(f"unknown scripted controller {kind!r}")
    return policy
