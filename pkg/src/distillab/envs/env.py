"""Kinematic 2.5-D manipulation environments.

The end-effector is a point tip at (x, y, z) with yaw. Sockets are bores
through a raised collar: descending into the bore requires lateral offset
within the fit tolerance and yaw within the yaw tolerance; pressing down
anywhere else stops on the collar or the board and produces a synthetic
spring wrench. Grasping tasks add a table-plane object and a drop target.

All contact resolution is closed-form, so identical (config, seed, action
sequence) triples give bitwise-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from distillab.envs import scenes as sc
from distillab.envs.features import build_observation
from distillab.seeding import derive_rng

PHASES = ("approach", "contact", "grasped", "inserted", "placed")
# high-water ranks; approach<->contact may oscillate, everything else only climbs
PHASE_RANK = {"approach": 0, "contact": 0, "grasped": 1, "inserted": 2, "placed": 2}

WRENCH_CLIP = 3.0  # spring force saturation, in units of one displacement cap


@dataclass
class Action:
    """Per-tick command: delta = (dx, dy, dz, dyaw) in [-1, 1], gripper binary."""

    delta: np.ndarray
    gripper: int = 1

    def as_array7(self) -> np.ndarray:
        """Serialize as (dx, dy, dz, droll=0, dpitch=0, dyaw, gripper)."""
        d = np.asarray(self.delta, dtype=np.float64)
        return np.array([d[0], d[1], d[2], 0.0, 0.0, d[3], float(self.gripper)])

    @classmethod
    def from_array7(cls, arr) -> "Action":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(delta=arr[[0, 1, 2, 5]].copy(), gripper=int(arr[6] > 0.5))


@dataclass
class EnvState:
    ee_position: np.ndarray  # (3,) meters
    ee_yaw: float
    ee_velocity: np.ndarray  # (4,) realized per-tick displacement (dx, dy, dz, dyaw)
    wrench: np.ndarray  # (3,) synthetic contact force, in displacement-cap units
    gripper: str  # "open" | "closed"
    held_object: str | None
    phase: str
    step_index: int

    def copy(self) -> "EnvState":
        return EnvState(
            self.ee_position.copy(),
            self.ee_yaw,
            self.ee_velocity.copy(),
            self.wrench.copy(),
            self.gripper,
            self.held_object,
            self.phase,
            self.step_index,
        )


@dataclass
class Observation:
    features: np.ndarray  # float32, fixed width
    task_id: int


@dataclass
class StepResult:
    observation: Observation
    reward: float
    done: bool
    success: bool
    info: tuple[str, ...]


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


class ManipulationEnv:
    """One task instance; single-threaded, re-randomized per reset."""

    def __init__(self, config: sc.SceneConfig):
        self.config = config
        self.scene: sc.Scene | None = None
        self.state: EnvState | None = None
        self._done = True

    # -- reset ---------------------------------------------------------

    def reset(self, seed: int) -> Observation:
        cfg = self.config
        rng = derive_rng(seed, "scene", cfg.task_kind, cfg.variant_id, cfg.assembly_stage)
        w, h = cfg.workspace_randomization
        socket = (rng.uniform(-w / 2, w / 2), rng.uniform(-h / 2, h / 2))
        socket_yaw = rng.uniform(-cfg.rotation_randomization_rad, cfg.rotation_randomization_rad)
        obj = (0.0, 0.0)
        start_xy = (0.0, 0.0)
        start_yaw = 0.0
        held = None
        gripper = "open"

        grip_offset = (0.0, 0.0)
        if cfg.task_kind == "insertion":
            held, gripper = cfg.variant_id, "closed"
        elif cfg.task_kind == "connector":
            socket = (0.0, 0.0)  # port fixed to the table
            socket_yaw = 0.0
            r = cfg.start_randomization / 2
            start_xy = (rng.uniform(-r, r), rng.uniform(-r, r))
            start_yaw = rng.uniform(-cfg.start_yaw_randomization, cfg.start_yaw_randomization)
            held, gripper = cfg.variant_id, "closed"
        elif cfg.task_kind == "pick_place":
            obj = socket  # draw is the object's, target bowl is fixed
            socket = sc.BOWL_CENTER
            socket_yaw = 0.0
        elif cfg.task_kind == "assembly":
            gx, gy = sc.GRASP_AREA_CENTER
            gw, gh = sc.GRASP_AREA_SIZE
            obj = (gx + rng.uniform(-gw / 2, gw / 2), gy + rng.uniform(-gh / 2, gh / 2))
            if cfg.assembly_stage == "insert":
                r = cfg.start_randomization / 2
                start_xy = (socket[0] + rng.uniform(-r, r), socket[1] + rng.uniform(-r, r))
                held, gripper = cfg.variant_id, "closed"
            else:
                start_xy = sc.GRASP_AREA_CENTER

        if held is not None and cfg.grasp_jitter > 0:
            # models periodically re-adjusted grasps: the part sits slightly
            # off-center in the gripper for the whole episode
            j = cfg.grasp_jitter
            grip_offset = (rng.uniform(-j, j), rng.uniform(-j, j))

        self.scene = sc.Scene(
            config=cfg,
            socket_position=socket,
            socket_yaw=socket_yaw,
            object_position=obj,
            start_position=(start_xy[0], start_xy[1], cfg.start_height),
            start_yaw=start_yaw,
            grip_offset=grip_offset,
        )
        self.state = EnvState(
            ee_position=np.array(self.scene.start_position, dtype=np.float64),
            ee_yaw=float(start_yaw),
            ee_velocity=np.zeros(4),
            wrench=np.zeros(3),
            gripper=gripper,
            held_object=held,
            phase="approach",
            step_index=0,
        )
        self._done = False
        return build_observation(self.state, self.scene)

    # -- contact geometry ----------------------------------------------

    def _tip_xy(self) -> np.ndarray:
        """Contact point: the ee, shifted by the in-gripper offset while holding."""
        xy = self.state.ee_position[:2]
        if self.state.held_object is not None:
            return xy + np.asarray(self.scene.grip_offset)
        return xy

    def _socket_frame(self, xy: np.ndarray) -> np.ndarray:
        sx, sy = self.scene.socket_position
        psi = self.scene.socket_yaw
        c, s = math.cos(-psi), math.sin(-psi)
        dx, dy = xy[0] - sx, xy[1] - sy
        return np.array([c * dx - s * dy, s * dx + c * dy])

    def _world_vec(self, v: np.ndarray) -> np.ndarray:
        psi = self.scene.socket_yaw
        c, s = math.cos(psi), math.sin(psi)
        return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])

    def _floor_height(self, r: float, yaw_err: float, held: bool) -> float:
        cfg = self.config
        if r <= cfg.socket_tolerance:
            if held and abs(yaw_err) <= cfg.yaw_tolerance:
                return -cfg.insert_depth
            return cfg.socket_lip_height  # gated: a misaligned tip catches on the opening
        if r <= cfg.collar_radius:
            return cfg.socket_lip_height
        return 0.0

    def _resolve_socket_motion(self, dpos, dyaw):
        """Move the tip against the collar/bore geometry; returns wrench + tags."""
        cfg = self.config
        st = self.state
        tags = []
        wrench = np.zeros(3)
        z = st.ee_position[2]
        lip = cfg.socket_lip_height
        held = st.held_object is not None

        tip = self._tip_xy()
        rel = self._socket_frame(tip)
        dlat = self._socket_frame(tip + dpos[:2]) - rel
        yaw_err = wrap_angle(st.ee_yaw - self.scene.socket_yaw)

        # yaw first; inside the bore it is pinched to the fit tolerance
        new_yaw_err = yaw_err + dyaw
        yaw_clamped = False
        in_bore = z < lip and np.hypot(*rel) <= cfg.socket_tolerance and held
        if in_bore:
            pinched = float(np.clip(new_yaw_err, -cfg.yaw_tolerance, cfg.yaw_tolerance))
            yaw_clamped = pinched != new_yaw_err
            new_yaw_err = pinched
        new_yaw = (
            wrap_angle(self.scene.socket_yaw + new_yaw_err)
            if yaw_clamped
            else wrap_angle(st.ee_yaw + dyaw)
        )

        # lateral, constrained by bore / collar walls when below the lip
        want = rel + dlat
        new_rel = want
        lat_clamped = False
        r = float(np.hypot(*rel))
        if z < lip:
            if r <= cfg.socket_tolerance:
                wn = float(np.hypot(*want))
                if wn > cfg.socket_tolerance:
                    new_rel = want * (cfg.socket_tolerance / wn)
                    lat_clamped = True
            elif r > cfg.collar_radius:
                wn = float(np.hypot(*want))
                if wn < cfg.collar_radius:
                    new_rel = (
                        want * (cfg.collar_radius / wn)
                        if wn > 1e-12
                        else np.array([cfg.collar_radius, 0.0])
                    )
                    lat_clamped = True
        if lat_clamped:
            blocked_lat = want - new_rel
            wrench[:2] = -self._world_vec(blocked_lat) / cfg.translation_cap

        # vertical against the floor at the new lateral position
        new_r = float(np.hypot(*new_rel))
        floor = self._floor_height(new_r, new_yaw_err, held)
        want_z = z + dpos[2]
        new_z = max(want_z, floor)
        if want_z < new_z:
            wrench[2] = (new_z - want_z) / cfg.translation_cap
            if dpos[2] < -1e-12 and abs(new_z - z) < 0.1 * abs(dpos[2]):
                tags.append("stuck_contact")

        np.clip(wrench, -WRENCH_CLIP, WRENCH_CLIP, out=wrench)
        if lat_clamped:
            sx, sy = self.scene.socket_position
            new_xy = np.array([sx, sy]) + self._world_vec(new_rel) - (tip - st.ee_position[:2])
        else:
            # unblocked motion stays in world coordinates: exact, no frame round trip
            new_xy = st.ee_position[:2] + dpos[:2]
        return np.array([new_xy[0], new_xy[1], new_z]), new_yaw, wrench, tags

    def _resolve_flat_motion(self, dpos, dyaw):
        """Table-plane motion with no socket: floor at z=0."""
        st = self.state
        cfg = self.config
        wrench = np.zeros(3)
        tags = []
        new_xy = st.ee_position[:2] + dpos[:2]
        want_z = st.ee_position[2] + dpos[2]
        new_z = max(want_z, 0.0)
        if want_z < new_z:
            wrench[2] = min((new_z - want_z) / cfg.translation_cap, WRENCH_CLIP)
            if dpos[2] < -1e-12 and abs(new_z - st.ee_position[2]) < 0.1 * abs(dpos[2]):
                tags.append("stuck_contact")
        return np.array([new_xy[0], new_xy[1], new_z]), wrap_angle(st.ee_yaw + dyaw), wrench, tags

    # -- step ------------------------------------------------------------

    def step(self, action: Action) -> StepResult:
        if self._done:
            raise RuntimeError("step() after episode end; call reset() first")
        cfg = self.config
        st = self.state
        delta = np.asarray(action.delta, dtype=np.float64)
        if delta.shape != (4,):
            raise ValueError(f"action delta must be a 4-vector, got shape {delta.shape}")
        if np.any(np.abs(delta) > 1.0 + 1e-9) or not np.all(np.isfinite(delta)):
            raise ValueError("action delta components must lie in [-1, 1]")
        if action.gripper not in (0, 1):
            raise ValueError("gripper command must be 0 or 1")

        dpos = delta[:3] * cfg.translation_cap
        dyaw = float(delta[3]) * cfg.yaw_cap
        tags: list[str] = []

        uses_socket = cfg.task_kind in ("insertion", "connector", "assembly")
        if uses_socket:
            new_pos, new_yaw, wrench, motion_tags = self._resolve_socket_motion(dpos, dyaw)
        else:
            new_pos, new_yaw, wrench, motion_tags = self._resolve_flat_motion(dpos, dyaw)
        tags.extend(motion_tags)

        new_pos[0] = float(np.clip(new_pos[0], *sc.WORKSPACE_X))
        new_pos[1] = float(np.clip(new_pos[1], *sc.WORKSPACE_Y))
        new_pos[2] = float(np.clip(new_pos[2], *sc.WORKSPACE_Z))

        prev_pos = st.ee_position.copy()
        prev_yaw = st.ee_yaw
        st.ee_velocity = np.array(
            [
                new_pos[0] - prev_pos[0],
                new_pos[1] - prev_pos[1],
                new_pos[2] - prev_pos[2],
                wrap_angle(new_yaw - prev_yaw),
            ]
        )
        st.ee_position = new_pos
        st.ee_yaw = new_yaw
        st.wrench = wrench

        dropped_fatal = False
        if action.gripper == 1 and st.gripper == "open":
            st.gripper = "closed"
            grabbed = self._try_grasp()
            if not grabbed:
                tags.append("premature_close")
        elif action.gripper == 0 and st.gripper == "closed":
            st.gripper = "open"
            if st.held_object is not None:
                drop_tags, dropped_fatal = self._release_object()
                tags.extend(drop_tags)

        success = self._check_success()
        self._update_phase(success)

        st.step_index += 1
        done = success or dropped_fatal or st.step_index >= cfg.episode_horizon
        if done and not success:
            tags.append("timeout" if st.step_index >= cfg.episode_horizon else "failed")
        self._done = done
        reward = 1.0 if success else 0.0
        obs = build_observation(st, self.scene)
        return StepResult(obs, reward, done, success, tuple(tags))

    # -- grasp / release (pick_place and assembly) -----------------------

    def _try_grasp(self) -> bool:
        st = self.state
        cfg = self.config
        if cfg.task_kind not in ("pick_place", "assembly") or st.held_object is not None:
            return False
        obj = np.asarray(self.scene.object_position)
        gap = float(np.hypot(*(st.ee_position[:2] - obj)))
        grasp_tol = cfg.socket_tolerance if cfg.task_kind == "pick_place" else sc.GRASP_Z / 2
        grasp_tol = max(grasp_tol, 0.01)
        if gap <= grasp_tol and st.ee_position[2] <= sc.GRASP_Z:
            st.held_object = cfg.variant_id
            return True
        if gap <= sc.KNOCK_RADIUS and st.ee_position[2] <= sc.GRASP_Z + 0.01:
            # a badly aimed close shoves the object away from the tip
            away = obj - st.ee_position[:2]
            n = float(np.hypot(*away))
            direction = away / n if n > 1e-9 else np.array([1.0, 0.0])
            shifted = obj + direction * sc.KNOCK_SHIFT
            self.scene = self.scene.with_object_at(tuple(shifted))
        return False

    def _release_object(self) -> tuple[list[str], bool]:
        st = self.state
        cfg = self.config
        st.held_object = None
        if cfg.task_kind == "pick_place":
            d = float(np.hypot(*(st.ee_position[:2] - np.asarray(sc.BOWL_CENTER))))
            if d <= sc.BOWL_RADIUS and st.ee_position[2] <= sc.DROP_Z_MAX:
                st.phase = "placed"
                return [], False
            if d <= sc.BOWL_RADIUS:
                # released too high: bounces off the rim and out
                out = st.ee_position[:2] - np.asarray(sc.BOWL_CENTER)
                n = float(np.hypot(*out))
                direction = out / n if n > 1e-9 else np.array([1.0, 0.0])
                landing = np.asarray(sc.BOWL_CENTER) + direction * (sc.BOWL_RADIUS + 0.03)
                self.scene = self.scene.with_object_at(tuple(landing))
                return ["dropped_early"], False
            self.scene = self.scene.with_object_at(tuple(st.ee_position[:2]))
            return ["dropped_early"], False
        if cfg.task_kind == "assembly":
            self.scene = self.scene.with_object_at(tuple(st.ee_position[:2]))
            return ["dropped_early"], False
        # insertion / connector: the episode cannot recover from a drop
        return ["dropped_early"], True

    # -- bookkeeping -----------------------------------------------------

    def _check_success(self) -> bool:
        st = self.state
        cfg = self.config
        if cfg.task_kind == "pick_place":
            return st.phase == "placed"
        if st.held_object is None:
            return False
        rel = self._socket_frame(self._tip_xy())
        aligned = (
            float(np.hypot(*rel)) <= cfg.socket_tolerance
            and abs(wrap_angle(st.ee_yaw - self.scene.socket_yaw)) <= cfg.yaw_tolerance
        )
        return aligned and st.ee_position[2] <= -cfg.insert_depth + 1e-9

    def _update_phase(self, success: bool):
        st = self.state
        if success:
            st.phase = "placed" if self.config.task_kind == "pick_place" else "inserted"
            return
        rank = PHASE_RANK[st.phase]
        if st.held_object is not None and rank < 1 and self.config.task_kind in ("pick_place", "assembly"):
            st.phase = "grasped"
            return
        if rank == 0:
            st.phase = "contact" if float(np.max(np.abs(st.wrench))) > 0.0 else "approach"


def make_env(task_kind: str, variant_id: str | None = None, **overrides) -> ManipulationEnv:
    return ManipulationEnv(sc.make_scene_config(task_kind, variant_id, **overrides))
