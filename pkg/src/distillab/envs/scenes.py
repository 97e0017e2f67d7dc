"""Scene configuration: task kinds, connector variants, and their geometry.

All lengths are meters, angles radians unless a field name says degrees.
The desk-scale board lives in the z=0 plane; sockets are bores that run
from a raised collar (lip) down to -insert_depth below the surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

TASK_KINDS = ("insertion", "connector", "pick_place", "assembly")

# variant_id -> (socket_tolerance m, socket_lip_height m)
# Connector geometry: three training fits plus four held-out fits whose
# (tolerance, lip) pairs fall outside the convex hull of the training trio.
VARIANTS = {
    "block": (0.0015, 0.004),  # insertion task object
    "usb": (0.0010, 0.003),
    "ethernet": (0.0012, 0.004),
    "vga": (0.0015, 0.005),
    "typec": (0.0007, 0.0025),
    "hdmi": (0.0019, 0.0065),
    "dp": (0.0009, 0.0050),
    "xlr": (0.0024, 0.0020),
    "pepper": (0.0100, 0.0),  # pick-and-place objects: tolerance doubles as grasp slack
    "corn": (0.0080, 0.0),
    "bracket": (0.0015, 0.004),  # assembly part
}
VARIANT_IDS = tuple(VARIANTS)
SEEN_CONNECTORS = ("usb", "ethernet", "vga")
UNSEEN_CONNECTORS = ("typec", "hdmi", "dp", "xlr")

TASK_VARIANTS = {
    "insertion": ("block",),
    "connector": SEEN_CONNECTORS + UNSEEN_CONNECTORS,
    "pick_place": ("pepper", "corn"),
    "assembly": ("bracket",),
}


class ConfigurationError(ValueError):
    pass


def variant_index(variant_id: str) -> int:
    """Stable integer id used for task conditioning of generalist policies."""
    try:
        return VARIANT_IDS.index(variant_id)
    except ValueError:
        raise ConfigurationError(f"unknown variant_id {variant_id!r}") from None


@dataclass(frozen=True)
class SceneConfig:
    task_kind: str
    variant_id: str
    socket_tolerance: float
    socket_lip_height: float
    workspace_randomization: tuple[float, float]  # socket/object draw window (w, h)
    rotation_randomization: float  # degrees, board yaw draw half-range
    episode_horizon: int
    control_hz: float = 10.0
    # geometry and motion limits not pinned by the source setup; exposed here
    yaw_tolerance: float = 0.05
    insert_depth: float = 0.012
    collar_radius: float = 0.02
    translation_cap: float = 0.005  # per-axis per-tick displacement limit
    yaw_cap: float = 0.08
    start_height: float = 0.15  # initial ee height above the plane
    start_randomization: float = 0.0  # ee initial (x, y) draw window width
    start_yaw_randomization: float = 0.0  # ee initial yaw half-range
    assembly_stage: str = "full"  # "full" or "insert" (pre-grasped over the board)
    grasp_jitter: float = 0.0  # per-episode in-gripper offset draw half-range

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise ConfigurationError(f"unknown task_kind {self.task_kind!r}")
        if self.variant_id not in TASK_VARIANTS[self.task_kind]:
            raise ConfigurationError(
                f"variant {self.variant_id!r} is not defined for task {self.task_kind!r}"
            )
        if self.socket_tolerance <= 0:
            raise ConfigurationError("socket_tolerance must be positive")
        if self.episode_horizon < 1:
            raise ConfigurationError("episode_horizon must be at least 1")
        if self.assembly_stage not in ("full", "insert"):
            raise ConfigurationError(f"unknown assembly_stage {self.assembly_stage!r}")

    @property
    def rotation_randomization_rad(self) -> float:
        return math.radians(self.rotation_randomization)


_TASK_DEFAULTS = {
    # object pre-grasped 15 cm above a board drawn in a 35 x 35 cm window at +/-15 deg
    "insertion": dict(
        variant_id="block",
        workspace_randomization=(0.35, 0.35),
        rotation_randomization=15.0,
        episode_horizon=200,
        start_height=0.15,
    ),
    # port fixed; connector pre-grasped in a 10 x 10 cm plane 5 cm above it
    "connector": dict(
        variant_id="usb",
        workspace_randomization=(0.0, 0.0),
        rotation_randomization=0.0,
        episode_horizon=120,
        start_height=0.05,
        start_randomization=0.10,
        start_yaw_randomization=0.15,
    ),
    # object drawn in an 18 x 18 cm window, bowl fixed past its edge
    "pick_place": dict(
        variant_id="pepper",
        workspace_randomization=(0.18, 0.18),
        rotation_randomization=0.0,
        episode_horizon=300,
        start_height=0.15,
    ),
    # board as in insertion; part drawn in a 3 x 7 cm grasp area
    "assembly": dict(
        variant_id="bracket",
        workspace_randomization=(0.35, 0.35),
        rotation_randomization=15.0,
        episode_horizon=300,
        start_height=0.15,
    ),
}


def make_scene_config(task_kind: str, variant_id: str | None = None, **overrides) -> SceneConfig:
    """Build a SceneConfig from per-task defaults.

    Connector variants pull their (tolerance, lip) pair from the variant
    table; everything else can be overridden by keyword.
    """
    if task_kind not in _TASK_DEFAULTS:
        raise ConfigurationError(f"unknown task_kind {task_kind!r}")
    kw = dict(_TASK_DEFAULTS[task_kind])
    if variant_id is not None:
        kw["variant_id"] = variant_id
    if kw["variant_id"] not in VARIANTS:
        raise ConfigurationError(f"unknown variant_id {kw['variant_id']!r}")
    tol, lip = VARIANTS[kw["variant_id"]]
    kw.setdefault("socket_tolerance", tol)
    kw.setdefault("socket_lip_height", lip)
    if task_kind == "assembly" and overrides.get("assembly_stage") == "insert":
        # pre-grasped restart 15 cm above the board, 5 x 5 cm lateral draw
        kw["start_randomization"] = 0.05
        kw["episode_horizon"] = 150
    kw.update(overrides)
    return SceneConfig(task_kind=task_kind, **kw)


@dataclass(frozen=True)
class Scene:
    """A realized scene: the config plus the poses drawn at reset."""

    config: SceneConfig
    socket_position: tuple[float, float]  # socket/bowl target center
    socket_yaw: float
    object_position: tuple[float, float]  # graspable object (pick_place, assembly)
    start_position: tuple[float, float, float]
    start_yaw: float
    grip_offset: tuple[float, float] = (0.0, 0.0)  # held-part tip offset from the ee

    def with_object_at(self, xy: tuple[float, float]) -> "Scene":
        return replace(self, object_position=(float(xy[0]), float(xy[1])))


# pick-and-place / assembly layout constants
BOWL_CENTER = (0.19, 0.0)
BOWL_RADIUS = 0.05
DROP_Z_MAX = 0.06  # releases above this bounce out of the bowl
GRASP_Z = 0.02  # tip must be at or below this to close on the object
KNOCK_RADIUS = 0.025  # close this near (but off) the object shoves it
KNOCK_SHIFT = 0.03
GRASP_AREA_CENTER = (-0.20, 0.0)  # assembly part draw area, ~20 cm from the board window
GRASP_AREA_SIZE = (0.03, 0.07)

WORKSPACE_X = (-0.40, 0.40)
WORKSPACE_Y = (-0.40, 0.40)
WORKSPACE_Z = (-0.02, 0.35)
