"""Simulated desk-scale manipulation tasks with scripted controllers."""

from distillab.envs.controllers import demo_action, oracle_action, scripted_policy
from distillab.envs.env import (
    Action,
    EnvState,
    ManipulationEnv,
    Observation,
    StepResult,
    make_env,
    wrap_angle,
)
from distillab.envs.features import (
    FEATURE_DIM,
    build_observation,
    feature_vector,
    relative_position_from_features,
)
from distillab.envs.scenes import (
    SEEN_CONNECTORS,
    TASK_KINDS,
    TASK_VARIANTS,
    UNSEEN_CONNECTORS,
    VARIANTS,
    ConfigurationError,
    Scene,
    SceneConfig,
    make_scene_config,
    variant_index,
)

__all__ = [
    "Action",
    "ConfigurationError",
    "EnvState",
    "FEATURE_DIM",
    "ManipulationEnv",
    "Observation",
    "SEEN_CONNECTORS",
    "Scene",
    "SceneConfig",
    "StepResult",
    "TASK_KINDS",
    "TASK_VARIANTS",
    "UNSEEN_CONNECTORS",
    "VARIANTS",
    "build_observation",
    "demo_action",
    "feature_vector",
    "make_env",
    "make_scene_config",
    "oracle_action",
    "relative_position_from_features",
    "scripted_policy",
    "variant_index",
    "wrap_angle",
]
