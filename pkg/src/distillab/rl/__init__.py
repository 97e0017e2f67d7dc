from distillab.rl.buffers import (
    AppendBuffer,
    Batch,
    BufferError,
    ReplayBuffers,
    RingBuffer,
    SOURCES,
    SOURCE_CODE,
    Transition,
    episode_to_transitions,
    sample_batch,
    seed_demo_buffer,
)
from distillab.rl.classifier import (
    ClassifierError,
    RewardClassifier,
    classifier_data_from_episodes,
    train_reward_classifier,
)
from distillab.rl.loop import (
    RLConfig,
    RLConfigError,
    actor_policy,
    env_action_to_native,
    evaluate_policy,
    native_act_dim,
    native_to_env_action,
    run_training,
    update,
)
from distillab.rl.sac import (
    LOG_STD_MAX,
    LOG_STD_MIN,
    SACAgent,
    actor_forward,
    actor_loss_and_grads,
    alpha_loss_and_grad,
    bounded_log_std,
    critic_loss_and_grads,
    critic_targets,
    polyak_update,
)

__all__ = [
    "AppendBuffer",
    "Batch",
    "BufferError",
    "ClassifierError",
    "LOG_STD_MAX",
    "LOG_STD_MIN",
    "ReplayBuffers",
    "RewardClassifier",
    "RingBuffer",
    "RLConfig",
    "RLConfigError",
    "SACAgent",
    "SOURCES",
    "SOURCE_CODE",
    "Transition",
    "actor_forward",
    "actor_loss_and_grads",
    "actor_policy",
    "alpha_loss_and_grad",
    "bounded_log_std",
    "classifier_data_from_episodes",
    "critic_loss_and_grads",
    "critic_targets",
    "env_action_to_native",
    "episode_to_transitions",
    "evaluate_policy",
    "native_act_dim",
    "native_to_env_action",
    "polyak_update",
    "run_training",
    "sample_batch",
    "seed_demo_buffer",
    "train_reward_classifier",
    "update",
]
