"""Desk-scale policy-distillation laboratory.

Trains specialist reinforcement-learning policies on simulated
precise-manipulation tasks, harvests their rollouts into curated datasets,
distills those datasets into multi-task policies by supervised fine-tuning,
and provides the analysis tooling for comparing rollout-generated data
against scripted-demonstrator data.
"""

__version__ = "0.1.0"
