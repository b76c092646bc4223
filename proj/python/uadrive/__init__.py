"""Longitudinal driving under injected perception uncertainty.

Thin Python layer over the C++ core: simulator, environment, PPO training,
deterministic testing, episode logs and behavior metrics.
"""

from ._core import (
    DrivingEnv,
    EpisodeKind,
    PerturbationCase,
    apply_inertia,
    compute_reward,
    encode_uncertainty,
    load_episode_log,
    metrics_from_logs,
    observation_size,
    quantile_type7,
    replay,
    sample_mpc_schedule,
    select_best,
    test_policy,
    train,
)

__all__ = [
    "DrivingEnv",
    "EpisodeKind",
    "PerturbationCase",
    "apply_inertia",
    "compute_reward",
    "encode_uncertainty",
    "load_episode_log",
    "metrics_from_logs",
    "observation_size",
    "quantile_type7",
    "replay",
    "sample_mpc_schedule",
    "select_best",
    "test_policy",
    "train",
]
