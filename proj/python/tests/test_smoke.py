import math

import numpy as np
import pytest

import uadrive


def test_inertia_examples():
    assert uadrive.apply_inertia(0.5, -0.2) == pytest.approx(0.45)
    assert uadrive.apply_inertia(0.5, 0.2) == pytest.approx(0.47)
    assert uadrive.apply_inertia(-1.0, -1.0) == -1.0
    with pytest.raises(ValueError):
        uadrive.apply_inertia(1.5, 0.0)


def test_reward_and_observation_layout():
    assert uadrive.compute_reward(0, 0.2) == pytest.approx(1.0)
    assert uadrive.compute_reward(10, 0.2, uadrive.EpisodeKind.collided) == -50.0
    assert uadrive.compute_reward(10, 0.2, uadrive.EpisodeKind.finished) == 100.0
    assert uadrive.observation_size(False) == 106
    assert uadrive.observation_size(True) == 110
    assert uadrive.encode_uncertainty(uadrive.PerturbationCase.VEXV) == [1, 0, 0, 0]
    assert uadrive.encode_uncertainty(uadrive.PerturbationCase.VEVV) == [0, 0, 0, 0]


def test_mpc_schedule_covers_horizon():
    segments = uadrive.sample_mpc_schedule(3, 1000)
    assert sum(d for _, d in segments) >= 1000
    assert {d for _, d in segments} <= {50, 100, 150, 200, 400}


def test_quantile():
    assert uadrive.quantile_type7([4.0, 1.0, 3.0, 2.0], 0.5) == 2.5


def test_environment_episode():
    env = uadrive.DrivingEnv("mpc", informed=True)
    obs = env.reset(11, 12)
    assert obs["vision"].shape == (25, 4)
    assert obs["uncertainty"].shape == (4,)
    total = 0.0
    while not env.done:
        step = env.step(0.3)
        total += step["reward"]
    assert step["kind"] != uadrive.EpisodeKind.running
    assert math.isfinite(total)
    with pytest.raises(RuntimeError):
        env.step(0.0)


def test_train_test_replay(tmp_path):
    run = tmp_path / "run"
    result = uadrive.train(1, run, steps=4096, seed=3)
    assert result["global_step"] == 4096
    assert result["candidates"]
    best = tmp_path / "best.ckpt"
    index, means = uadrive.select_best(result["candidates"], best, 1)
    assert 0 <= index < len(result["candidates"])
    logs = tmp_path / "logs"
    metrics = uadrive.test_policy(best, "vevv", episodes=3, log_dir=logs)
    assert metrics["episodes"] == 3
    rates = sum(metrics[k] for k in ("finish_rate", "collision_rate", "timeout_rate", "stalled_rate"))
    assert rates == pytest.approx(1.0)
    paths = sorted(logs.glob("*.jsonl"))
    assert len(paths) == 3
    for p in paths:
        assert uadrive.replay(p)["ok"]
    log = uadrive.load_episode_log(paths[0])
    assert isinstance(log["a"], np.ndarray)
    assert len(log["a"]) == len(log["front_gap"])
    assert uadrive.metrics_from_logs(paths)["episodes"] == 3
