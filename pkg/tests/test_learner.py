import numpy as np
import pytest

from yieldalloc.errors import ConfigError, DivergenceError, StateError
from yieldalloc.learner import (
    PolicySet,
    TrainerConfig,
    critic_input_dim,
    evaluate_policy,
    train_maddpg,
    train_mapolo,
)
from yieldalloc.learner import policy as policy_mod
from yieldalloc.learner.toy import PeakedBandit
from yieldalloc.marlenv import OBS_DIM, AllocationEnv
from yieldalloc.oracle import solve_dual
from yieldalloc.scenario import GeneratorSpec, generate_scenario

# single-step bandits need several gradient steps per episode to move in 500 episodes
TOY = dict(episodes=500, seed=0, eval_every=50, updates_per_step=10)


@pytest.mark.parametrize("m", [2, 5, 25, 64])
def test_critic_input_dimensions(m):
    assert critic_input_dim("mapolo", m, OBS_DIM) == OBS_DIM + 1
    assert critic_input_dim("maddpg", m, OBS_DIM) == m * (OBS_DIM + 1)


def test_unknown_method():
    with pytest.raises(ConfigError):
        critic_input_dim("qmix", 2, OBS_DIM)


@pytest.mark.parametrize("bad", [dict(tau=0.0), dict(tau=1.5), dict(actor_lr=0.0), dict(noise_decay=0.0),
                                 dict(batch_size=0), dict(policy_delay=0), dict(squash_penalty=-1.0),
                                 dict(time_budget=0.0), dict(dtype="float16")])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        TrainerConfig(**bad).validate()


def test_config_from_mapping():
    assert TrainerConfig.from_mapping({"episodes": 3, "tau": 0.5}).tau == 0.5
    with pytest.raises(ConfigError):
        TrainerConfig.from_mapping({"episode": 3})


def _toy_result(train):
    env = PeakedBandit([0.037])
    best = env.best_by_scan()
    policy, curve = train(env, TrainerConfig(**TOY), r_star=env.optimum)
    return env, best, policy, curve


@pytest.mark.parametrize("train", [train_mapolo, train_maddpg], ids=["mapolo", "maddpg"])
def test_toy_bandit_converges_to_the_scanned_optimum(train):
    env, best, policy, curve = _toy_result(train)
    action = policy.act(env.reset())
    assert abs(action[0] - best[0]) <= 0.005
    assert curve.ratios[-1] >= 0.99


def test_training_is_reproducible():
    env = PeakedBandit([0.02, -0.05])
    cfg = TrainerConfig(episodes=40, seed=3, eval_every=10, updates_per_step=4, batch_size=8)
    a = train_mapolo(env, cfg, r_star=env.optimum)
    b = train_mapolo(env, cfg, r_star=env.optimum)
    assert a[1].ratios == b[1].ratios
    assert np.array_equal(a[0].act(env.reset()), b[0].act(env.reset()))


def test_nan_returns_abort_training():
    env = PeakedBandit([0.0], height=float("nan"))
    with pytest.raises(DivergenceError):
        train_mapolo(env, TrainerConfig(episodes=5, batch_size=2, eval_every=5), r_star=1.0)


def test_time_budget_stops_early():
    env = PeakedBandit([0.0])
    _, curve = train_maddpg(env, TrainerConfig(episodes=10_000, time_budget=0.5, batch_size=4), r_star=1.0)
    assert curve.episodes[-1] < 10_000
    assert sum(curve.episode_seconds) >= 0.5


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    pol = PolicySet(3, rng=rng, method="mapolo")
    pol.extra["critic"] = PolicySet(3, rng=rng).actor
    path = tmp_path / "ckpt.npz"
    pol.save(path)
    back = PolicySet.load(path)
    obs = rng.uniform(0, 1, (3, OBS_DIM))
    assert np.array_equal(back.act(obs), pol.act(obs))
    assert back.method == "mapolo" and set(back.extra) == {"critic"}
    assert all(np.array_equal(a, b) for a, b in zip(back.extra["critic"].params, pol.extra["critic"].params))


def test_checkpoint_version_mismatch(tmp_path, monkeypatch):
    path = tmp_path / "old.npz"
    monkeypatch.setattr(policy_mod, "CHECKPOINT_VERSION", 0)
    PolicySet(1).save(path)
    monkeypatch.undo()
    with pytest.raises(StateError):
        PolicySet.load(path)


def _profitable(seed=0):
    return generate_scenario(GeneratorSpec(m=3, n=4000, T=8), seed)


def test_static_optimal_policy_scores_one():
    s = _profitable()
    sol = solve_dual(s, tol=1e-6)
    env = AllocationEnv(s, sol.alpha_star)
    ratio = evaluate_policy(env, lambda o: np.zeros(s.m), sol.dual_objective)
    assert ratio >= 1 - 1e-6


def test_random_policy_does_not_beat_the_optimal_shifts():
    s = _profitable(1)
    sol = solve_dual(s)
    env = AllocationEnv(s, sol.alpha_star)
    best = evaluate_policy(env, lambda o: np.zeros(s.m), sol.dual_objective)
    for seed in range(5):
        rng = np.random.default_rng(seed)
        assert evaluate_policy(env, lambda o: rng.uniform(-0.1, 0.1, s.m), sol.dual_objective) <= best


def test_evaluation_needs_a_positive_reference():
    s = _profitable()
    with pytest.raises(ValueError):
        evaluate_policy(AllocationEnv(s), lambda o: np.zeros(s.m), 0.0)
