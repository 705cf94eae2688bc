import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yieldalloc.allocator import run_fixed
from yieldalloc.errors import StateError
from yieldalloc.marlenv import ACTION_BOUND, AllocationEnv, Transition, episode_return, write_trace_csv
from yieldalloc.oracle import solve_dual
from yieldalloc.scenario import Contract, GeneratorSpec, Scenario, generate_scenario


def _scenario(seed=0, m=3, n=3000, T=8):
    return generate_scenario(GeneratorSpec(m=m, n=n, T=T), seed)


def test_reset_observation():
    env = AllocationEnv(_scenario())
    obs = env.reset()
    assert obs.shape == (3, 5)
    assert np.all(obs[:, 0] == 0.0) and np.all(obs[:, 1] == 1.0)
    assert np.array_equal(obs, env.reset())


def test_alpha_fraction_reflects_the_initial_shift():
    s = _scenario()
    sol = solve_dual(s)
    obs = AllocationEnv(s, sol.alpha_star).reset()
    assert np.allclose(obs[:, 3], sol.alpha_star / s.penalty)


def test_zero_actions_from_optimal_shifts_reach_the_bound():
    s = _scenario(1, n=2000, T=4)
    sol = solve_dual(s, tol=1e-6)
    env = AllocationEnv(s, sol.alpha_star)
    report, trs = env.rollout(lambda o: np.zeros(s.m), record=True)
    total = episode_return(trs)[0] + env.episode_constant
    assert total == pytest.approx(report.yield_, rel=1e-12)
    assert abs(total / sol.dual_objective - 1.0) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), policy_seed=st.integers(0, 10_000))
def test_rewards_telescope_to_the_final_yield(seed, policy_seed):
    s = _scenario(seed, n=400, T=6)
    rng = np.random.default_rng(policy_seed)
    env = AllocationEnv(s)
    report, trs = env.rollout(lambda o: rng.uniform(-ACTION_BOUND, ACTION_BOUND, s.m), record=True)
    total = episode_return(trs)[0] + env.episode_constant
    assert total == pytest.approx(report.yield_, rel=1e-9, abs=1e-9)
    assert all(np.all(tr.reward == tr.reward[0]) for tr in trs)


def test_step_without_impressions():
    s = Scenario([Contract(1, 1, 1.0, 1.0, 1.0, 0.5)], 3, [1, 2], [1, 3], [1.0, 1.0], [0.5, 0.5], [[0.1], [0.2]])
    env = AllocationEnv(s)
    env.reset()
    first, _, _ = env.step([0.0])
    second, r, done = env.step([0.0])
    assert r[0] == 0.0 and not done
    assert second[0, 0] - first[0, 0] == pytest.approx(1 / 3)
    # cumulative state is untouched; the per-step features report an idle step
    assert np.array_equal(second[:, [1, 3]], first[:, [1, 3]])
    assert np.all(second[:, [2, 4]] == 0.0)


def test_stepping_a_finished_episode():
    env = AllocationEnv(_scenario(T=2))
    with pytest.raises(StateError):
        env.step(np.zeros(3))
    env.reset()
    with pytest.raises(StateError):
        env.final_report()
    env.step(np.zeros(3))
    env.step(np.zeros(3))
    with pytest.raises(StateError):
        env.step(np.zeros(3))


def test_actions_are_clipped_and_multiplicative():
    s = _scenario()
    env = AllocationEnv(s, alpha_init=0.5 * s.penalty)
    env.reset()
    env.step(np.full(3, 5.0))
    assert np.allclose(env.alpha, 0.5 * s.penalty * (1 + ACTION_BOUND))


def test_zero_shift_can_grow_again():
    s = _scenario()
    env = AllocationEnv(s, alpha_init=np.zeros(3))
    env.reset()
    env.step(np.full(3, ACTION_BOUND))
    assert np.all(env.alpha > 0)
    env.reset()
    env.step(np.full(3, -ACTION_BOUND))
    assert np.all(env.alpha == 0)


@pytest.mark.parametrize("rows, want", [([[0.0, 0.0], [0.0, 0.0]], 0.0), ([[1.0], [2.0], [3.0]], 6.0)])
def test_episode_return(rows, want):
    assert episode_return(rows)[0] == want


def test_optimal_shifts_beat_zero_shifts_on_a_profitable_instance():
    s = _scenario(3)
    assert np.all(s.penalty > 0)
    sol = solve_dual(s)
    good = AllocationEnv(s, sol.alpha_star).rollout(lambda o: np.zeros(s.m))[0]
    idle = AllocationEnv(s, np.zeros(s.m)).rollout(lambda o: np.zeros(s.m))[0]
    assert good.yield_ >= idle.yield_
    assert good.yield_ == pytest.approx(run_fixed(s, sol.alpha_star).yield_, rel=1e-12)


def test_trace_csv(tmp_path):
    s = _scenario(T=3)
    env = AllocationEnv(s)
    alphas = []
    obs = env.reset()
    trs = []
    while not env.done:
        step = env.t
        nxt, r, done = env.step(np.full(3, 0.05))
        alphas.append(env.alpha.copy())
        trs.append(Transition(obs, np.full(3, 0.05), r, nxt, done, env.episode, step))
        obs = nxt
    path = tmp_path / "trace.csv"
    write_trace_csv(trs, alphas, path, constant=env.episode_constant)
    rows = list(csv.DictReader(path.open()))
    assert [int(r["step"]) for r in rows] == [1, 2, 3]
    assert float(rows[-1]["cumulative_yield"]) == pytest.approx(env.final_report().yield_, rel=1e-12)
    assert float(rows[0]["alpha_1"]) == alphas[0][0]


def test_empty_trace(tmp_path):
    path = tmp_path / "t.csv"
    write_trace_csv([], [], path)
    assert path.read_text() == "step,reward,cumulative_yield\n"
