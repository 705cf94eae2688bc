import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from yieldalloc.allocator import assign
from yieldalloc.errors import BudgetError, ConfigError
from yieldalloc.oracle import (
    betas,
    brute_force_optimal,
    center_alphas,
    dual_bound,
    dual_subgradient,
    oracle_yield,
    solve_dual,
    verify_complementary_slackness,
)
from yieldalloc.scenario import Contract, GeneratorSpec, Scenario, generate_scenario


def tiny(m, n, seed, T=2):
    """Random small instance; demands may be zero and never exceed supply."""
    rng = np.random.default_rng(seed)
    d = rng.integers(0, max(1, n // m) + 1, size=m)
    while d.sum() > n:
        d[rng.integers(m)] -= 1
        d = np.maximum(d, 0)
    cs = [Contract(j + 1, int(d[j]), float(rng.uniform(0.5, 1.5)), float(rng.uniform(0.5, 3.0)),
                   float(rng.uniform(0.0, 2.0))) for j in range(m)]
    b = np.sort(rng.lognormal(0.0, 0.5, size=(n, 2)), axis=1)
    steps = np.sort(rng.integers(1, T + 1, size=n))
    return Scenario(cs, T, np.arange(1, n + 1), steps, b[:, 1], b[:, 0], rng.beta(2.0, 2.0, size=(n, m)))


def test_two_impression_example():
    s = Scenario([Contract(1, 1, 1.0, 1.0, 0.0)], 1, [1, 2], [1, 1], [0.2, 0.8], [0.2, 0.8], [[0.0], [0.0]])
    sol = solve_dual(s)
    assert 0.2 < sol.alpha_star[0] <= 0.8
    assert assign(s, sol.alpha_star).tolist() == [0, -1]
    assert sol.primal_yield == pytest.approx(1.8, abs=1e-12)
    # enumerate all four allocations by hand: {none, first, second, both}
    assert brute_force_optimal(s)[1] == pytest.approx(max(1.0 - 1.0 + 1.0, 1.0 + 0.8, 1.0 + 0.2, 1.0))


def test_no_demand_sends_everything_to_rtb():
    rng = np.random.default_rng(4)
    b2 = rng.uniform(0.1, 1.0, 30)
    s = Scenario([Contract(1, 0, 1.0, 1.0, 0.0), Contract(2, 0, 1.0, 2.0, 0.0)], 3, np.arange(1, 31),
                 np.repeat([1, 2, 3], 10), b2, b2, rng.uniform(0, 1, (30, 2)))
    sol = solve_dual(s)
    assert np.all(sol.alpha_star == 0)
    assert np.all(assign(s, sol.alpha_star) == -1)
    assert sol.primal_yield == pytest.approx(b2.sum(), rel=1e-12)


def test_brute_force_empty_day():
    cs = [Contract(1, 3, 2.0, 0.5, 1.0), Contract(2, 1, 1.0, 1.5, 1.0)]
    s = Scenario(cs, 1, [], [], [], [], np.zeros((0, 2)))
    assert brute_force_optimal(s)[1] == pytest.approx((2.0 - 0.5) * 3 + (1.0 - 1.5) * 1)


def test_brute_force_rtb_dominance():
    # lambda q + p = 0.2 + 0.3 < 1.0, so selling to RTB beats paying the penalty
    s = Scenario([Contract(1, 1, 2.0, 0.3, 1.0)], 1, [1], [1], [1.0], [1.0], [[0.2]])
    winners, y = brute_force_optimal(s)
    assert winners.tolist() == [-1]
    assert y == pytest.approx(2.0 - 0.3 + 1.0)


def test_brute_force_budget():
    with pytest.raises(BudgetError):
        brute_force_optimal(tiny(3, 12, 0), budget=10**6)


def test_solver_argument_checks():
    s = tiny(1, 3, 0)
    with pytest.raises(ConfigError):
        solve_dual(s, tol=0)
    with pytest.raises(ConfigError):
        solve_dual(s, max_iters=0)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 2), n=st.integers(1, 10), seed=st.integers(0, 10**6))
def test_dual_matches_brute_force(m, n, seed):
    s = tiny(m, n, seed)
    sol = solve_dual(s, tol=1e-9)
    _, best = brute_force_optimal(s)
    assert sol.primal_yield == pytest.approx(best, abs=1e-9)
    # the LP is totally unimodular so the dual bound closes on the integer optimum
    assert sol.dual_objective >= best - 1e-9


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 3), n=st.integers(1, 7), seed=st.integers(0, 10**6),
       alpha=st.lists(st.floats(0, 4), min_size=3, max_size=3))
def test_weak_duality_at_any_shift(m, n, seed, alpha):
    s = tiny(m, n, seed)
    assert dual_bound(s, alpha[:m]) >= brute_force_optimal(s)[1] - 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6),
       a=st.lists(st.floats(0, 3), min_size=3, max_size=3),
       b=st.lists(st.floats(0, 3), min_size=3, max_size=3))
def test_subgradient_inequality(seed, a, b):
    s = tiny(3, 40, seed)
    a, b = np.clip(a, 0, s.penalty), np.clip(b, 0, s.penalty)
    g = dual_subgradient(s, a)
    assert dual_bound(s, b) >= dual_bound(s, a) + g @ (b - a) - 1e-9


def test_subgradient_matches_finite_difference_away_from_kinks():
    s = tiny(2, 50, 3)
    a = np.array([0.37, 0.41]) * s.penalty
    g = dual_subgradient(s, a)
    h = 1e-7
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (dual_bound(s, a + e) - dual_bound(s, a - e)) / (2 * h)
        assert fd == pytest.approx(g[j], abs=1e-5)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 3), n=st.integers(1, 9), seed=st.integers(0, 10**6))
def test_optimal_pair_is_certified(m, n, seed):
    s = tiny(m, n, seed)
    sol = solve_dual(s, tol=1e-9)
    rep = verify_complementary_slackness(s, assign(s, sol.alpha_star), sol, tol=1e-6)
    assert rep.certified, rep.by_family
    assert np.all(sol.beta_star >= 0)
    assert np.all((sol.alpha_star >= 0) & (sol.alpha_star <= s.penalty))
    bids = s.q * s.quality_weight + sol.alpha_star
    assert np.all(sol.beta_star[:, None] >= bids - s.b2[:, None] - 1e-12)


def test_perturbed_shifts_are_not_certified():
    s = tiny(2, 10, 5)
    sol = solve_dual(s, tol=1e-9)
    bad = np.minimum(sol.alpha_star + 0.5 * s.penalty, s.penalty)
    probe = dataclasses.replace(sol, alpha_star=bad, beta_star=betas(s, bad))
    rep = verify_complementary_slackness(s, assign(s, bad), probe)
    assert rep.violations >= 1


def test_empty_scenario_is_vacuously_certified():
    s = Scenario([Contract(1, 0, 1.0, 1.0, 1.0)], 1, [], [], [], [], np.zeros((0, 1)))
    sol = solve_dual(s)
    assert verify_complementary_slackness(s, assign(s, sol.alpha_star), sol).certified


def test_centering_never_raises_the_dual():
    s = tiny(3, 200, 9, T=4)
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = rng.uniform(0, 1, 3) * s.penalty
        assert dual_bound(s, center_alphas(s, a)) <= dual_bound(s, a) + 1e-9


def test_large_instance_gap():
    s = generate_scenario(GeneratorSpec(m=8, n=10_000, T=24), 2)
    sol = solve_dual(s, tol=1e-3)
    assert sol.converged and sol.relative_gap <= 1e-3
    assert sol.iterations <= 5000


def test_oracle_yield_switches_to_dual_bound():
    small = tiny(2, 5, 1)
    assert oracle_yield(small) == brute_force_optimal(small)[1]
    big = tiny(2, 40, 1)
    assert oracle_yield(big) == solve_dual(big).dual_objective
