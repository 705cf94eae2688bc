import numpy as np
import pytest

from yieldalloc.errors import PreconditionError
from yieldalloc.learner.shaped_greedy import (
    ToyGame,
    optimal_policy,
    random_toy_game,
    shaped_greedy_is_optimal,
)


def _two_agent_game():
    # step 0 from state 0: coordinating on (1, 1) leads to the rich state 1
    r0 = np.array([[0.5, 0.0], [0.0, 0.2]])
    n0 = np.array([[0, 0], [0, 1]])
    r1 = {0: np.array([[0.1, 0.0], [0.0, 0.3]]), 1: np.array([[2.0, 0.0], [0.0, 0.0]])}
    n1 = {0: np.zeros((2, 2), int), 1: np.zeros((2, 2), int)}
    return ToyGame(2, 2, 2, [{0: n0}, n1], [{0: r0}, r1])


def test_two_agent_game_prefers_the_delayed_payoff():
    game = _two_agent_game()
    V, pi = optimal_policy(game)
    # all 16 joint sequences: (1,1) then (0,0) earns 2.2, the myopic (0,0) first caps at 0.8
    assert pi[(0, 0)] == (1, 1) and V[(0, 0)] == pytest.approx(2.2)
    assert shaped_greedy_is_optimal(game)


def test_tied_optimum_is_rejected():
    game = _two_agent_game()
    game.reward[1][1] = np.array([[2.0, 0.0], [0.0, 2.0]])
    with pytest.raises(PreconditionError):
        shaped_greedy_is_optimal(game)


def test_single_agent_single_step():
    r = np.array([0.3, 0.9, 0.1])
    game = ToyGame(1, 3, 1, [{0: np.zeros(3, int)}], [{0: r}])
    assert optimal_policy(game)[1][(0, 0)] == (1,)
    assert shaped_greedy_is_optimal(game)


def test_malformed_tables():
    with pytest.raises(PreconditionError):
        shaped_greedy_is_optimal(ToyGame(1, 2, 2, [{0: np.zeros(2, int)}], [{0: np.ones(2)}]))
    with pytest.raises(PreconditionError):
        shaped_greedy_is_optimal(ToyGame(1, 2, 1, [{0: np.zeros(3, int)}], [{0: np.ones(3)}]))


@pytest.mark.parametrize("seed", range(20))
def test_random_games(seed):
    rng = np.random.default_rng(seed)
    game = random_toy_game(rng, int(rng.integers(2, 4)), int(rng.integers(2, 4)), int(rng.integers(1, 4)))
    assert shaped_greedy_is_optimal(game)
