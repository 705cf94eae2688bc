"""Exhaustive check that greedy play under the episodic-max shaped reward
recovers the optimal joint policy of a small deterministic game."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError
from .shaping import TabularShapedReward

TIE_TOL = 1e-12


@dataclass
class ToyGame:
    """Deterministic finite-horizon game with a fixed initial state 0.

    ``next_state[t][s]`` and ``reward[t][s]`` are arrays indexed by the joint
    action (one axis per agent); rewards are shared by all agents.
    """

    n_agents: int
    n_actions: int
    T: int
    next_state: list
    reward: list

    def joint_actions(self):
        return itertools.product(range(self.n_actions), repeat=self.n_agents)

    def check_structure(self):
        if self.n_agents < 1 or self.n_actions < 1 or self.T < 1:
            raise PreconditionError("game needs at least one agent, action and step")
        if len(self.next_state) != self.T or len(self.reward) != self.T:
            raise PreconditionError("transition and reward tables must cover every step")
        shape = (self.n_actions,) * self.n_agents
        for t in range(self.T):
            for s in self.reachable(t):
                if s not in self.reward[t] or s not in self.next_state[t]:
                    raise PreconditionError(f"state {s} at step {t} has no transition")
                if np.shape(self.reward[t][s]) != shape or np.shape(self.next_state[t][s]) != shape:
                    raise PreconditionError("tables must be indexed by the joint action")

    def reachable(self, t: int) -> set:
        states = {0}
        for k in range(t):
            states = {int(self.next_state[k][s][ja]) for s in states for ja in self.joint_actions()}
        return states


def random_toy_game(rng, n_agents: int, n_actions: int, T: int, n_states: int = 3) -> ToyGame:
    shape = (n_actions,) * n_agents
    next_state, reward = [], []
    for t in range(T):
        sources = [0] if t == 0 else range(n_states)
        next_state.append({s: rng.integers(0, n_states, size=shape) for s in sources})
        reward.append({s: rng.uniform(0.0, 1.0, size=shape) for s in sources})
    return ToyGame(n_agents, n_actions, T, next_state, reward)


def optimal_policy(game: ToyGame):
    """Backward induction. Returns ``(V, policy)`` keyed by ``(t, state)``.

    Raises :class:`PreconditionError` if any reachable state has more than
    one optimal joint action.
    """
    V, policy = {}, {}
    for t in range(game.T - 1, -1, -1):
        for s in game.reachable(t):
            q = {}
            for ja in game.joint_actions():
                nxt = int(game.next_state[t][s][ja])
                q[ja] = float(game.reward[t][s][ja]) + (V[(t + 1, nxt)] if t + 1 < game.T else 0.0)
            ranked = sorted(q.items(), key=lambda kv: -kv[1])
            if len(ranked) > 1 and ranked[0][1] - ranked[1][1] <= TIE_TOL:
                raise PreconditionError(f"state {s} at step {t} has tied optimal actions")
            policy[(t, s)] = ranked[0][0]
            V[(t, s)] = ranked[0][1]
    return V, policy


def shaped_table(game: ToyGame) -> TabularShapedReward:
    """Visit every joint action sequence once and record per-agent episodic maxima."""
    table = TabularShapedReward()
    for seq in itertools.product(list(game.joint_actions()), repeat=game.T):
        s, ret, keys = 0, 0.0, []
        for t, ja in enumerate(seq):
            for j, a in enumerate(ja):
                keys.append((j, t, s, a))
            ret += float(game.reward[t][s][ja])
            s = int(game.next_state[t][s][ja])
        table.update(keys, ret)
    return table


def shaped_greedy_is_optimal(game: ToyGame) -> bool:
    """True iff the shaped-reward greedy policy equals the optimal policy
    at every state the optimal policy visits from the initial state."""
    game.check_structure()
    _, pi_star = optimal_policy(game)
    table = shaped_table(game)
    s = 0
    for t in range(game.T):
        greedy = []
        for j in range(game.n_agents):
            vals = [table.value((j, t, s, a)) for a in range(game.n_actions)]
            order = np.argsort(vals)[::-1]
            if len(vals) > 1 and vals[order[0]] - vals[order[1]] <= TIE_TOL:
                return False
            greedy.append(int(order[0]))
        if tuple(greedy) != pi_star[(t, s)]:
            return False
        s = int(game.next_state[t][s][pi_star[(t, s)]])
    return True
