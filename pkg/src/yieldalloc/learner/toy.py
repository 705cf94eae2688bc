"""Single-step continuous-action environment with a known optimum.

Used to check that the trainers can find the best action when the answer
is available by scanning the action interval.
"""

from __future__ import annotations

import numpy as np

from ..errors import StateError
from ..marlenv import ACTION_BOUND, OBS_DIM
from ..report import YieldReport


class PeakedBandit:
    """Every agent sees a constant observation; the shared reward is
    ``height - curvature * sum_j (a_j - target_j)^2`` after one step."""

    def __init__(self, targets, height: float = 1.0, curvature: float = 50.0, action_bound: float = ACTION_BOUND):
        self.targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
        self.m = len(self.targets)
        self.T = 1
        self.height = float(height)
        self.curvature = float(curvature)
        self.action_bound = float(action_bound)
        self.done = False
        self.t = None
        self._obs = np.tile(np.array([0.0, 1.0, 0.0, 0.5, 0.0])[:OBS_DIM], (self.m, 1))

    def reward(self, actions) -> float:
        a = np.clip(np.asarray(actions, dtype=np.float64), -self.action_bound, self.action_bound)
        return self.height - self.curvature * float(np.sum((a - self.targets) ** 2))

    def best_by_scan(self, points: int = 2001) -> np.ndarray:
        """Per-agent argmax of the reward over a uniform grid of the action interval."""
        grid = np.linspace(-self.action_bound, self.action_bound, points)
        best = np.empty(self.m)
        for j in range(self.m):
            a = self.targets.copy()
            vals = []
            for g in grid:
                a[j] = g
                vals.append(self.reward(a))
            best[j] = grid[int(np.argmax(vals))]
        return best

    @property
    def optimum(self) -> float:
        return self.reward(self.best_by_scan())

    def reset(self, alpha_init=None) -> np.ndarray:
        self.done = False
        self.t = 1
        self._last = None
        return self._obs.copy()

    def step(self, actions):
        if self.t is None or self.done:
            raise StateError("episode finished; call reset()")
        self._last = self.reward(actions)
        self.done = True
        self.t = 2
        return self._obs.copy(), np.full(self.m, self._last), True

    def final_report(self, r_star=None) -> YieldReport:
        if not self.done:
            raise StateError("episode still running")
        return YieldReport.from_components(0.0, self._last, 0.0, r_star=r_star)

    def rollout(self, policy, alpha_init=None, record: bool = False):
        obs = self.reset(alpha_init)
        self.step(policy(obs))
        return self.final_report(), []
