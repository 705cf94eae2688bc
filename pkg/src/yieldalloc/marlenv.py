"""Episodic multi-agent game over one scenario: one agent per contract.

Each step every agent scales its bid shift by ``1 + a_j`` and the step's
impressions are allocated under the new shifts. All agents receive the same
reward: RTB revenue plus quality value earned in the step, plus ``p_j`` for
every unit of demand the step newly fulfilled. Over an episode the rewards
sum to the final yield minus ``sum_j (c_j - p_j) d_j``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .allocator import Ledger, clamp_alphas, finalize
from .errors import StateError
from .report import YieldReport
from .scenario import Scenario

OBS_DIM = 5
ACTION_BOUND = 0.1
# multiplicative updates cannot leave 0; shifts are rescaled from at least this fraction of p
ALPHA_FLOOR_FRACTION = 0.01


@dataclass
class Transition:
    obs: np.ndarray        # (m, OBS_DIM)
    action: np.ndarray     # (m,)
    reward: np.ndarray     # (m,), identical entries
    next_obs: np.ndarray
    done: bool
    episode: int
    step: int


@dataclass
class RewardNormalizer:
    """Running max of |reward|; persists across episodes of one environment."""

    scale: float = 0.0

    def update(self, r: float) -> None:
        self.scale = max(self.scale, abs(r))

    def __call__(self, r: float) -> float:
        return r / self.scale if self.scale > 0 else 0.0


class AllocationEnv:
    def __init__(self, scenario: Scenario, alpha_init=None, action_bound: float = ACTION_BOUND,
                 normalizer: RewardNormalizer | None = None):
        self.s = scenario
        self.m = scenario.m
        self.T = scenario.T
        self.action_bound = float(action_bound)
        self.default_alpha = clamp_alphas(scenario.alpha_init if alpha_init is None else alpha_init,
                                          scenario.penalty)
        self.normalizer = normalizer if normalizer is not None else RewardNormalizer()
        self.episode_constant = float(np.sum((scenario.unit_price - scenario.penalty) * scenario.demand))
        self._share = np.maximum(scenario.demand, 1) / self.T
        self.episode = 0
        self.t = None

    def reset(self, alpha_init=None) -> np.ndarray:
        a0 = self.default_alpha if alpha_init is None else clamp_alphas(alpha_init, self.s.penalty)
        self.alpha = a0.copy()
        self.ledger = Ledger.empty(self.m)
        self.t = 1
        self.done = False
        self.episode += 1
        self._last_delivered = np.zeros(self.m, dtype=np.int64)
        self._last_reward = 0.0
        self._credited = np.zeros(self.m, dtype=np.int64)
        return self._observe()

    def _observe(self) -> np.ndarray:
        s = self.s
        d = s.demand
        with np.errstate(divide="ignore", invalid="ignore"):
            rem = np.where(d > 0, (d - self.ledger.delivered) / np.maximum(d, 1), 0.0)
        obs = np.empty((self.m, OBS_DIM))
        obs[:, 0] = (self.t - 1) / self.T
        obs[:, 1] = np.clip(rem, 0.0, 1.0)
        obs[:, 2] = self._last_delivered / self._share
        obs[:, 3] = self.alpha / s.penalty
        obs[:, 4] = self.normalizer(self._last_reward)
        return obs

    def apply_actions(self, actions) -> np.ndarray:
        a = np.clip(np.asarray(actions, dtype=np.float64).reshape(self.m), -self.action_bound, self.action_bound)
        p = self.s.penalty
        base = np.where(a > 0, np.maximum(self.alpha, ALPHA_FLOOR_FRACTION * p), self.alpha)
        self.alpha = np.clip(base * (1.0 + a), 0.0, p)
        return a

    def step(self, actions):
        """Advance one step. Returns ``(observations, rewards, done)``."""
        if self.t is None or self.done:
            raise StateError("episode finished; call reset()")
        self.apply_actions(actions)
        s = self.s
        sl = s.step_slice(self.t)
        q, b2 = s.q[sl], s.b2[sl]
        out = np.empty(len(b2), dtype=np.int64)
        kernels.assign(q, b2, s.quality_weight, self.alpha, out)
        before_rtb = self.ledger.rtb_revenue
        before_q = self.ledger.quality_sum.copy()
        before_n = self.ledger.delivered.copy()
        self.ledger.settle_block(out, q, b2)
        fulfilled = np.minimum(self.ledger.delivered, s.demand)
        newly = fulfilled - self._credited
        self._credited = fulfilled
        r = (self.ledger.rtb_revenue - before_rtb
             + float(s.quality_weight @ (self.ledger.quality_sum - before_q))
             + float(s.penalty @ newly))
        self._last_delivered = self.ledger.delivered - before_n
        self._last_reward = r
        self.normalizer.update(r)
        self.t += 1
        self.done = self.t > self.T
        return self._observe(), np.full(self.m, r), self.done

    def final_report(self, r_star=None) -> YieldReport:
        if not self.done:
            raise StateError("episode still running")
        return finalize(self.ledger.copy(), self.s.contracts, r_star)

    def rollout(self, policy, alpha_init=None, record: bool = False):
        """Run one episode with ``policy(obs) -> actions``; returns (report, transitions)."""
        obs = self.reset(alpha_init)
        transitions = []
        while not self.done:
            a = np.asarray(policy(obs), dtype=np.float64).reshape(self.m)
            a = np.clip(a, -self.action_bound, self.action_bound)
            step = self.t
            nxt, r, done = self.step(a)
            if record:
                transitions.append(Transition(obs, a, r, nxt, done, self.episode, step))
            obs = nxt
        return self.final_report(), transitions


def episode_return(trajectory) -> np.ndarray:
    """Undiscounted per-agent return of a list of transitions (or reward rows)."""
    rows = [tr.reward if isinstance(tr, Transition) else tr for tr in trajectory]
    if not rows:
        return np.zeros(0)
    return np.sum(np.asarray(rows, dtype=np.float64), axis=0)


def write_trace_csv(transitions, alphas, path, constant: float = 0.0) -> None:
    """Episode trace: step, per-agent shift and action, reward, cumulative yield.

    ``alphas`` holds the shift in force during each step (after the action).
    """
    if not transitions:
        Path(path).write_text("step,reward,cumulative_yield\n")
        return
    m = len(transitions[0].action)
    head = ["step"] + [f"alpha_{j + 1}" for j in range(m)] + [f"action_{j + 1}" for j in range(m)]
    head += ["reward", "cumulative_yield"]
    cum = constant
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(head)
        for tr, al in zip(transitions, alphas):
            r = float(tr.reward[0])
            cum += r
            w.writerow([tr.step] + [repr(float(x)) for x in al] + [repr(float(x)) for x in tr.action]
                       + [repr(r), repr(cum)])
