"""Episodic-max shaped reward: each (observation, action) is worth the best
return of any episode that passed through it."""

from __future__ import annotations

import numpy as np

from .nn import HIDDEN, Adam, Mlp


class TabularShapedReward:
    """Exact running maximum of episode returns per (state, action) key."""

    def __init__(self):
        self.table = {}

    def update(self, keys, episode_return: float) -> None:
        for key in keys:
            old = self.table.get(key)
            if old is None or episode_return > old:
                self.table[key] = episode_return

    def value(self, key, default=-np.inf) -> float:
        return self.table.get(key, default)

    def __len__(self):
        return len(self.table)


class ShapedRewardModel:
    """One network per agent regressing ``max(current prediction, return)``."""

    def __init__(self, n_agents: int, obs_dim: int, rng, lr: float = 1e-3, hidden=HIDDEN, dtype=np.float64,
                 action_scale: float = 1.0, initial_value: float = 0.0, overshoot_weight: float = 0.0):
        self.action_scale = float(action_scale)
        self.overshoot_weight = float(overshoot_weight)
        self.net = Mlp((obs_dim + 1,) + tuple(hidden) + (1,), stack=n_agents, rng=rng, dtype=dtype)
        # start below every return so the running max is learned from beneath
        self.net.params[-1][...] = initial_value
        self.opt = Adam(self.net.params, lr)
        self.last_loss = 0.0

    def inputs(self, obs, act):
        """(A, B, obs_dim) observations and (A, B) actions -> (A, B, obs_dim + 1).

        Actions are divided by ``action_scale`` so that they enter on the
        same O(1) scale as the observation features.
        """
        return np.concatenate([obs, np.asarray(act)[..., None] / self.action_scale], axis=-1)

    def predict(self, obs, act) -> np.ndarray:
        return self.net.forward(self.inputs(obs, act))[..., 0]

    def update(self, obs, act, returns, steps: int = 1) -> float:
        """Regress toward ``max(prediction, return)``; ``returns`` broadcasts to (A, B)."""
        x = self.inputs(obs, act)
        returns = np.asarray(returns, dtype=np.float64)
        loss = 0.0
        for _ in range(steps):
            pred, cache = self.net.forward(x, keep=True)
            target = np.maximum(pred[..., 0], np.broadcast_to(returns, pred.shape[:-1]))
            err = pred[..., 0] - target
            if self.overshoot_weight > 0:
                # predictions above the return are pulled back only weakly
                over = pred[..., 0] - returns
                err = err + self.overshoot_weight * np.maximum(over, 0.0)
            loss = float(np.mean(err * err))
            grads, _ = self.net.backward(cache, (2.0 / err.shape[1]) * err[..., None])
            self.opt.step(grads)
        self.last_loss = loss
        return loss


def shaped_reward_update(model, obs, act, episode_return, steps: int = 1):
    """Apply one episode's return to every (observation, action) of its trajectory.

    ``model`` is a :class:`ShapedRewardModel` (``obs`` as (A, T, d), ``act``
    as (A, T)) or a :class:`TabularShapedReward` (``obs`` an iterable of
    hashable keys, ``act`` ignored).
    """
    if isinstance(model, TabularShapedReward):
        model.update(obs, episode_return)
        return model
    model.update(obs, act, episode_return, steps=steps)
    return model
