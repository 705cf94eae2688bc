"""Decentralized deterministic actors and their checkpoint format."""

from __future__ import annotations

import json

import numpy as np

from ..errors import StateError
from ..marlenv import ACTION_BOUND, OBS_DIM, AllocationEnv
from .nn import HIDDEN, Mlp

CHECKPOINT_VERSION = 1


class PolicySet:
    """One actor per agent, evaluated as a single stacked network.

    ``extra`` holds any further networks (critics, shaped-reward model) that
    should travel with the checkpoint.
    """

    def __init__(self, n_agents: int, obs_dim: int = OBS_DIM, action_bound: float = ACTION_BOUND,
                 rng=None, hidden=HIDDEN, dtype=np.float64, method: str = ""):
        self.n_agents = int(n_agents)
        self.obs_dim = int(obs_dim)
        self.action_bound = float(action_bound)
        self.method = method
        self.actor = Mlp((obs_dim,) + tuple(hidden) + (1,), stack=n_agents, out_bound=action_bound,
                         rng=rng, dtype=dtype)
        self.extra: dict[str, Mlp] = {}

    def act(self, obs) -> np.ndarray:
        """(m, obs_dim) observations -> (m,) actions."""
        obs = np.asarray(obs, dtype=self.actor.dtype)
        return self.actor.forward(obs[:, None, :])[:, 0, 0].astype(np.float64)

    __call__ = act

    def copy(self) -> "PolicySet":
        new = PolicySet.__new__(PolicySet)
        new.n_agents, new.obs_dim, new.action_bound, new.method = (
            self.n_agents, self.obs_dim, self.action_bound, self.method)
        new.actor = self.actor.copy()
        new.extra = {k: v.copy() for k, v in self.extra.items()}
        return new

    def save(self, path) -> None:
        """Write every network to an ``.npz`` archive; reloads bit-exactly."""
        nets = {"actor": self.actor, **self.extra}
        meta = {
            "version": CHECKPOINT_VERSION,
            "method": self.method,
            "n_agents": self.n_agents,
            "obs_dim": self.obs_dim,
            "action_bound": self.action_bound,
            "nets": {name: {"sizes": net.sizes, "stack": net.stack, "out_bound": net.out_bound,
                            "dtype": net.dtype.str, "n_params": len(net.params)}
                     for name, net in nets.items()},
        }
        arrays = {f"{name}/{k}": p for name, net in nets.items() for k, p in enumerate(net.params)}
        with open(path, "wb") as fh:
            np.savez(fh, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path) -> "PolicySet":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(bytes(z["__meta__"]).decode())
            if meta.get("version") != CHECKPOINT_VERSION:
                raise StateError(f"unsupported checkpoint version {meta.get('version')!r}")
            nets = {}
            for name, spec in meta["nets"].items():
                net = Mlp.__new__(Mlp)
                net.sizes = tuple(spec["sizes"])
                net.stack = spec["stack"]
                net.out_bound = spec["out_bound"]
                net.dtype = np.dtype(spec["dtype"])
                net.params = [z[f"{name}/{k}"].copy() for k in range(spec["n_params"])]
                nets[name] = net
        new = cls.__new__(cls)
        new.n_agents, new.obs_dim = meta["n_agents"], meta["obs_dim"]
        new.action_bound, new.method = meta["action_bound"], meta["method"]
        new.actor = nets.pop("actor")
        new.extra = nets
        return new


def evaluate_policy(env: AllocationEnv, policies, r_star: float, alpha_init=None) -> float:
    """Yield of one noise-free rollout divided by ``r_star``."""
    if not r_star > 0:
        raise ValueError("oracle yield must be positive")
    report, _ = env.rollout(policies, alpha_init)
    return report.yield_ / r_star
