"""Training loops for the shaped-reward local-critic learner and the
centralized-critic baseline.

Both share rollout, replay, exploration and evaluation; they differ only in
what each agent's critic sees and what it regresses on.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, fields

import numpy as np

from ..errors import ConfigError, DivergenceError
from ..marlenv import OBS_DIM, AllocationEnv
from ..report import LearningCurve
from .nn import HIDDEN, Adam, Mlp, soft_update
from .policy import PolicySet, evaluate_policy
from .replay import BATCH_SIZE, REPLAY_CAPACITY, ReplayBuffer
from .shaping import ShapedRewardModel, shaped_reward_update

log = logging.getLogger(__name__)


@dataclass
class TrainerConfig:
    episodes: int = 1000
    seed: int = 0
    actor_lr: float = 1e-3
    critic_lr: float = 1e-4
    reward_lr: float = 1e-3
    tau: float = 0.02
    noise_sigma: float = 0.05
    # multiply sigma by this after every episode; 1.0 keeps it fixed
    noise_decay: float = 1.0
    batch_size: int = BATCH_SIZE
    replay_capacity: int = REPLAY_CAPACITY
    updates_per_step: float = 1.0
    # returns enter the networks as return_scale * (yield / reference - 1)
    return_scale: float = 10.0
    # > 0 lets the shaped-reward model correct predictions above observed returns
    overshoot_weight: float = 0.1
    # actors take one step per this many critic steps
    policy_delay: int = 1
    # episodes of critic-only training before the actors start moving
    actor_delay: int = 0
    # weight of the quadratic penalty on the actors' pre-tanh outputs
    squash_penalty: float = 1.0
    eval_every: int = 10
    time_budget: float | None = None
    keep_best: bool = False
    dtype: str = "float64"

    def validate(self) -> "TrainerConfig":
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        for name in ("actor_lr", "critic_lr", "reward_lr", "return_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 < self.tau <= 1:
            raise ConfigError("tau must lie in (0, 1]")
        if self.noise_sigma < 0 or not 0 < self.noise_decay <= 1:
            raise ConfigError("noise_sigma must be >= 0 and noise_decay in (0, 1]")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ConfigError("replay capacity must hold at least one batch")
        if self.policy_delay < 1 or self.overshoot_weight < 0:
            raise ConfigError("policy_delay must be >= 1 and overshoot_weight >= 0")
        if self.actor_delay < 0 or self.squash_penalty < 0:
            raise ConfigError("actor_delay and squash_penalty must be >= 0")
        if self.updates_per_step < 0 or self.eval_every < 1:
            raise ConfigError("updates_per_step must be >= 0 and eval_every >= 1")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ConfigError("time_budget must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        return self

    @classmethod
    def from_mapping(cls, values: dict) -> "TrainerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown trainer keys: {', '.join(sorted(unknown))}")
        return cls(**values).validate()


def critic_input_dim(method: str, n_agents: int, obs_dim: int) -> int:
    if method == "mapolo":
        return obs_dim + 1
    if method == "maddpg":
        return n_agents * (obs_dim + 1)
    raise ConfigError(f"unknown method {method!r}")


def _check(loss: float, what: str) -> float:
    if not np.isfinite(loss):
        raise DivergenceError(f"{what} loss is not finite")
    return loss


def _critic_fit(critic: Mlp, opt: Adam, x, target) -> float:
    pred, cache = critic.forward(x, keep=True)
    err = pred[..., 0] - target
    grads, _ = critic.backward(cache, (2.0 / err.shape[-1]) * err[..., None])
    opt.step(grads)
    return float(np.mean(err * err))


def _actor_ascent(actor: Mlp, opt: Adam, critic: Mlp, obs, place_action, squash_penalty: float = 0.0) -> None:
    """Deterministic policy gradient step. ``place_action`` maps actions
    (m, B, 1) to the critic input and returns ``(x, pick)`` where ``pick``
    extracts dQ/da (m, B, 1) from the critic's input gradient.

    ``squash_penalty`` adds ``penalty * mean(z^2) / 2`` on the actor's
    pre-tanh output so it cannot drift into the flat tail of the squashing.
    """
    a, acache = actor.forward(obs, keep=True)
    x, pick = place_action(a)
    _, ccache = critic.forward(x, keep=True)
    B = obs.shape[1]
    _, gx = critic.backward(ccache, np.full(ccache[2].shape, -1.0 / B, dtype=critic.dtype))
    g_pre = squash_penalty / B * acache[1][-1] if squash_penalty > 0 else None
    grads, _ = actor.backward(acache, pick(gx), g_pre)
    opt.step(grads)


class _Learner:
    method = ""

    def __init__(self, env: AllocationEnv, cfg: TrainerConfig, rng):
        self.env, self.cfg, self.rng = env, cfg, rng
        self.m, self.d = env.m, OBS_DIM
        self.dtype = np.dtype(cfg.dtype)
        self.policy = PolicySet(self.m, self.d, env.action_bound, rng=rng, dtype=self.dtype, method=self.method)
        self.actor_opt = Adam(self.policy.actor.params, cfg.actor_lr)
        self.critic = Mlp((self.critic_dim,) + HIDDEN + (1,), stack=self.m, rng=rng, dtype=self.dtype)
        self.critic_opt = Adam(self.critic.params, cfg.critic_lr)
        self.policy.extra["critic"] = self.critic
        self.train_actor = cfg.actor_delay == 0
        self.n_critic_steps = 0

    @property
    def critic_dim(self) -> int:
        return critic_input_dim(self.method, self.m, self.d)

    def actor_due(self) -> bool:
        self.n_critic_steps += 1
        return self.train_actor and self.n_critic_steps % self.cfg.policy_delay == 0

    def end_episode(self, obs, act, episode_return: float) -> None:
        pass

    def update(self, buf: ReplayBuffer, idx) -> None:
        raise NotImplementedError

    def soft_updates(self) -> None:
        pass


class _Mapolo(_Learner):
    method = "mapolo"

    def __init__(self, env, cfg, rng):
        super().__init__(env, cfg, rng)
        self.reward = ShapedRewardModel(self.m, self.d, rng, lr=cfg.reward_lr, dtype=self.dtype,
                                        action_scale=env.action_bound, initial_value=-cfg.return_scale,
                                        overshoot_weight=cfg.overshoot_weight)
        self.critic.params[-1][...] = -cfg.return_scale
        self.reward_target = self.reward.net.copy()
        self.policy.extra["shaped_reward"] = self.reward.net

    def end_episode(self, obs, act, episode_return):
        # obs (T, m, d), act (T, m) -> agent-major
        loss = shaped_reward_update(self.reward, np.swapaxes(obs, 0, 1), act.T, episode_return).last_loss
        _check(loss, "shaped reward")

    def update(self, buf, idx):
        obs = np.swapaxes(buf.obs[idx], 0, 1).astype(self.dtype)
        act = buf.act[idx].T.astype(self.dtype)
        ret = buf.ret[idx]
        _check(self.reward.update(obs, act, ret[None, :]), "shaped reward")
        x = self.reward.inputs(obs, act)
        target = self.reward_target.forward(x)[..., 0]
        _check(_critic_fit(self.critic, self.critic_opt, x, target), "critic")

        if not self.actor_due():
            return
        scale = self.env.action_bound

        def place(a):
            return np.concatenate([obs, a / scale], axis=-1), lambda gx: gx[..., -1:] / scale

        _actor_ascent(self.policy.actor, self.actor_opt, self.critic, obs, place, self.cfg.squash_penalty)

    def soft_updates(self):
        soft_update(self.reward_target, self.reward.net, self.cfg.tau)


class _Maddpg(_Learner):
    method = "maddpg"

    def __init__(self, env, cfg, rng):
        super().__init__(env, cfg, rng)
        self.actor_target = self.policy.actor.copy()
        self.critic_target = self.critic.copy()

    def update(self, buf, idx):
        m, d, B = self.m, self.d, len(idx)
        scale = self.env.action_bound
        joint_obs = buf.obs[idx].reshape(B, m * d).astype(self.dtype)
        joint_next = buf.next_obs[idx].reshape(B, m * d).astype(self.dtype)
        x = np.concatenate([joint_obs, buf.act[idx].astype(self.dtype) / scale], axis=1)[None]
        next_local = np.swapaxes(buf.next_obs[idx], 0, 1).astype(self.dtype)
        a_next = self.actor_target.forward(next_local)[..., 0].T
        x_next = np.concatenate([joint_next, a_next / scale], axis=1)[None]
        q_next = self.critic_target.forward(x_next)[..., 0]
        target = buf.rew[idx][None, :] + (~buf.done[idx])[None, :] * q_next
        _check(_critic_fit(self.critic, self.critic_opt, x, target), "critic")
        if not self.actor_due():
            return

        local = np.swapaxes(buf.obs[idx], 0, 1).astype(self.dtype)
        agents = np.arange(m)

        def place(a):
            X = np.repeat(x, m, axis=0)
            X[agents, :, m * d + agents] = a[..., 0] / scale
            return X, lambda gx: gx[agents, :, m * d + agents][..., None] / scale

        _actor_ascent(self.policy.actor, self.actor_opt, self.critic, local, place, self.cfg.squash_penalty)

    def soft_updates(self):
        soft_update(self.actor_target, self.policy.actor, self.cfg.tau)
        soft_update(self.critic_target, self.critic, self.cfg.tau)


def _train(learner_cls, env: AllocationEnv, config: TrainerConfig, r_star=None, reference_yield=None,
           alpha_init=None, callback=None):
    cfg = config.validate()
    if r_star is None:
        from ..oracle import solve_dual

        r_star = solve_dual(env.s).dual_objective
    ref = float(r_star if reference_yield is None else reference_yield)
    if not ref > 0:
        raise ConfigError("reference yield for return normalization must be positive")
    rng = np.random.default_rng(cfg.seed)
    learner = learner_cls(env, cfg, rng)
    buf = ReplayBuffer(env.m, learner.d, cfg.replay_capacity)
    curve = LearningCurve(learner.method)
    best = (-np.inf, None)
    sigma = cfg.noise_sigma
    elapsed = 0.0
    n_updates = int(round(cfg.updates_per_step * env.T))
    bound = env.action_bound

    def evaluate(episode):
        nonlocal best
        ratio = evaluate_policy(env, learner.policy, r_star, alpha_init)
        curve.add(episode, elapsed, ratio)
        if cfg.keep_best and ratio > best[0]:
            best = (ratio, learner.policy.copy())
        if callback is not None:
            callback(episode, elapsed, ratio)

    evaluate(0)
    for episode in range(1, cfg.episodes + 1):
        t0 = time.perf_counter()
        obs = env.reset(alpha_init)
        traj_obs, traj_act, rows = [], [], []
        while not env.done:
            a = learner.policy.act(obs)
            if sigma > 0:
                a = a + rng.normal(0.0, sigma, size=a.shape)
            a = np.clip(a, -bound, bound)
            nxt, r, done = env.step(a)
            rows.append(buf.add(obs, a, cfg.return_scale * r[0] / ref, nxt, done, episode))
            traj_obs.append(obs)
            traj_act.append(a)
            obs = nxt
        episode_return = cfg.return_scale * (env.final_report().yield_ / ref - 1.0)
        buf.set_return(rows, episode_return)
        learner.end_episode(np.asarray(traj_obs, dtype=learner.dtype), np.asarray(traj_act), episode_return)
        learner.train_actor = episode > cfg.actor_delay
        if buf.can_sample(cfg.batch_size):
            for _ in range(n_updates):
                learner.update(buf, buf.sample_idx(rng, cfg.batch_size))
                learner.soft_updates()
        if not learner.policy.actor.all_finite():
            raise DivergenceError("actor parameters are not finite")
        sigma *= cfg.noise_decay
        dt = time.perf_counter() - t0
        curve.episode_seconds.append(dt)
        elapsed += dt
        out_of_time = cfg.time_budget is not None and elapsed >= cfg.time_budget
        if episode % cfg.eval_every == 0 or episode == cfg.episodes or out_of_time:
            evaluate(episode)
        if out_of_time:
            log.info("%s stopped by time budget after %d episodes", learner.method, episode)
            break
    policy = best[1] if cfg.keep_best and best[1] is not None else learner.policy
    return policy, curve


def train_mapolo(env: AllocationEnv, config: TrainerConfig, r_star=None, reference_yield=None,
                 alpha_init=None, callback=None):
    """Local critics on (own observation, own action), regressed on the shaped reward.

    Returns ``(PolicySet, LearningCurve)``. ``r_star`` defaults to the dual
    bound of the environment's scenario; ``reference_yield`` (default
    ``r_star``) normalizes returns.
    """
    return _train(_Mapolo, env, config, r_star, reference_yield, alpha_init, callback)


def train_maddpg(env: AllocationEnv, config: TrainerConfig, r_star=None, reference_yield=None,
                 alpha_init=None, callback=None):
    """Centralized critics on all observations and actions with bootstrapped per-step rewards."""
    return _train(_Maddpg, env, config, r_star, reference_yield, alpha_init, callback)
