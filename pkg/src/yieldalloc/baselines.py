"""Non-learning comparison strategies: Contract-First and PID pacing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .allocator import Ledger, clamp_alphas, finalize
from .errors import ConfigError
from .report import YieldReport
from .scenario import Scenario

CF_RISK_FACTOR = 0.8


def run_contract_first(s: Scenario, alphas, rho: float = CF_RISK_FACTOR, trace: list | None = None) -> YieldReport:
    """Fixed-shift allocation with an emergency switch to contracts-only.

    After each step the remaining supply is projected from the arrival rate
    seen so far. If any contract's remaining demand, or the total remaining
    demand, exceeds ``rho`` times that projection, every later impression
    goes to the open contract with the highest bid, RTB price ignored,
    until all demands are met.

    ``trace``, when given, receives one dict per step.
    """
    if not 0 < rho:
        raise ConfigError("risk factor rho must be > 0")
    alpha = clamp_alphas(alphas, s.penalty)
    led = Ledger.empty(s.m)
    lam = s.quality_weight
    fallback = False
    seen = 0
    for t in range(1, s.T + 1):
        sl = s.step_slice(t)
        q, b2 = s.q[sl], s.b2[sl]
        out = np.empty(len(b2), dtype=np.int64)
        if fallback:
            remaining = np.maximum(0, s.demand - led.delivered)
            kernels.fallback(q, b2, lam, alpha, remaining, out)
        else:
            kernels.assign(q, b2, lam, alpha, out)
        led.settle_block(out, q, b2)
        seen += len(b2)
        remaining = np.maximum(0, s.demand - led.delivered)
        if not fallback and t < s.T:
            supply = seen / t * (s.T - t)
            fallback = bool(np.any(remaining > rho * supply) or remaining.sum() > rho * supply)
        if trace is not None:
            trace.append({"step": t, "fallback": fallback, "delivered": led.delivered.copy(),
                          "rtb_revenue": led.rtb_revenue})
    return finalize(led, s.contracts)


@dataclass(frozen=True)
class PidGains:
    """Controller gains on the delivery error expressed as a fraction of demand.

    ``setpoint`` is either ``"linear"`` (cumulative target t/T), ``"arrivals"``
    (the scenario's own cumulative arrival curve) or an explicit sequence of
    T cumulative fractions.
    """

    kp: float = 1.0
    ki: float = 0.1
    kd: float = 0.0
    setpoint: object = "linear"

    def __post_init__(self):
        if not all(np.isfinite([self.kp, self.ki, self.kd])):
            raise ConfigError("PID gains must be finite")

    def curve(self, s: Scenario) -> np.ndarray:
        if isinstance(self.setpoint, str):
            if self.setpoint == "linear":
                return np.arange(1, s.T + 1) / s.T
            if self.setpoint == "arrivals":
                if s.n == 0:
                    return np.arange(1, s.T + 1) / s.T
                return s.step_bounds[1:] / s.n
            raise ConfigError(f"unknown setpoint curve {self.setpoint!r}")
        c = np.asarray(self.setpoint, dtype=np.float64)
        if c.shape != (s.T,) or np.any(np.diff(c) < 0) or c[0] < 0 or abs(c[-1] - 1.0) > 1e-12:
            raise ConfigError("setpoint curve must be T nondecreasing fractions ending at 1")
        return c


def run_pid(s: Scenario, gains: PidGains = PidGains(), alpha0=None, trace: list | None = None):
    """Pace each contract to its setpoint by moving its shift at step boundaries.

    Shifts follow ``alpha0 + p * (kp e + ki sum(e) + kd de)`` with ``e`` the
    target-minus-delivered count divided by demand, clamped to ``[0, p]``;
    the integral is frozen on steps where the clamp is active.
    Returns ``(report, alpha_trajectory)`` with ``T + 1`` rows, the first
    being the initial shifts.
    """
    p = s.penalty
    base = clamp_alphas(s.alpha_init if alpha0 is None else alpha0, p)
    alpha = base.copy()
    target = gains.curve(s)
    demand = np.maximum(s.demand, 1).astype(np.float64)
    led = Ledger.empty(s.m)
    integ = np.zeros(s.m)
    prev = np.zeros(s.m)
    traj = [alpha.copy()]
    for t in range(1, s.T + 1):
        sl = s.step_slice(t)
        q, b2 = s.q[sl], s.b2[sl]
        out = np.empty(len(b2), dtype=np.int64)
        kernels.assign(q, b2, s.quality_weight, alpha, out)
        led.settle_block(out, q, b2)
        err = np.where(s.demand > 0, (target[t - 1] * s.demand - led.delivered) / demand, 0.0)
        integ_new = integ + err
        u = gains.kp * err + gains.ki * integ_new + gains.kd * (err - prev)
        raw = base + p * u
        alpha = np.clip(raw, 0.0, p)
        integ = np.where(raw == alpha, integ_new, integ)
        prev = err
        traj.append(alpha.copy())
        if trace is not None:
            trace.append({"step": t, "alpha": alpha.copy(), "error": err.copy(),
                          "delivered": led.delivered.copy()})
    return finalize(led, s.contracts), np.array(traj)
