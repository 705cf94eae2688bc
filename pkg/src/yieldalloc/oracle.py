"""Optimal bid shifts via the dual of the allocation LP.

For fixed shifts ``alpha`` the impression prices are
``beta_i(alpha) = max(0, max_j(lambda_j q_ij + alpha_j - b2_i))`` and the
dual objective ``sum_i beta_i - sum_j alpha_j d_j`` is convex and piecewise
linear in ``alpha``. Adding back ``sum_i b2_i + sum_j c_j d_j`` turns it into
an upper bound on the yield of every feasible allocation, which is what
:func:`dual_bound` returns.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .allocator import assign, assignment_yield, clamp_alphas
from .errors import BudgetError, ConfigError
from .scenario import Scenario

log = logging.getLogger(__name__)

ENUMERATION_BUDGET = 10**7


@dataclass
class DualSolution:
    alpha_star: np.ndarray
    beta_star: np.ndarray
    dual_objective: float
    primal_yield: float
    gap: float
    iterations: int
    converged: bool

    @property
    def relative_gap(self) -> float:
        return self.gap / max(abs(self.primal_yield), 1e-300)


def _constant(s: Scenario) -> float:
    return float(np.sum(s.b2) + np.sum(s.unit_price * s.demand))


def betas(s: Scenario, alpha) -> np.ndarray:
    alpha = clamp_alphas(alpha, s.penalty)
    if s.m == 0:
        return np.zeros(s.n)
    bids = s.q * s.quality_weight + alpha
    return np.maximum(0.0, bids.max(axis=1) - s.b2)


def dual_bound(s: Scenario, alpha) -> float:
    """Dual objective at ``alpha`` plus the constants removed in the reduction."""
    alpha = clamp_alphas(alpha, s.penalty)
    return float(np.sum(betas(s, alpha)) - alpha @ s.demand + _constant(s))


def dual_subgradient(s: Scenario, alpha) -> np.ndarray:
    """Won-impression counts minus demand; ties go to the lowest contract id."""
    winners = assign(s, alpha)
    return np.bincount(winners[winners >= 0], minlength=s.m) - s.demand


def _evaluate(s: Scenario, alpha):
    out = np.empty(s.n, dtype=np.int64)
    beta_sum = kernels.assign(s.q, s.b2, s.quality_weight, alpha, out)
    counts = np.bincount(out[out >= 0], minlength=s.m)
    upper = beta_sum - float(alpha @ s.demand) + _constant(s)
    lower = assignment_yield(s, out).yield_
    return out, counts, upper, lower


def center_alphas(s: Scenario, alpha, sweeps: int = 3) -> np.ndarray:
    """Move each shift to the middle of its one-dimensional minimizing interval.

    With the other shifts held, contract j wins impression i iff
    ``alpha_j > max(b2_i, max_{k != j} b_ik) - lambda_j q_ij``. The dual is
    flat between the d_j-th and (d_j+1)-th smallest of those thresholds, so
    centering there never raises the objective and keeps the induced
    allocation away from ties.
    """
    alpha = clamp_alphas(alpha, s.penalty).copy()
    n, m = s.n, s.m
    if m == 0:
        return alpha
    base = s.q * s.quality_weight
    for _ in range(sweeps):
        moved = 0.0
        for j in range(m):
            bids = base + alpha
            if m > 1:
                bids[:, j] = -np.inf
                other = bids.max(axis=1)
            else:
                other = np.full(n, -np.inf)
            thresh = np.maximum(s.b2, other) - base[:, j]
            d = int(s.demand[j])
            if n == 0:
                lo, hi = -np.inf, np.inf
            else:
                kth = [k for k in (d - 1, d) if 0 <= k < n]
                part = np.partition(thresh, kth) if kth else thresh
                lo = part[d - 1] if d >= 1 else -np.inf
                hi = part[d] if d < n else np.inf
            p = s.penalty[j]
            if d == 0 and hi >= 0:
                # nothing to deliver: the smallest optimal shift
                new = 0.0
            elif lo > p:
                new = p
            elif hi < 0:
                new = 0.0
            else:
                lo_c, hi_c = max(lo, 0.0), min(hi, p)
                new = 0.5 * (lo_c + hi_c)
            moved = max(moved, abs(new - alpha[j]))
            alpha[j] = new
        if moved == 0.0:
            break
    return alpha


def solve_dual(s: Scenario, tol: float = 1e-3, max_iters: int = 5000, alpha0=None,
               center_every: int = 25, step_scale: float = 1.0) -> DualSolution:
    """Minimize the dual over the box ``prod_j [0, p_j]`` by projected subgradient.

    Steps follow a Polyak rule against the best primal yield seen so far
    (a valid lower bound on the optimum), capped by a diminishing
    ``step_scale * max(p) / sqrt(k)`` schedule. Every ``center_every``
    iterations the iterate and the running average of iterates are
    centered coordinate-wise. The returned shifts are those whose greedy
    allocation has the best yield; ``gap`` is the best dual bound minus
    that yield.
    """
    if not tol > 0:
        raise ConfigError("tol must be > 0")
    if max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    p = s.penalty
    if alpha0 is None:
        alpha0 = 0.5 * p
    alpha = clamp_alphas(alpha0, p).copy()
    scale = step_scale * (float(p.max()) if s.m else 1.0)

    best_upper, best_lower = math.inf, -math.inf
    best_alpha = alpha.copy()
    avg = np.zeros_like(alpha)
    avg_w = 0.0
    converged = False
    k = 0

    upper_alpha = alpha.copy()
    own_gap = math.inf

    def consider(a):
        nonlocal best_upper, best_lower, best_alpha, upper_alpha, own_gap
        _, counts, upper, lower = _evaluate(s, a)
        if upper < best_upper:
            best_upper, upper_alpha = upper, a.copy()
        # among equally good allocations keep the one closest to complementarity
        if lower > best_lower or (lower == best_lower and upper - lower < own_gap):
            best_lower, best_alpha, own_gap = lower, a.copy(), upper - lower
        return counts, upper

    while k < max_iters:
        k += 1
        counts, upper = consider(alpha)
        if best_upper - best_lower <= tol * abs(best_lower):
            converged = True
            break
        g = (counts - s.demand).astype(np.float64)
        # components the box projection would cancel
        g[(alpha <= 0) & (g > 0)] = 0.0
        g[(alpha >= p) & (g < 0)] = 0.0
        gg = float(g @ g)
        if gg == 0.0:
            # stationary on the box: alpha is dual optimal
            alpha = center_alphas(s, alpha)
            consider(alpha)
            converged = best_upper - best_lower <= tol * abs(best_lower)
            if converged:
                break
            continue
        step = min((upper - best_lower) / gg, scale / math.sqrt(k) / math.sqrt(gg))
        alpha = np.clip(alpha - step * g, 0.0, p)
        w = math.sqrt(k)
        avg = (avg * avg_w + alpha * w) / (avg_w + w)
        avg_w += w
        if center_every and k % center_every == 0:
            alpha = center_alphas(s, alpha)
            consider(center_alphas(s, avg))
            consider(center_alphas(s, upper_alpha))

    # the best dual point, centered, usually induces an allocation that is
    # optimal on its own; prefer it so the returned pair is complementary
    consider(center_alphas(s, upper_alpha))
    if not converged:
        consider(center_alphas(s, best_alpha))
        converged = best_upper - best_lower <= tol * abs(best_lower)
        if not converged:
            log.warning("solve_dual: no convergence after %d iterations (gap %.3g)", k, best_upper - best_lower)

    return DualSolution(
        alpha_star=best_alpha,
        beta_star=betas(s, best_alpha),
        dual_objective=best_upper,
        primal_yield=best_lower,
        gap=best_upper - best_lower,
        iterations=k,
        converged=converged,
    )


def brute_force_optimal(s: Scenario, budget: int = ENUMERATION_BUDGET):
    """Exhaustive search over every assignment to {RTB, contract 1..m}.

    Returns ``(winners, yield)`` with 0-based winners (-1 = RTB).
    """
    size = (s.m + 1) ** s.n
    if size > budget:
        raise BudgetError(f"(m+1)^n = {size} assignments exceeds budget {budget}")
    gain = s.q * s.quality_weight - s.b2[:, None]
    digits = kernels.brute(np.ascontiguousarray(gain), s.demand, s.penalty)
    winners = np.asarray(digits, dtype=np.int64) - 1
    return winners, assignment_yield(s, winners).yield_


def oracle_yield(s: Scenario, budget: int = ENUMERATION_BUDGET, tol: float = 1e-3, max_iters: int = 5000) -> float:
    """R* for the R/R* metric: exact on small instances, the dual bound otherwise."""
    if (s.m + 1) ** s.n <= budget:
        return brute_force_optimal(s, budget)[1]
    return solve_dual(s, tol=tol, max_iters=max_iters).dual_objective


@dataclass
class SlacknessReport:
    checked: int
    violations: int
    worst: float
    by_family: dict

    @property
    def certified(self) -> bool:
        return self.violations == 0


def _as_matrix(s: Scenario, assignment) -> np.ndarray:
    a = np.asarray(assignment)
    if a.ndim == 2:
        return a.astype(np.float64)
    x = np.zeros((s.n, s.m))
    won = a >= 0
    x[np.flatnonzero(won), a[won]] = 1.0
    return x


def verify_complementary_slackness(s: Scenario, assignment, dual: DualSolution, tol: float = 1e-6) -> SlacknessReport:
    """Check every complementary-slackness product of the LP pair.

    ``assignment`` is either 0-based winners (-1 = RTB) or an (n, m)
    fractional matrix. Families: allocated pairs pay exactly their bid
    surplus, unsold impressions carry no price, contracts with positive
    shift are delivered exactly, and any shortfall sits at ``alpha = p``.
    The shortfall used is the smallest feasible one, ``max(0, d - delivered)``.
    """
    x = _as_matrix(s, assignment)
    alpha = np.asarray(dual.alpha_star, dtype=np.float64)
    beta = np.asarray(dual.beta_star, dtype=np.float64)
    bids = s.q * s.quality_weight + alpha
    delivered = x.sum(axis=0) if s.n else np.zeros(s.m)
    y = np.maximum(0.0, s.demand - delivered)
    fam = {
        "allocation": np.abs(x * (bids - s.b2[:, None] - beta[:, None])).ravel(),
        "impression": np.abs((x.sum(axis=1) - 1.0) * beta) if s.m else np.zeros(s.n),
        "demand": np.abs(alpha * (delivered + y - s.demand)),
        "shortfall": np.abs(y * (s.penalty - alpha)),
    }
    by_family = {}
    violations, worst, checked = 0, 0.0, 0
    for name, v in fam.items():
        bad = int(np.sum(v > tol))
        w = float(v.max()) if v.size else 0.0
        by_family[name] = (bad, w)
        violations += bad
        worst = max(worst, w)
        checked += v.size
    return SlacknessReport(checked, violations, worst, by_family)
