"""Bid-based allocation between guaranteed contracts and RTB.

Each contract bids ``lambda_j * q_ij + alpha_j`` for every impression; the
impression goes to the highest contract bidder when that bid strictly beats
the RTB second price, and to RTB otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import StateError
from .report import YieldReport
from .scenario import Contract, Impression, Scenario

RTB = None


@dataclass(frozen=True)
class AllocationDecision:
    impression_id: int
    winner: int | None  # contract id, or None for RTB
    winning_bid: float
    rtb_second: float

    @property
    def to_rtb(self) -> bool:
        return self.winner is None


def clamp_alphas(alphas, penalty) -> np.ndarray:
    return np.clip(np.asarray(alphas, dtype=np.float64), 0.0, penalty)


def contract_bid(c: Contract, imp: Impression, alpha_j: float) -> float:
    alpha_j = min(max(float(alpha_j), 0.0), c.penalty)
    return c.quality_weight * imp.quality[c.id] + alpha_j


def allocate(imp: Impression, alphas, contracts) -> AllocationDecision:
    best, winner = -np.inf, None
    for c, a in zip(contracts, alphas):
        b = contract_bid(c, imp, a)
        if b > best:  # strict: ties keep the lower id
            best, winner = b, c.id
    if winner is None or not best > imp.rtb_second:
        return AllocationDecision(imp.id, RTB, best, imp.rtb_second)
    return AllocationDecision(imp.id, winner, best, imp.rtb_second)


@dataclass
class Ledger:
    delivered: np.ndarray
    quality_sum: np.ndarray
    rtb_revenue: float = 0.0
    finalized: bool = False

    @classmethod
    def empty(cls, m: int) -> "Ledger":
        return cls(np.zeros(m, dtype=np.int64), np.zeros(m, dtype=np.float64))

    def copy(self) -> "Ledger":
        return Ledger(self.delivered.copy(), self.quality_sum.copy(), self.rtb_revenue, self.finalized)

    def settle_block(self, winners, q, b2):
        """Settle a block of impressions given 0-based winners (-1 = RTB)."""
        if self.finalized:
            raise StateError("ledger already finalized")
        self.rtb_revenue += kernels.tally(winners, q, b2, self.delivered, self.quality_sum)


def settle(d: AllocationDecision, imp: Impression, ledger: Ledger) -> Ledger:
    if ledger.finalized:
        raise StateError("ledger already finalized")
    if d.winner is None:
        ledger.rtb_revenue += imp.rtb_second
    else:
        ledger.delivered[d.winner - 1] += 1
        ledger.quality_sum[d.winner - 1] += imp.quality[d.winner]
    return ledger


def finalize(ledger: Ledger, contracts, r_star=None) -> YieldReport:
    ledger.finalized = True
    d = np.array([c.demand for c in contracts], dtype=np.int64)
    c_ = np.array([c.unit_price for c in contracts], dtype=np.float64)
    p = np.array([c.penalty for c in contracts], dtype=np.float64)
    lam = np.array([c.quality_weight for c in contracts], dtype=np.float64)
    shortfall = np.maximum(0, d - ledger.delivered)
    r_gc = float(np.sum(c_ * d) - np.sum(p * shortfall))
    q_gc = float(np.sum(lam * ledger.quality_sum))
    return YieldReport.from_components(r_gc, ledger.rtb_revenue, q_gc, ledger.delivered, shortfall, r_star)


def assign(s: Scenario, alphas, rows=slice(None)) -> np.ndarray:
    """Greedy winners (0-based, -1 = RTB) for ``s``'s impressions in ``rows``."""
    alpha = clamp_alphas(alphas, s.penalty)
    q, b2 = s.q[rows], s.b2[rows]
    out = np.empty(len(b2), dtype=np.int64)
    kernels.assign(q, b2, s.quality_weight, alpha, out)
    return out


def ledger_from_assignment(s: Scenario, winners) -> Ledger:
    led = Ledger.empty(s.m)
    led.settle_block(np.asarray(winners, dtype=np.int64), s.q, s.b2)
    return led


def assignment_yield(s: Scenario, winners) -> YieldReport:
    return finalize(ledger_from_assignment(s, winners), s.contracts)


def run_fixed(s: Scenario, alphas) -> YieldReport:
    """Stream the whole day under constant bid shifts."""
    return assignment_yield(s, assign(s, alphas))
