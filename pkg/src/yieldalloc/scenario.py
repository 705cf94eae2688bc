"""Publisher scenarios: contracts, impressions and the RTB bid landscape.

Impressions are stored column-wise (numpy arrays) because every consumer
streams them in bulk; :class:`Impression` records are materialized on
request only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ScenarioParseError


@dataclass(frozen=True)
class Contract:
    id: int
    demand: int
    unit_price: float
    penalty: float
    quality_weight: float
    alpha_init: float = 0.0

    def __post_init__(self):
        # demand 0 is tolerated so the no-demand corner of the oracle is expressible
        if self.demand < 0:
            raise ConfigError(f"contract {self.id}: demand must be >= 0, got {self.demand}")
        if not self.unit_price >= 0:
            raise ConfigError(f"contract {self.id}: unit_price must be >= 0")
        if not self.penalty > 0:
            raise ConfigError(f"contract {self.id}: penalty must be > 0")
        if not self.quality_weight >= 0:
            raise ConfigError(f"contract {self.id}: quality_weight must be >= 0")
        if not 0 <= self.alpha_init <= self.penalty:
            raise ConfigError(f"contract {self.id}: alpha_init must lie in [0, penalty]")


@dataclass(frozen=True)
class Impression:
    id: int
    step: int
    rtb_first: float
    rtb_second: float
    quality: dict = field(default_factory=dict)


class Scenario:
    """One publisher day: m contracts, n impressions over T steps.

    Contract ``j`` (1-based id) lives in column ``j - 1`` of the quality
    matrix and of every per-contract array.
    """

    def __init__(self, contracts: Sequence[Contract], T: int, impression_ids, steps, b1, b2, q):
        self.contracts = tuple(contracts)
        self.T = int(T)
        self.impression_ids = np.asarray(impression_ids, dtype=np.int64)
        self.steps = np.asarray(steps, dtype=np.int64)
        self.b1 = np.asarray(b1, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        self.q = q.reshape(len(self.b2), len(self.contracts))
        self._validate()
        self.demand = np.array([c.demand for c in self.contracts], dtype=np.int64)
        self.unit_price = np.array([c.unit_price for c in self.contracts], dtype=np.float64)
        self.penalty = np.array([c.penalty for c in self.contracts], dtype=np.float64)
        self.quality_weight = np.array([c.quality_weight for c in self.contracts], dtype=np.float64)
        self.alpha_init = np.array([c.alpha_init for c in self.contracts], dtype=np.float64)
        # impressions of step t occupy [bounds[t-1], bounds[t])
        self.step_bounds = np.searchsorted(self.steps, np.arange(1, self.T + 2), side="left")

    def _validate(self):
        if self.T < 1:
            raise ConfigError("horizon T must be >= 1")
        ids = [c.id for c in self.contracts]
        if ids != list(range(1, len(ids) + 1)):
            raise ConfigError("contract ids must be dense 1..m in order")
        n = len(self.b2)
        if not (len(self.impression_ids) == len(self.steps) == len(self.b1) == n):
            raise ConfigError("impression arrays have inconsistent lengths")
        if len(np.unique(self.impression_ids)) != n:
            raise ConfigError("impression ids must be unique")
        if n:
            if self.steps.min() < 1 or self.steps.max() > self.T:
                raise ConfigError("impression step outside [1, T]")
            if np.any(np.diff(self.steps) < 0):
                raise ConfigError("impressions must be ordered by step")
            if np.any(self.b2 < 0) or np.any(self.b1 < self.b2):
                raise ConfigError("RTB bids must satisfy b1 >= b2 >= 0")
            if np.any(self.q < 0) or not np.all(np.isfinite(self.q)):
                raise ConfigError("qualities must be finite and >= 0")

    @property
    def m(self) -> int:
        return len(self.contracts)

    @property
    def n(self) -> int:
        return len(self.b2)

    def step_slice(self, t: int) -> slice:
        return slice(int(self.step_bounds[t - 1]), int(self.step_bounds[t]))

    def impression(self, k: int) -> Impression:
        """The k-th impression (0-based position) as a record."""
        return Impression(
            id=int(self.impression_ids[k]),
            step=int(self.steps[k]),
            rtb_first=float(self.b1[k]),
            rtb_second=float(self.b2[k]),
            quality={j + 1: float(self.q[k, j]) for j in range(self.m)},
        )

    @property
    def impressions(self) -> list:
        return [self.impression(k) for k in range(self.n)]

    @classmethod
    def from_records(cls, contracts: Sequence[Contract], impressions: Iterable[Impression], T: int) -> "Scenario":
        imps = list(impressions)
        m = len(contracts)
        for imp in imps:
            if set(imp.quality) != set(range(1, m + 1)):
                raise ConfigError(f"impression {imp.id}: quality must cover contracts 1..{m}")
        return cls(
            contracts,
            T,
            [imp.id for imp in imps],
            [imp.step for imp in imps],
            [imp.rtb_first for imp in imps],
            [imp.rtb_second for imp in imps],
            np.array([[imp.quality[j] for j in range(1, m + 1)] for imp in imps], dtype=np.float64).reshape(len(imps), m),
        )

    def with_contracts(self, contracts: Sequence[Contract]) -> "Scenario":
        return Scenario(contracts, self.T, self.impression_ids, self.steps, self.b1, self.b2, self.q)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.T == other.T
            and self.contracts == other.contracts
            and np.array_equal(self.impression_ids, other.impression_ids)
            and np.array_equal(self.steps, other.steps)
            and np.array_equal(self.b1, other.b1)
            and np.array_equal(self.b2, other.b2)
            and np.array_equal(self.q, other.q)
        )

    __hash__ = None

    def __repr__(self):
        return f"Scenario(m={self.m}, n={self.n}, T={self.T})"


@dataclass(frozen=True)
class DriftSpec:
    volume_factor: float = 1.0
    price_factor: float = 1.0
    quality_noise: float = 0.0

    def __post_init__(self):
        if not self.volume_factor > 0:
            raise ConfigError("volume_factor must be > 0")
        if not self.price_factor > 0:
            raise ConfigError("price_factor must be > 0")
        if not self.quality_noise >= 0:
            raise ConfigError("quality_noise must be >= 0")


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of the synthetic scenario generator.

    RTB bids are the top two of ``n_bidders`` i.i.d. lognormal draws with
    parameters ``(bid_mu, bid_sigma)``. ``demand_fractions`` pins each
    contract's share of n; otherwise shares are drawn from
    ``demand_fraction_range``. Contract qualities are Beta draws whose shape
    parameters are drawn per contract from ``quality_shape_range``.
    """

    m: int
    n: int
    T: int = 24
    bid_mu: float = 0.0
    bid_sigma: float = 0.5
    n_bidders: int = 5
    fixed_bid: float | None = None
    demand_fractions: tuple | None = None
    demand_fraction_range: tuple = (0.05, 0.15)
    unit_price_range: tuple = (0.5, 1.5)
    penalty_range: tuple = (1.5, 3.0)
    quality_weight_range: tuple = (0.5, 2.0)
    quality_shape_range: tuple = (1.0, 4.0)
    alpha_init_fraction: float = 0.5
    intraday: object = "uniform"
    price_curve: object = "flat"
    price_amplitude: float = 0.3
    quality_amplitude: float = 0.0

    def validate(self):
        if self.m < 1 or self.n < 1 or self.T < 1:
            raise ConfigError(f"m, n, T must all be >= 1 (got m={self.m}, n={self.n}, T={self.T})")
        if self.n_bidders < 2 and self.fixed_bid is None:
            raise ConfigError("n_bidders must be >= 2")
        if self.demand_fractions is not None and len(self.demand_fractions) != self.m:
            raise ConfigError("demand_fractions must have one entry per contract")
        if not 0 <= self.alpha_init_fraction <= 1:
            raise ConfigError("alpha_init_fraction must lie in [0, 1]")
        for name in ("demand_fraction_range", "unit_price_range", "penalty_range",
                     "quality_weight_range", "quality_shape_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name}: lower bound exceeds upper bound")
        if self.penalty_range[0] <= 0:
            raise ConfigError("penalties must be > 0")
        if not 0 <= self.price_amplitude < 1:
            raise ConfigError("price_amplitude must lie in [0, 1)")
        if not 0 <= self.quality_amplitude <= 1:
            raise ConfigError("quality_amplitude must lie in [0, 1]")

    def price_multipliers(self) -> np.ndarray:
        """Per-step scale applied to RTB bids (mean 1 over steps)."""
        if isinstance(self.price_curve, str):
            t = np.arange(self.T)
            if self.price_curve == "flat":
                return np.ones(self.T)
            if self.price_curve == "diurnal":
                return 1.0 + self.price_amplitude * np.sin(2 * np.pi * (t + 0.5) / self.T - np.pi / 2)
            raise ConfigError(f"unknown price curve {self.price_curve!r}")
        w = np.asarray(self.price_curve, dtype=np.float64)
        if w.shape != (self.T,) or np.any(w <= 0):
            raise ConfigError("price curve must be T positive multipliers")
        return w

    def intraday_curve(self) -> np.ndarray:
        if isinstance(self.intraday, str):
            t = np.arange(self.T)
            if self.intraday == "uniform":
                w = np.ones(self.T)
            elif self.intraday == "diurnal":
                w = 1.0 + 0.6 * np.sin(2 * np.pi * (t + 0.5) / self.T - np.pi / 2)
            else:
                raise ConfigError(f"unknown intraday curve {self.intraday!r}")
        else:
            w = np.asarray(self.intraday, dtype=np.float64)
            if w.shape != (self.T,) or np.any(w < 0) or w.sum() <= 0:
                raise ConfigError("intraday weights must be T nonnegative numbers with positive sum")
        return w / w.sum()


def _rtb_pair(rng, n, spec: GeneratorSpec, scale=1.0):
    if spec.fixed_bid is not None:
        b = np.full(n, float(spec.fixed_bid) * scale)
        return b.copy(), b
    draws = rng.lognormal(spec.bid_mu, spec.bid_sigma, size=(n, spec.n_bidders)) * scale
    top = -np.partition(-draws, 1, axis=1)[:, :2]
    return top.max(axis=1), top.min(axis=1)


def generate_scenario(spec: GeneratorSpec, seed: int) -> Scenario:
    """Draw a synthetic scenario; a pure function of ``(spec, seed)``."""
    spec.validate()
    rng = np.random.default_rng(seed)
    m, n, T = spec.m, spec.n, spec.T

    if spec.demand_fractions is not None:
        fracs = np.asarray(spec.demand_fractions, dtype=np.float64)
    else:
        fracs = rng.uniform(*spec.demand_fraction_range, size=m)
    demand = np.maximum(1, np.rint(fracs * n)).astype(np.int64)
    if demand.sum() > n:
        raise ConfigError(f"total demand {int(demand.sum())} exceeds supply n={n}")

    price = rng.uniform(*spec.unit_price_range, size=m)
    penalty = rng.uniform(*spec.penalty_range, size=m)
    weight = rng.uniform(*spec.quality_weight_range, size=m)
    shape_a = rng.uniform(*spec.quality_shape_range, size=m)
    shape_b = rng.uniform(*spec.quality_shape_range, size=m)
    contracts = [
        Contract(
            id=j + 1,
            demand=int(demand[j]),
            unit_price=float(price[j]),
            penalty=float(penalty[j]),
            quality_weight=float(weight[j]),
            alpha_init=float(spec.alpha_init_fraction * penalty[j]),
        )
        for j in range(m)
    ]

    counts = rng.multinomial(n, spec.intraday_curve())
    steps = np.repeat(np.arange(1, T + 1), counts)
    b1, b2 = _rtb_pair(rng, n, spec)
    mult = spec.price_multipliers()[steps - 1]
    b1, b2 = b1 * mult, b2 * mult
    q = rng.beta(shape_a, shape_b, size=(n, m))
    if spec.quality_amplitude > 0:
        # each contract's audience peaks at its own time of day
        phase = rng.uniform(0, 2 * np.pi, size=m)
        tt = 2 * np.pi * (steps - 0.5) / T
        q = q * (1.0 + spec.quality_amplitude * np.sin(tt[:, None] + phase[None, :]))
    return Scenario(contracts, T, np.arange(1, n + 1), steps, b1, b2, q)


def apply_drift(train: Scenario, drift: DriftSpec, seed: int) -> Scenario:
    """Build a test day from ``train`` under a volume/price/quality shift.

    Impressions are resampled with replacement from the training day (so the
    bid and quality distributions carry over without knowing how the train
    day was produced), ``round(n * volume_factor)`` of them, with both RTB
    bids multiplied by ``price_factor``. Contract terms are copied untouched.
    """
    rng = np.random.default_rng(seed)
    n_test = int(round(train.n * drift.volume_factor))
    if train.n == 0:
        n_test = 0
    pick = np.sort(rng.integers(0, train.n, size=n_test)) if n_test else np.zeros(0, dtype=np.int64)
    # sorting positions keeps impressions ordered by step
    steps = train.steps[pick]
    b1 = train.b1[pick] * drift.price_factor
    b2 = train.b2[pick] * drift.price_factor
    q = train.q[pick]
    if drift.quality_noise > 0:
        q = np.maximum(0.0, q * (1.0 + drift.quality_noise * rng.standard_normal(q.shape)))
    return Scenario(train.contracts, train.T, np.arange(1, n_test + 1), steps, b1, b2, q)


# --
# Line-delimited text format:
#   H m n T
#   C j d c p lambda alpha0
#   I i step b1 b2 q_1 ... q_m


def _fmt(x: float) -> str:
    return repr(float(x))


def save_scenario(s: Scenario, path) -> None:
    path = Path(path)
    lines = [f"H {s.m} {s.n} {s.T}"]
    for c in s.contracts:
        lines.append(
            f"C {c.id} {c.demand} {_fmt(c.unit_price)} {_fmt(c.penalty)} "
            f"{_fmt(c.quality_weight)} {_fmt(c.alpha_init)}"
        )
    ids, steps, b1, b2 = s.impression_ids.tolist(), s.steps.tolist(), s.b1.tolist(), s.b2.tolist()
    q = s.q.tolist()
    for k in range(s.n):
        qs = " ".join(map(repr, q[k]))
        lines.append(f"I {ids[k]} {steps[k]} {b1[k]!r} {b2[k]!r} {qs}".rstrip())
    path.write_text("\n".join(lines) + "\n")


def _num(tok, lineno, what, kind=float):
    try:
        v = kind(tok)
    except ValueError:
        raise ScenarioParseError(lineno, f"bad {what} {tok!r}") from None
    if kind is float and not math.isfinite(v):
        raise ScenarioParseError(lineno, f"non-finite {what}")
    return v


def load_scenario(path) -> Scenario:
    """Parse a scenario file, enforcing every type invariant."""
    header = None
    contracts = {}
    ids, steps, b1s, b2s, qs = [], [], [], [], []
    seen_imp = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            kind = tok[0]
            if header is None and kind != "H":
                raise ScenarioParseError(lineno, "expected header record 'H m n T' first")
            if kind == "H":
                if header is not None:
                    raise ScenarioParseError(lineno, "duplicate header")
                if len(tok) != 4:
                    raise ScenarioParseError(lineno, "header needs 3 fields: m n T")
                header = tuple(_num(t, lineno, "header field", int) for t in tok[1:])
                if min(header) < 0 or header[2] < 1:
                    raise ScenarioParseError(lineno, "header counts out of range")
            elif kind == "C":
                if len(tok) != 7:
                    raise ScenarioParseError(lineno, "contract record needs 6 fields")
                j = _num(tok[1], lineno, "contract id", int)
                if j in contracts:
                    raise ScenarioParseError(lineno, f"duplicate contract id {j}")
                if not 1 <= j <= header[0]:
                    raise ScenarioParseError(lineno, f"contract id {j} outside 1..{header[0]}")
                try:
                    contracts[j] = Contract(
                        j,
                        _num(tok[2], lineno, "demand", int),
                        *(_num(t, lineno, "contract field") for t in tok[3:]),
                    )
                except ConfigError as e:
                    raise ScenarioParseError(lineno, str(e)) from None
            elif kind == "I":
                m = header[0]
                if len(tok) < 5 + m:
                    raise ScenarioParseError(lineno, f"impression record missing quality entries (need {m})")
                if len(tok) > 5 + m:
                    raise ScenarioParseError(lineno, f"quality entry for unknown contract id {m + 1}")
                i = _num(tok[1], lineno, "impression id", int)
                if i in seen_imp:
                    raise ScenarioParseError(lineno, f"duplicate impression id {i}")
                seen_imp.add(i)
                t = _num(tok[2], lineno, "step", int)
                if not 1 <= t <= header[2]:
                    raise ScenarioParseError(lineno, f"step {t} outside [1, {header[2]}]")
                if steps and t < steps[-1]:
                    raise ScenarioParseError(lineno, "impressions must be ordered by step")
                first = _num(tok[3], lineno, "b1")
                second = _num(tok[4], lineno, "b2")
                if second < 0 or second > first:
                    raise ScenarioParseError(lineno, "RTB bids must satisfy b1 >= b2 >= 0")
                qual = [_num(x, lineno, "quality") for x in tok[5:]]
                if any(v < 0 for v in qual):
                    raise ScenarioParseError(lineno, "negative quality")
                ids.append(i)
                steps.append(t)
                b1s.append(first)
                b2s.append(second)
                qs.append(qual)
            else:
                raise ScenarioParseError(lineno, f"unknown record type {kind!r}")
    if header is None:
        raise ScenarioParseError(0, "empty file")
    m, n, T = header
    if sorted(contracts) != list(range(1, m + 1)):
        raise ScenarioParseError(lineno, f"expected contracts 1..{m}, found {sorted(contracts)}")
    if len(ids) != n:
        raise ScenarioParseError(lineno, f"header promises {n} impressions, found {len(ids)}")
    q = np.array(qs, dtype=np.float64).reshape(n, m)
    return Scenario([contracts[j] for j in range(1, m + 1)], T, ids, steps, b1s, b2s, q)
