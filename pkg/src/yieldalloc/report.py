"""Yield reports, multi-scenario R/R* tables and convergence CSVs."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ReportError

ADDITIVITY_TOL = 0.01


@dataclass(frozen=True)
class YieldReport:
    r_gc: float
    r_rtb: float
    q_gc: float
    yield_: float
    delivered: tuple = ()
    shortfall: tuple = ()
    r_star: float | None = None

    @classmethod
    def from_components(cls, r_gc, r_rtb, q_gc, delivered=(), shortfall=(), r_star=None):
        return cls(float(r_gc), float(r_rtb), float(q_gc), float(r_gc) + float(r_rtb) + float(q_gc),
                   tuple(int(x) for x in delivered), tuple(int(x) for x in shortfall), r_star)

    @property
    def ratio(self) -> float | None:
        """R/R*, or None when no oracle value is attached."""
        if self.r_star is None:
            return None
        return self.yield_ / self.r_star

    def with_oracle(self, r_star: float) -> "YieldReport":
        return replace(self, r_star=float(r_star))

    def additivity_error(self) -> float:
        return abs(self.r_gc + self.r_rtb + self.q_gc - self.yield_)

    def is_additive(self, tol: float = ADDITIVITY_TOL) -> bool:
        return self.additivity_error() <= tol

    def as_row(self) -> dict:
        row = {"R_GC": self.r_gc, "R_RTB": self.r_rtb, "Q_GC": self.q_gc, "yield": self.yield_}
        if self.r_star is not None:
            row["R_star"] = self.r_star
            row["R_over_R_star"] = self.ratio
        return row


@dataclass
class AdditivityFlag:
    label: str
    components_sum: float
    reported: float

    @property
    def mismatch(self) -> float:
        return abs(self.components_sum - self.reported)


def check_additivity(rows: Sequence[tuple], tol: float = ADDITIVITY_TOL) -> list:
    """Flag ``(label, r_gc, r_rtb, q_gc, yield)`` rows whose parts do not sum.

    Sums are taken exactly on the decimal inputs so a printed-precision
    table is judged on its own digits, not on float noise.
    """
    flags = []
    for label, r_gc, r_rtb, q_gc, total in rows:
        s = Fraction(str(r_gc)) + Fraction(str(r_rtb)) + Fraction(str(q_gc))
        if abs(s - Fraction(str(total))) > Fraction(str(tol)):
            flags.append(AdditivityFlag(label, float(s), float(total)))
    return flags


@dataclass
class SummaryTable:
    methods: list
    rows: list  # (scenario, {method: ratio})
    average: dict
    flags: list = field(default_factory=list)

    def render(self) -> str:
        head = ["scenario"] + self.methods
        lines = [head]
        for scen, vals in self.rows:
            lines.append([str(scen)] + [_fmt_ratio(vals.get(mth)) for mth in self.methods])
        lines.append(["Average"] + [_fmt_ratio(self.average.get(mth)) for mth in self.methods])
        widths = [max(len(r[k]) for r in lines) for k in range(len(head))]
        out = []
        for r_i, r in enumerate(lines):
            out.append("  ".join(c.rjust(w) if k else c.ljust(w) for k, (c, w) in enumerate(zip(r, widths))))
            if r_i == 0 or r_i == len(lines) - 2:
                out.append("-" * len(out[-1]))
        for fl in self.flags:
            out.append(f"! {fl.label}: components sum {fl.components_sum:.2f} vs yield {fl.reported:.2f} "
                       f"(mismatch {fl.mismatch:.2f})")
        return "\n".join(out)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["scenario"] + self.methods)
        for scen, vals in self.rows:
            w.writerow([scen] + [_csv_ratio(vals.get(mth)) for mth in self.methods])
        w.writerow(["Average"] + [_csv_ratio(self.average.get(mth)) for mth in self.methods])
        return buf.getvalue()


def _fmt_ratio(x):
    return "-" if x is None else f"{x:.2f}"


def _csv_ratio(x):
    return "" if x is None else repr(float(x))


def summarize(reports: Sequence[tuple]) -> SummaryTable:
    """One row per scenario, one column per method, plus an unweighted average.

    ``reports`` holds ``(method, scenario, YieldReport)`` triples; every
    report must carry its oracle R*. A bare float in place of a report is
    taken as an already-computed R/R*. Reports that fail the additivity
    check are kept but flagged.
    """
    methods, scenarios = [], []
    cells = {}
    flags = []
    for method, scen, rep in reports:
        if isinstance(rep, YieldReport):
            if rep.r_star is None:
                raise ReportError(f"{method}/{scen}: report carries no oracle R*")
            if not rep.is_additive():
                flags.append(AdditivityFlag(f"{method}/{scen}", rep.r_gc + rep.r_rtb + rep.q_gc, rep.yield_))
            ratio = rep.ratio
        elif rep is None:
            raise ReportError(f"{method}/{scen}: missing oracle value")
        else:
            ratio = float(rep)
        if method not in methods:
            methods.append(method)
        if scen not in scenarios:
            scenarios.append(scen)
        cells[(scen, method)] = ratio
    rows = [(s, {mth: cells[(s, mth)] for mth in methods if (s, mth) in cells}) for s in scenarios]
    average = {}
    for mth in methods:
        vals = [Fraction(repr(cells[(s, mth)])) for s in scenarios if (s, mth) in cells]
        average[mth] = float(sum(vals) / len(vals))
    return SummaryTable(methods, rows, average, flags)


def render_yield_table(rows: Sequence[tuple]) -> str:
    """Yield decomposition table for ``(label, YieldReport)`` pairs."""
    head = f"{'method':<10} {'R_GC':>12} {'R_RTB':>12} {'Q_GC':>12} {'yield':>12} {'R/R*':>6}"
    out = [head, "-" * len(head)]
    for label, rep in rows:
        ratio = "" if rep.ratio is None else f"{rep.ratio:.2f}"
        out.append(f"{label:<10} {rep.r_gc:>12.2f} {rep.r_rtb:>12.2f} {rep.q_gc:>12.2f} {rep.yield_:>12.2f} {ratio:>6}")
    return "\n".join(out)


@dataclass
class LearningCurve:
    method: str
    episodes: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    episode_seconds: list = field(default_factory=list)

    def add(self, episode: int, elapsed: float, ratio: float):
        self.episodes.append(int(episode))
        self.elapsed.append(float(elapsed))
        self.ratios.append(float(ratio))

    def mean_episode_seconds(self) -> float:
        return float(np.mean(self.episode_seconds)) if self.episode_seconds else float("nan")

    def first_reaching(self, level: float):
        """(episode, elapsed) of the first evaluation with R/R* >= level, else None."""
        for ep, t, r in zip(self.episodes, self.elapsed, self.ratios):
            if r >= level:
                return ep, t
        return None


def emit_convergence_csv(curves: Sequence[LearningCurve], path=None) -> str:
    """Write (method, elapsed_seconds, episode, R/R*) rows grouped by method.

    Each method with timing data gets a trailing ``# avg_seconds_per_episode``
    comment line. Returns the text; also writes it when ``path`` is given.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "elapsed_seconds", "episode", "r_over_r_star"])
    for cur in sorted(curves, key=lambda c: c.method):
        for ep, t, r in zip(cur.episodes, cur.elapsed, cur.ratios):
            w.writerow([cur.method, f"{t:.6f}", ep, repr(r)])
    for cur in sorted(curves, key=lambda c: c.method):
        if cur.episode_seconds:
            buf.write(f"# avg_seconds_per_episode {cur.method} {cur.mean_episode_seconds():.6f}\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
