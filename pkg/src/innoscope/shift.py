"""Over-time dataset-shift detection with the two-sample Kolmogorov-Smirnov test.

Each indicator is sliced into three year periods (x: 2021-2023, y: 2018-2020,
z: 2016-2017) and every pair of slices is tested. The statistic D is the
supremum gap between the two empirical distribution functions over the pooled
sample points; the p-value uses the asymptotic Kolmogorov series.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dataset import IndicatorPanel

PERIODS = {"x": (2021, 2022, 2023), "y": (2018, 2019, 2020), "z": (2016, 2017)}
PAIRS = (("x", "y"), ("x", "z"), ("y", "z"))


class Ecdf:
    """Right-continuous empirical distribution function of a sample."""

    def __init__(self, sample):
        values = np.asarray(sample, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("ECDF needs a nonempty sample")
        self.sorted = np.sort(values)
        self.n = values.size

    def __call__(self, t):
        """Fraction of the sample <= t (vectorized over t)."""
        t = np.asarray(t, dtype=float)
        out = np.searchsorted(self.sorted, t, side="right") / self.n
        return float(out) if out.ndim == 0 else out

    def coordinates(self):
        """Step coordinates (distinct values, cumulative fraction) for plotting."""
        values, counts = np.unique(self.sorted, return_counts=True)
        return values, np.cumsum(counts) / self.n


def ecdf(sample) -> Ecdf:
    return Ecdf(sample)


def kolmogorov_sf(lam: float, max_terms: int = 100000,
                  rel_tol: float = 1e-10) -> float:
    """Two-sided tail 2*sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lam^2), clamped to [0,1].

    The alternating series is truncated once a term falls below rel_tol of
    the running partial sum.
    """
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for j in range(1, max_terms + 1):
        term = (-1.0) ** (j - 1) * np.exp(-2.0 * j * j * lam * lam)
        total += term
        if abs(term) < rel_tol * max(abs(total), 1e-300):
            break
    return float(min(1.0, max(0.0, 2.0 * total)))


@dataclass(frozen=True)
class KsResult:
    d_stat: float
    p_value: float
    n1: int
    n2: int
    alternative: str = "two-sided"


def ks_two_sample(a, b, small_sample_correction: bool = False) -> KsResult:
    """Two-sample two-sided KS test.

    D is exact: the maximum |ECDF_a - ECDF_b| over the pooled distinct sample
    points, which covers both one-sided step limits (both functions are
    constant between pooled points). The p-value is asymptotic with
    lambda = sqrt(n_e) * D and effective size n_e = n1*n2/(n1+n2); passing
    small_sample_correction=True applies the finite-sample adjustment
    lambda = (sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) * D instead.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.unique(np.concatenate([a, b]))
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    d = float(np.max(np.abs(fa - fb)))
    ne = a.size * b.size / (a.size + b.size)
    lam = np.sqrt(ne) * d
    if small_sample_correction:
        lam = (np.sqrt(ne) + 0.12 + 0.11 / np.sqrt(ne)) * d
    return KsResult(d, kolmogorov_sf(lam), a.size, b.size)


@dataclass
class PeriodSlices:
    """One indicator's values split into the three year periods."""

    indicator: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def get(self, name: str) -> np.ndarray:
        return getattr(self, name)


def period_slices(panel: IndicatorPanel, indicator: str) -> PeriodSlices:
    years = panel.years()
    column = panel.column(indicator)
    parts = {name: column[np.isin(years, ys)] for name, ys in PERIODS.items()}
    return PeriodSlices(indicator, parts["x"], parts["y"], parts["z"])


@dataclass(frozen=True)
class ShiftRow:
    indicator: str
    pair: str            # e.g. "x_vs_z"
    n1: int
    n2: int
    d_stat: float
    p_value: float
    verdict: str         # shifted | stable | untestable


@dataclass
class ShiftReport:
    significance: float
    rows: list = field(default_factory=list)

    def row(self, indicator: str, pair: str) -> ShiftRow:
        for r in self.rows:
            if r.pair == pair and (r.indicator == indicator
                                   or r.indicator.split(" ", 1)[0] == indicator):
                return r
        raise KeyError((indicator, pair))

    def to_dicts(self):
        return [r.__dict__ for r in self.rows]


def shift_report(panel: IndicatorPanel, significance: float = 0.05) -> ShiftReport:
    """KS verdicts for all indicators and all three period pairings.

    An empty slice makes that pairing untestable rather than aborting. No
    multiple-testing adjustment is applied across the tests.
    """
    report = ShiftReport(significance)
    for indicator in panel.indicator_names:
        slices = period_slices(panel, indicator)
        for first, second in PAIRS:
            s1, s2 = slices.get(first), slices.get(second)
            pair = f"{first}_vs_{second}"
            if s1.size == 0 or s2.size == 0:
                report.rows.append(ShiftRow(indicator, pair, s1.size, s2.size,
                                            float("nan"), float("nan"),
                                            "untestable"))
                continue
            res = ks_two_sample(s1, s2)
            verdict = "shifted" if res.p_value < significance else "stable"
            report.rows.append(ShiftRow(indicator, pair, res.n1, res.n2,
                                        res.d_stat, res.p_value, verdict))
    return report


def shift_table(report: ShiftReport, delimiter: str = ",") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["indicator", "pair", "n1", "n2", "D", "p", "verdict"])
    for r in report.rows:
        writer.writerow([r.indicator, r.pair, r.n1, r.n2,
                         f"{r.d_stat:.6f}", f"{r.p_value:.6g}", r.verdict])
    return buf.getvalue()
