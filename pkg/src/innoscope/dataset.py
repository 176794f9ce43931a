"""Scoreboard ingestion, label encoding, scaling and correlation screening.

The panel format follows the regional innovation scoreboard layout: one row
per region and year, 14 indicator columns, and the EURIS tier label encoded
as an integer 1-4.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as _sstats

from .errors import (
    ClassificationError,
    DataError,
    DegenerateFeatureError,
    InsufficientDataError,
    ParseError,
    SchemaError,
)

# Canonical indicator order; every matrix in the package indexes features
# this way.
INDICATORS = (
    "1.1.2 Population with tertiary education",
    "1.1.3 Population involved in lifelong learning",
    "1.2.1 International scientific co-publications",
    "1.2.2 Scientific publications among the top 10% most cited",
    "1.3.2 Individuals with above basic overall digital skills",
    "2.1.1 R&D expenditure in the public sector",
    "2.2.1 R&D expenditure in the business sector",
    "2.3.2 Employed ICT specialists",
    "3.2.2 Public-private co-publications",
    "3.3.1 PCT patent applications",
    "3.3.2 Trademark applications",
    "3.3.3 Design applications",
    "4.1.1 Employment in knowledge-intensive activities",
    "4.3.2 Air emissions by fine particulates",
)

N_INDICATORS = len(INDICATORS)

YEAR_MIN = 2016
YEAR_MAX = 2023

# EURIS tier names and their integer codes.
LABEL_CODES = {
    "innovation leaders": 1,
    "strong innovators": 2,
    "moderate innovators": 3,
    "emerging innovators": 4,
    # Singular display forms are accepted as well.
    "innovation leader": 1,
    "strong innovator": 2,
    "moderate innovator": 3,
    "emerging innovator": 4,
}

LABEL_NAMES = {
    1: "Innovation leader",
    2: "Strong innovator",
    3: "Moderate innovator",
    4: "Emerging innovator",
}


def encode_label(text_label: str) -> int:
    """Map an EURIS category name to its integer code (1-4), case-insensitive."""
    key = " ".join(str(text_label).split()).lower()
    try:
        return LABEL_CODES[key]
    except KeyError:
        raise ClassificationError(f"unknown EURIS label: {text_label!r}") from None


def indicator_index(name: str, names: Sequence[str] = INDICATORS) -> int:
    """Position of an indicator, accepting either the full name or the code prefix."""
    if name in names:
        return names.index(name)
    for i, full in enumerate(names):
        if full.split(" ", 1)[0] == name:
            return i
    raise KeyError(f"unknown indicator: {name!r}")


@dataclass(frozen=True)
class RegionYear:
    """One observation: a region in a given year with its 14 indicator values."""

    region_id: str
    year: int
    values: tuple
    euris_label: int

    def __post_init__(self):
        if len(self.values) != N_INDICATORS:
            raise DataError(
                f"{self.region_id}/{self.year}: expected {N_INDICATORS} values, "
                f"got {len(self.values)}"
            )
        if not (YEAR_MIN <= self.year <= YEAR_MAX):
            raise DataError(f"{self.region_id}: year {self.year} outside "
                            f"[{YEAR_MIN}, {YEAR_MAX}]")
        if self.euris_label not in LABEL_NAMES:
            raise DataError(f"{self.region_id}/{self.year}: EURIS code "
                            f"{self.euris_label} not in 1-4")


class IndicatorPanel:
    """Immutable table of region-year rows over the canonical indicator set."""

    def __init__(self, rows: Iterable[RegionYear],
                 indicator_names: Sequence[str] = INDICATORS):
        names = tuple(indicator_names)
        if len(set(names)) != len(names):
            raise DataError("indicator names must be unique")
        self.rows = tuple(rows)
        self.indicator_names = names
        self._by_key = {(r.region_id, r.year): i for i, r in enumerate(self.rows)}

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def values_matrix(self) -> np.ndarray:
        """Row-major (n, 14) array of raw indicator values."""
        return np.array([r.values for r in self.rows], dtype=float)

    def euris_labels(self) -> np.ndarray:
        return np.array([r.euris_label for r in self.rows], dtype=int)

    def keys(self):
        return [(r.region_id, r.year) for r in self.rows]

    def years(self) -> np.ndarray:
        return np.array([r.year for r in self.rows], dtype=int)

    def index_of(self, region_id: str, year: int) -> int:
        try:
            return self._by_key[(region_id, int(year))]
        except KeyError:
            raise LookupError(f"no row for region {region_id!r}, year {year}") from None

    def row(self, region_id: str, year: int) -> RegionYear:
        return self.rows[self.index_of(region_id, year)]

    def column(self, indicator: str) -> np.ndarray:
        j = indicator_index(indicator, self.indicator_names)
        return np.array([r.values[j] for r in self.rows], dtype=float)

    def subset(self, mask) -> "IndicatorPanel":
        mask = np.asarray(mask, dtype=bool)
        return IndicatorPanel([r for r, m in zip(self.rows, mask) if m],
                              self.indicator_names)


@dataclass(frozen=True)
class ColumnSchema:
    """Maps input columns to panel fields; insulates against layout drift."""

    region_id: str = "region"
    year: str = "year"
    euris_label: str = "euris_label"
    indicators: Mapping[str, str] = field(
        default_factory=lambda: {name: name.split(" ", 1)[0] for name in INDICATORS}
    )

    def required_columns(self):
        return [self.region_id, self.year, self.euris_label,
                *self.indicators.values()]


def load_scoreboard(source: IO[str] | str, schema: ColumnSchema | None = None,
                    delimiter: str = ",") -> IndicatorPanel:
    """Parse a delimiter-separated stream (or path) into an IndicatorPanel.

    Rows must be complete: any missing or non-finite indicator value aborts
    with a DataError naming the row (no imputation).
    """
    schema = schema or ColumnSchema()
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_scoreboard(fh, schema, delimiter)
    reader = csv.DictReader(source, delimiter=delimiter)
    if reader.fieldnames is None:
        raise SchemaError("input stream has no header row")
    missing = [c for c in schema.required_columns() if c not in reader.fieldnames]
    if missing:
        raise SchemaError(f"missing columns: {missing}")

    rows = []
    for line_no, rec in enumerate(reader, start=2):
        try:
            region = rec[schema.region_id].strip()
            year = int(rec[schema.year])
            raw_label = rec[schema.euris_label].strip()
            label = int(raw_label) if raw_label.isdigit() else encode_label(raw_label)
        except ClassificationError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"row {line_no}: {exc}", row_number=line_no) from exc
        values = []
        for name in INDICATORS:
            col = schema.indicators[name]
            cell = rec.get(col)
            if cell is None or cell.strip() == "":
                raise DataError(f"row {line_no} ({region}, {year}): missing value "
                                f"for {name!r}", row_number=line_no)
            try:
                v = float(cell)
            except ValueError as exc:
                raise ParseError(f"row {line_no}: bad number {cell!r} in {name!r}",
                                 row_number=line_no) from exc
            if not math.isfinite(v):
                raise DataError(f"row {line_no} ({region}, {year}): non-finite value "
                                f"in {name!r}", row_number=line_no)
            values.append(v)
        rows.append(RegionYear(region, year, tuple(values), label))
    return IndicatorPanel(rows)


@dataclass
class StandardizedMatrix:
    """Zero-mean, unit-variance feature matrix with the fitted affine maps.

    Population (divide-by-n) standard deviations are used so that the
    correlation matrix equals the covariance of the standardized data exactly.
    """

    data: np.ndarray
    column_means: np.ndarray
    column_stds: np.ndarray
    indicator_names: tuple = INDICATORS

    def transform(self, raw: np.ndarray) -> np.ndarray:
        """Standardize new rows with the fitted means/stds."""
        return (np.asarray(raw, dtype=float) - self.column_means) / self.column_stds

    def inverse_transform(self, standardized: np.ndarray) -> np.ndarray:
        return np.asarray(standardized, dtype=float) * self.column_stds + self.column_means


def standardize(panel: IndicatorPanel | np.ndarray) -> StandardizedMatrix:
    """Center and scale each indicator to zero mean and unit variance."""
    if isinstance(panel, IndicatorPanel):
        raw = panel.values_matrix()
        names = panel.indicator_names
    else:
        raw = np.asarray(panel, dtype=float)
        names = INDICATORS if raw.shape[1] == N_INDICATORS else tuple(
            f"x{i}" for i in range(raw.shape[1]))
    means = raw.mean(axis=0)
    stds = raw.std(axis=0)  # population form
    for j, s in enumerate(stds):
        if s == 0.0:
            raise DegenerateFeatureError(
                f"indicator {names[j]!r} is constant", feature=names[j])
    return StandardizedMatrix((raw - means) / stds, means, stds, tuple(names))


@dataclass
class ScalingParams:
    """Per-feature min/max for the [-1, +1] affine map."""

    minimum: np.ndarray
    maximum: np.ndarray
    feature_names: tuple = INDICATORS


def minmax_scale(matrix: np.ndarray, params: ScalingParams | None = None,
                 feature_names: Sequence[str] = INDICATORS):
    """Map each feature affinely so the fitted min is -1 and the fitted max +1.

    When params is given (inference path) the fitted bounds are reused;
    out-of-range inputs then fall outside [-1, +1] and are not clipped.
    Returns (scaled matrix, params).
    """
    X = np.asarray(matrix, dtype=float)
    if params is None:
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        names = tuple(feature_names)[: X.shape[-1]]
        for j in range(X.shape[-1]):
            if lo[j] == hi[j]:
                name = names[j] if j < len(names) else f"feature {j}"
                raise DegenerateFeatureError(
                    f"feature {name!r} is constant; cannot fit min-max scaling",
                    feature=name)
        params = ScalingParams(lo, hi, names)
    scaled = 2.0 * (X - params.minimum) / (params.maximum - params.minimum) - 1.0
    return scaled, params


def minmax_inverse(scaled: np.ndarray, params: ScalingParams) -> np.ndarray:
    return (np.asarray(scaled, dtype=float) + 1.0) / 2.0 * (
        params.maximum - params.minimum) + params.minimum


def holm_adjust(p_values: Sequence[float]) -> np.ndarray:
    """Holm step-down adjustment: sort ascending, accumulate max((m-i+1)*p), cap at 1."""
    p = np.asarray(p_values, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted


@dataclass
class CorrelationReport:
    """Pairwise Pearson screening with t statistics and Holm-adjusted p-values."""

    r: np.ndarray
    t_stats: np.ndarray
    p_raw: np.ndarray
    p_holm: np.ndarray
    n_obs: int
    indicator_names: tuple = INDICATORS

    def pairs(self):
        """Upper-triangle pairs as (name1, name2, r, t, p_raw, p_holm)."""
        k = len(self.indicator_names)
        for i in range(k):
            for j in range(i + 1, k):
                yield (self.indicator_names[i], self.indicator_names[j],
                       self.r[i, j], self.t_stats[i, j],
                       self.p_raw[i, j], self.p_holm[i, j])

    def pair(self, a: str, b: str):
        i = indicator_index(a, self.indicator_names)
        j = indicator_index(b, self.indicator_names)
        return (self.r[i, j], self.t_stats[i, j], self.p_raw[i, j], self.p_holm[i, j])


def correlation_analysis(panel: IndicatorPanel | np.ndarray) -> CorrelationReport:
    """Pearson r for all indicator pairs with t tests and Holm adjustment.

    t = r * sqrt((n-2) / (1-r^2)) with two-sided p from Student t on n-2 df;
    the Holm family is the full set of pairwise tests.
    """
    if isinstance(panel, IndicatorPanel):
        raw = panel.values_matrix()
        names = panel.indicator_names
    else:
        raw = np.asarray(panel, dtype=float)
        names = INDICATORS if raw.shape[1] == N_INDICATORS else tuple(
            f"x{i}" for i in range(raw.shape[1]))
    n = raw.shape[0]
    if n < 3:
        raise InsufficientDataError(f"correlation needs at least 3 rows, got {n}")
    std = standardize(raw)
    r = std.data.T @ std.data / n
    np.fill_diagonal(r, 1.0)
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)

    df = n - 2
    k = raw.shape[1]
    t = np.full((k, k), np.nan)
    p = np.full((k, k), np.nan)
    iu = np.triu_indices(k, 1)
    rr = r[iu]
    with np.errstate(divide="ignore"):
        tvals = rr * np.sqrt(df / np.maximum(1.0 - rr ** 2, 1e-300))
    pvals = 2.0 * _sstats.t.sf(np.abs(tvals), df)
    t[iu] = tvals
    p[iu] = pvals
    t[(iu[1], iu[0])] = tvals
    p[(iu[1], iu[0])] = pvals

    ph = np.full((k, k), np.nan)
    adj = holm_adjust(pvals)
    ph[iu] = adj
    ph[(iu[1], iu[0])] = adj
    return CorrelationReport(r, t, p, ph, n, tuple(names))


def correlation_table(report: CorrelationReport, delimiter: str = ",") -> str:
    """Flat export mirroring the pairwise screening layout."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["Parameter1", "Parameter2", "r", "t", "p", "p_holm"])
    for name1, name2, r, t, p, ph in report.pairs():
        writer.writerow([name1, name2, f"{r:.6f}", f"{t:.4f}",
                         f"{p:.6g}", f"{ph:.6g}"])
    return buf.getvalue()
