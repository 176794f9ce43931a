"""Interactive scenario engine over a trained membership classifier.

A trial takes a base region-year, substitutes selected indicator values in
original units, and reports the classifier's membership probability. Trials
in a session stack cumulatively by default, mirroring a progressive policy
exploration. The engine evaluates the frozen classifier; it makes no causal
claims.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .classifier import MembershipClassifier
from .dataset import IndicatorPanel, indicator_index


@dataclass(frozen=True)
class Scenario:
    """A base row plus indicator overrides in original units."""

    base_region: str
    base_year: int
    overrides: dict = field(default_factory=dict)
    cumulative: bool = True


def resolve(panel: IndicatorPanel, scenario: Scenario,
            prior_vector=None) -> np.ndarray:
    """Feature vector of the scenario: base values with overrides substituted.

    prior_vector, when given, is the starting point instead of the base row
    (used for cumulative trials).
    """
    if prior_vector is None:
        base = np.array(panel.row(scenario.base_region, scenario.base_year).values,
                        dtype=float)
    else:
        base = np.asarray(prior_vector, dtype=float).copy()
    for name, value in scenario.overrides.items():
        value = float(value)
        if not np.isfinite(value):
            raise ValueError(f"override for {name!r} is not finite")
        base[indicator_index(name, panel.indicator_names)] = value
    return base


@dataclass
class TrialEntry:
    number: int
    overrides: dict
    vector: list
    probability: float
    timestamp: str
    out_of_range: list = field(default_factory=list)

    def to_dict(self):
        return {
            "number": self.number,
            "overrides": dict(self.overrides),
            "vector": list(self.vector),
            "probability": self.probability,
            "timestamp": self.timestamp,
            "out_of_range": list(self.out_of_range),
        }


@dataclass
class TrialLog:
    """Append-only record of a progressive what-if session."""

    base_region: str
    base_year: int
    target_cluster: str
    cumulative: bool = True
    entries: list = field(default_factory=list)

    @property
    def last_vector(self):
        return np.array(self.entries[-1].vector) if self.entries else None

    def to_dict(self):
        return {
            "schema_version": 1,
            "base_region": self.base_region,
            "base_year": self.base_year,
            "target_cluster": self.target_cluster,
            "cumulative": self.cumulative,
            "entries": [e.to_dict() for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialLog":
        log = cls(d["base_region"], int(d["base_year"]), d["target_cluster"],
                  bool(d.get("cumulative", True)))
        for e in d.get("entries", []):
            log.entries.append(TrialEntry(
                int(e["number"]), dict(e["overrides"]), list(e["vector"]),
                float(e["probability"]), e["timestamp"],
                list(e.get("out_of_range", []))))
        return log

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "TrialLog":
        return cls.from_dict(json.loads(text))


def _out_of_range(vector: np.ndarray, model: MembershipClassifier,
                  names) -> list:
    """Indicators whose value falls outside the scaling fit range.

    Such values pass through the scaler unclipped (policy targets may exceed
    history); they are flagged on the trial entry rather than rejected.
    """
    flags = []
    for j, v in enumerate(vector):
        if v < model.scaling.minimum[j] or v > model.scaling.maximum[j]:
            flags.append(names[j])
    return flags


def run_trial(log: TrialLog, panel: IndicatorPanel, overrides: dict,
              model: MembershipClassifier, timestamp: str | None = None
              ) -> TrialEntry:
    """Resolve one trial, score it, and append it to the session log."""
    prior = log.last_vector if log.cumulative else None
    scenario = Scenario(log.base_region, log.base_year, dict(overrides),
                        log.cumulative)
    try:
        vector = resolve(panel, scenario, prior_vector=prior)
        probability = float(model.predict_proba(vector)[0])
    except Exception as exc:
        raise type(exc)(f"trial {len(log.entries) + 1} "
                        f"({log.base_region}/{log.base_year}): {exc}") from exc
    entry = TrialEntry(
        number=len(log.entries) + 1,
        overrides=dict(overrides),
        vector=[float(v) for v in vector],
        probability=probability,
        timestamp=timestamp or datetime.now(timezone.utc).isoformat(),
        out_of_range=_out_of_range(vector, model, panel.indicator_names),
    )
    log.entries.append(entry)
    return entry


def sensitivity_sweep(panel: IndicatorPanel, base_region: str, base_year: int,
                      indicator: str, values, model: MembershipClassifier,
                      overrides: dict | None = None):
    """Probability curve for one indicator swept over a grid of values.

    Any other overrides stay applied throughout, so the curve reflects the
    current scenario. Returns a list of (value, probability).
    """
    base = resolve(panel, Scenario(base_region, base_year, dict(overrides or {})))
    j = indicator_index(indicator, panel.indicator_names)
    grid = [float(v) for v in values]
    if grid and sorted(grid) != grid:
        raise ValueError("sweep grid must be sorted ascending")
    curve = []
    for v in grid:
        vec = base.copy()
        vec[j] = v
        curve.append((v, float(model.predict_proba(vec)[0])))
    return curve


@dataclass
class DonorSummary:
    """Distribution of one indicator among a target cluster's members."""

    indicator: str
    label: str
    minimum: float
    median: float
    maximum: float
    exemplars: list  # (region_id, year, value), highest first

    def to_dict(self):
        return {
            "indicator": self.indicator,
            "label": self.label,
            "min": self.minimum,
            "median": self.median,
            "max": self.maximum,
            "exemplars": [
                {"region": r, "year": y, "value": v} for r, y, v in self.exemplars
            ],
        }


def donor_lookup(panel: IndicatorPanel, member_mask, label: str,
                 indicator: str, n_exemplars: int = 12) -> DonorSummary:
    """Suggest values to borrow from members of the target cluster."""
    mask = np.asarray(member_mask, dtype=bool)
    if not mask.any():
        raise ValueError(f"target cluster {label!r} has no members")
    values = panel.column(indicator)[mask]
    keys = [k for k, m in zip(panel.keys(), mask) if m]
    order = np.argsort(values, kind="stable")[::-1][:n_exemplars]
    exemplars = [(keys[i][0], int(keys[i][1]), float(values[i])) for i in order]
    return DonorSummary(
        indicator=indicator, label=label,
        minimum=float(values.min()), median=float(np.median(values)),
        maximum=float(values.max()), exemplars=exemplars)


def trial_table(log: TrialLog, delimiter: str = ",") -> str:
    """Three-column export of a session: trial number, changes, probability."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["trial", "changes", "membership_probability"])
    for entry in log.entries:
        changes = "; ".join(f"{k} -> {v}" for k, v in entry.overrides.items())
        writer.writerow([entry.number, changes or "(none)",
                         f"{entry.probability:.6g}"])
    return buf.getvalue()
