"""End-to-end pipeline: ingest, screen, reduce, cluster, label, train, shift.

A run is reproducible from (config, input file) alone; all randomness is
seeded from the config and the resulting bundle is byte-deterministic.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import bundle as bundle_mod
from . import classifier as clf
from . import jdrc, labeling, pca, shift
from .dataset import (
    LABEL_NAMES,
    ColumnSchema,
    IndicatorPanel,
    correlation_analysis,
    correlation_table,
    load_scoreboard,
    standardize,
)
from .errors import StageError


@dataclass
class PipelineConfig:
    """Everything a run needs beyond the input file."""

    input_path: str = ""
    delimiter: str = ","
    k: int = 4
    q_policy: str = "elbow_on_gt_one"
    q_manual: int | None = None
    seed: int = 0
    restarts: int = 100
    tol: float = 1e-8
    max_iter: int = 200
    axis_directions: tuple = (1, 1)
    axis_names: tuple = ("R&D intensity", "technical-scientific capability")
    pivot_mode: str = "mean_anchored"
    significance: float = 0.05
    hidden_units: int = 100
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32

    def to_dict(self) -> dict:
        d = asdict(self)
        d["axis_directions"] = list(self.axis_directions)
        d["axis_names"] = list(self.axis_names)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        d["axis_directions"] = tuple(d.get("axis_directions", (1, 1)))
        d["axis_names"] = tuple(d.get("axis_names", cls.axis_names))
        if "q_manual" in d and d["q_manual"] is not None:
            d["q_manual"] = int(d["q_manual"])
        return cls(**d)

    def fingerprint(self) -> str:
        return bundle_mod.sha256_text(bundle_mod.canonical_json(self.to_dict()))

    def hyperparams(self) -> clf.HyperParams:
        return clf.HyperParams(hidden_units=self.hidden_units,
                               learning_rate=self.learning_rate,
                               epochs=self.epochs,
                               batch_size=self.batch_size)

    def validate(self):
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.q_policy not in ("elbow_on_gt_one", "eigenvalue_gt_one",
                                 "manual"):
            raise ValueError(f"unknown q policy: {self.q_policy!r}")
        if self.q_policy == "manual" and self.q_manual is None:
            raise ValueError("manual q policy requires q_manual")
        if self.restarts < 1:
            raise ValueError("restarts must be positive")


@dataclass
class RunArtifacts:
    """In-memory results of one pipeline run."""

    config: PipelineConfig
    panel: IndicatorPanel
    std: object
    correlation: object
    pca_model: pca.PcaModel
    q: int
    model: jdrc.JdrcModel
    coords: np.ndarray
    labeling: labeling.ClusterLabeling
    flags: labeling.PivotFlags
    agreement: tuple
    compactness: dict
    classifier: clf.MembershipClassifier
    leader_report: clf.EvaluationReport
    comparison: dict
    split_sizes: tuple
    shift: shift.ShiftReport

    def leader_cluster(self) -> int:
        return self.labeling.leader_cluster


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        return inner
    return wrap


def run_pipeline(config: PipelineConfig,
                 panel: IndicatorPanel | None = None) -> RunArtifacts:
    """Execute every stage; any failure aborts with the stage name."""
    config.validate()
    if panel is None:
        panel = _stage("ingest")(load_scoreboard)(
            config.input_path, ColumnSchema(), config.delimiter)

    std = _stage("standardize")(standardize)(panel)
    correlation = _stage("correlate")(correlation_analysis)(panel)
    pca_model = _stage("pca")(pca.fit_pca)(std)
    q = _stage("pca")(pca.select_components)(
        pca_model, config.q_policy, config.q_manual)

    model = _stage("cluster")(jdrc.fit_fkm)(
        std, config.k, q, seed=config.seed, restarts=config.restarts,
        tol=config.tol, max_iter=config.max_iter)
    coords = jdrc.project(model, std.data)

    semantics = _semantics_for_q(config, q)
    tier_map = _stage("label")(labeling.rank_centroids)(model, semantics)
    flags = _stage("label")(labeling.pivot_filter)(model, coords,
                                                   config.pivot_mode)
    euris = panel.euris_labels()
    agreement = jdrc.agreement_matrix(model.labels, euris, model.k)
    _, within_fkm = jdrc.within_ss(model.labels, coords)
    _, within_euris = jdrc.within_ss(euris, coords)
    compactness = {"fkm_within_ss": within_fkm,
                   "euris_within_ss": within_euris}

    classifier, leader_report, comparison, split_sizes = _stage("train")(
        _train_stage)(config, panel, model, tier_map, flags, euris)

    shift_report = _stage("shift")(shift.shift_report)(
        panel, config.significance)

    return RunArtifacts(
        config=config, panel=panel, std=std, correlation=correlation,
        pca_model=pca_model, q=q, model=model, coords=coords,
        labeling=tier_map, flags=flags, agreement=agreement,
        compactness=compactness, classifier=classifier,
        leader_report=leader_report, comparison=comparison,
        split_sizes=split_sizes, shift=shift_report)


def _semantics_for_q(config: PipelineConfig, q: int) -> labeling.AxisSemantics:
    """Pad or truncate the configured orientations to the selected q
    (extra components default to higher-is-better)."""
    directions = list(config.axis_directions)[:q]
    names = list(config.axis_names)[:q]
    while len(directions) < q:
        directions.append(1)
    while len(names) < q:
        names.append(f"component {len(names) + 1}")
    return labeling.AxisSemantics(tuple(directions), tuple(names))


def _train_stage(config, panel, model, tier_map, flags, euris):
    features = panel.values_matrix()
    leader = tier_map.leader_cluster
    fkm_binary = (model.labels == leader).astype(int)
    euris_binary = (euris == 1).astype(int)
    pivot_idx = np.flatnonzero(flags.is_pivot)
    inter_idx = np.flatnonzero(fkm_binary == euris_binary)

    hp = config.hyperparams()
    task = clf.BinaryTask("Innovation leader", features, fkm_binary)
    classifier, leader_report, splits = clf.run_protocol(
        task, seed=config.seed, hyperparams=hp)

    tasks = [
        clf.BinaryTask("euris", features, euris_binary),
        clf.BinaryTask("fkm", features, fkm_binary),
        clf.BinaryTask("fine_tuned", features[pivot_idx],
                       fkm_binary[pivot_idx]),
        clf.BinaryTask("intersection", features[inter_idx],
                       fkm_binary[inter_idx]),
    ]
    comparison = clf.compare_labelings(tasks, seed=config.seed,
                                       hyperparams=hp)
    return classifier, leader_report, comparison, splits.sizes


# --- serialization -----------------------------------------------------------

def panel_csv(panel: IndicatorPanel) -> str:
    """Normalized panel snapshot (the bundle's self-contained data copy)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    codes = [n.split(" ", 1)[0] for n in panel.indicator_names]
    writer.writerow(["region", "year", *codes, "euris_label"])
    for row in panel.rows:
        writer.writerow([row.region_id, row.year,
                         *[repr(float(v)) for v in row.values],
                         row.euris_label])
    return buf.getvalue()


def regions_document(artifacts: RunArtifacts) -> list:
    rows = []
    tier_map = artifacts.labeling
    for i, row in enumerate(artifacts.panel.rows):
        c = int(artifacts.flags.cluster[i])
        rows.append({
            "region": row.region_id,
            "year": row.year,
            "coords": [float(x) for x in artifacts.coords[i]],
            "cluster": c,
            "fkm_label": tier_map.labels[c],
            "euris_code": row.euris_label,
            "euris_label": LABEL_NAMES[row.euris_label],
            "distance": float(artifacts.flags.dist[i]),
            "pivot": bool(artifacts.flags.is_pivot[i]),
        })
    return rows


def clusters_document(artifacts: RunArtifacts) -> dict:
    model = artifacts.model
    tier_map = artifacts.labeling
    counts, row_pct, col_pct = artifacts.agreement
    nearest = jdrc.nearest_to_centroid(model, artifacts.coords,
                                       artifacts.panel.keys())
    near_doc = {p.cluster: {"region": p.region_id, "year": p.year,
                            "distance": float(np.sqrt(p.sq_dist_to_centroid))}
                for p in nearest}
    clusters = []
    for c in range(model.k):
        members = artifacts.flags.cluster == c
        clusters.append({
            "cluster": c,
            "label": tier_map.labels[c],
            "rank": tier_map.ranks[c],
            "size": int(model.sizes[c]),
            "centroid": [float(x) for x in model.Y[c]],
            "distance_to_leader": tier_map.distance_to_leader[c],
            "pivot_share": float(artifacts.flags.is_pivot[members].mean()),
            "nearest_member": near_doc.get(c),
        })
    features = artifacts.panel.values_matrix()
    return {
        "schema_version": 1,
        "clusters": clusters,
        "indicator_ranges": {
            name.split(" ", 1)[0]: {"name": name,
                                    "min": float(features[:, j].min()),
                                    "max": float(features[:, j].max())}
            for j, name in enumerate(artifacts.panel.indicator_names)},
        "variable_scores": {
            name: [float(x) for x in artifacts.model.variable_scores[j]]
            for j, name in enumerate(artifacts.panel.indicator_names)},
        "axis_names": list(artifacts.config.axis_names),
        "axis_directions": list(artifacts.config.axis_directions),
        "agreement_counts": counts.tolist(),
        "agreement_row_pct": np.round(row_pct, 4).tolist(),
        "agreement_col_pct": np.round(col_pct, 4).tolist(),
        "compactness": artifacts.compactness,
    }


def pca_document(artifacts: RunArtifacts) -> dict:
    m = artifacts.pca_model
    return {
        "schema_version": 1,
        "eigenvalues": m.eigenvalues.tolist(),
        "explained": m.explained.tolist(),
        "cumulative": m.cumulative.tolist(),
        "loadings": m.loadings.tolist(),
        "selected_q": artifacts.q,
        "q_policy": artifacts.config.q_policy,
    }


def shift_document(artifacts: RunArtifacts) -> dict:
    return {
        "schema_version": 1,
        "significance": artifacts.shift.significance,
        "rows": [
            {k: (None if isinstance(v, float) and not np.isfinite(v) else v)
             for k, v in r.__dict__.items()}
            for r in artifacts.shift.rows
        ],
    }


def comparison_document(artifacts: RunArtifacts) -> dict:
    return {
        "schema_version": 1,
        "split_sizes": list(artifacts.split_sizes),
        "leader_task": artifacts.leader_report.to_dict(),
        "labelings": {name: rep.to_dict()
                      for name, rep in artifacts.comparison.items()},
    }


def write_artifacts(artifacts: RunArtifacts, out_dir) -> Path:
    documents = {
        "config.json": {"schema_version": 1,
                        "config": artifacts.config.to_dict(),
                        "fingerprint": artifacts.config.fingerprint()},
        "pca.json": pca_document(artifacts),
        "jdrc.json": artifacts.model.to_dict(),
        "labeling.json": {
            "schema_version": 1,
            "labels": {str(c): n for c, n in artifacts.labeling.labels.items()},
            "ranks": {str(c): r for c, r in artifacts.labeling.ranks.items()},
            "distance_to_leader": {
                str(c): d
                for c, d in artifacts.labeling.distance_to_leader.items()},
            "leader_cluster": artifacts.labeling.leader_cluster,
            "pivot_mode": artifacts.flags.mode,
        },
        "regions.json": regions_document(artifacts),
        "clusters.json": clusters_document(artifacts),
        "classifier.json": artifacts.classifier.to_dict(),
        "comparison.json": comparison_document(artifacts),
        "shift.json": shift_document(artifacts),
    }
    reports = {
        "panel.csv": panel_csv(artifacts.panel),
        "reports/correlation.csv": correlation_table(artifacts.correlation),
        "reports/variance.csv": pca.variance_table_text(artifacts.pca_model),
        "reports/labeling.csv": labeling.labeling_table(
            artifacts.panel, artifacts.flags, artifacts.labeling),
        "reports/comparison.csv": clf.evaluation_table(
            {"leader": artifacts.leader_report, **artifacts.comparison}),
        "reports/shift.csv": shift.shift_table(artifacts.shift),
    }
    return bundle_mod.write_bundle(out_dir, documents, reports)


def load_bundle_panel(bundle_dir) -> IndicatorPanel:
    path = Path(bundle_dir) / "panel.csv"
    with path.open("r", encoding="utf-8", newline="") as fh:
        return load_scoreboard(fh, ColumnSchema())
