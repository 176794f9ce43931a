"""Command-line driver: stage commands, the full pipeline, and the service.

Every option can also come from an INNOSCOPE_-prefixed environment variable
(INNOSCOPE_INPUT, INNOSCOPE_SEED, ...).
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from . import bundle as bundle_mod
from . import jdrc, labeling, pca, service, shift, whatif
from .classifier import MembershipClassifier
from .dataset import (
    ColumnSchema,
    correlation_analysis,
    correlation_table,
    load_scoreboard,
    standardize,
)
from .errors import InnoscopeError, StageError
from .pipeline import PipelineConfig, load_bundle_panel, run_pipeline, \
    write_artifacts

CONTEXT = dict(auto_envvar_prefix="INNOSCOPE")


def _config_from(ctx_params, config_path=None) -> PipelineConfig:
    if config_path:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        config = PipelineConfig.from_dict(data.get("config", data))
    else:
        config = PipelineConfig()
    for key in ("input_path", "delimiter", "k", "q_policy", "q_manual",
                "seed", "restarts"):
        value = ctx_params.get(key)
        if value is not None:
            setattr(config, key, value)
    return config


def _load_panel(input_path, delimiter):
    if not input_path:
        raise click.UsageError("an --input file is required")
    return load_scoreboard(input_path, ColumnSchema(), delimiter)


input_option = click.option("--input", "input_path", type=click.Path(),
                            help="delimiter-separated scoreboard file")
delimiter_option = click.option("--delimiter", default=",", show_default=True)
out_option = click.option("--out", "out_dir", type=click.Path(),
                          default="innoscope-out", show_default=True,
                          help="bundle directory")
seed_option = click.option("--seed", type=int, default=0, show_default=True)


@click.group(context_settings=CONTEXT)
def main():
    """Regional-innovation analysis: clustering, labeling, what-if trials."""


@main.command()
@input_option
@delimiter_option
def ingest(input_path, delimiter):
    """Validate an input file and summarize the panel."""
    panel = _load_panel(input_path, delimiter)
    years = panel.years()
    click.echo(f"rows: {panel.n_rows}")
    click.echo(f"regions: {len(set(r.region_id for r in panel.rows))}")
    click.echo(f"years: {years.min()}-{years.max()}")
    codes, counts = np.unique(panel.euris_labels(), return_counts=True)
    for code, count in zip(codes, counts):
        click.echo(f"EURIS {code}: {count}")


@main.command()
@input_option
@delimiter_option
@click.option("--out", "out_file", type=click.Path(), default=None,
              help="write the pairwise table here instead of stdout")
def correlate(input_path, delimiter, out_file):
    """Pairwise correlation screening with Holm adjustment."""
    panel = _load_panel(input_path, delimiter)
    text = correlation_table(correlation_analysis(panel))
    if out_file:
        Path(out_file).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_file}")
    else:
        click.echo(text, nl=False)


@main.command(name="pca")
@input_option
@delimiter_option
@click.option("--q-policy", default="elbow_on_gt_one", show_default=True)
def pca_cmd(input_path, delimiter, q_policy):
    """Eigendecomposition of the correlation matrix."""
    panel = _load_panel(input_path, delimiter)
    model = pca.fit_pca(standardize(panel))
    click.echo(pca.variance_table_text(model), nl=False)
    click.echo(f"selected q ({q_policy}): "
               f"{pca.select_components(model, q_policy)}")


@main.command()
@input_option
@delimiter_option
@out_option
@click.option("--k", type=int, default=4, show_default=True)
@click.option("--q-policy", default="elbow_on_gt_one", show_default=True)
@click.option("--restarts", type=int, default=100, show_default=True)
@seed_option
def cluster(input_path, delimiter, out_dir, k, q_policy, restarts, seed):
    """Fit the factorial clustering and print the solution blocks."""
    panel = _load_panel(input_path, delimiter)
    std = standardize(panel)
    q = pca.select_components(pca.fit_pca(std), q_policy)
    model = jdrc.fit_fkm(std, k, q, seed=seed, restarts=restarts)
    coords = jdrc.project(model, std.data)

    click.echo("Cluster centroids:")
    for c in range(model.k):
        click.echo(f"  cluster {c + 1}: "
                   + "  ".join(f"{v: .4f}" for v in model.Y[c]))
    click.echo("\nVariable scores:")
    for name, row in zip(panel.indicator_names, model.variable_scores):
        click.echo(f"  {name}: " + "  ".join(f"{v: .4f}" for v in row))
    click.echo("\nCluster sizes:")
    for c, size in enumerate(model.sizes):
        click.echo(f"  cluster {c + 1}: {size} regions")
    click.echo("\nRegions closest to their centroid:")
    for point in jdrc.nearest_to_centroid(model, coords, panel.keys()):
        click.echo(f"  cluster {point.cluster + 1}: "
                   f"{point.region_id}_{point.year} "
                   f"(distance {np.sqrt(point.sq_dist_to_centroid):.6f})")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    doc = bundle_mod.canonical_json(model.to_dict())
    (Path(out_dir) / "jdrc.json").write_text(doc, encoding="utf-8")
    click.echo(f"\nwrote {out_dir}/jdrc.json")


@main.command()
@input_option
@delimiter_option
@out_option
@seed_option
def label(input_path, delimiter, out_dir, seed):
    """Tier labels, pivot flags and the agreement cross-tab."""
    panel = _load_panel(input_path, delimiter)
    std = standardize(panel)
    model = _model_from_bundle_or_fit(out_dir, std, seed)
    coords = jdrc.project(model, std.data)
    tiers = labeling.rank_centroids(model, labeling.AxisSemantics((1, 1)))
    flags = labeling.pivot_filter(model, coords)
    for c in range(model.k):
        click.echo(f"cluster {c + 1}: {tiers.labels[c]} "
                   f"(rank {tiers.ranks[c]}, "
                   f"pivot share {100 * flags.share(c):.1f}%)")
    counts, row_pct, _ = jdrc.agreement_matrix(model.labels,
                                               panel.euris_labels(), model.k)
    click.echo("agreement row %: " + json.dumps(np.round(row_pct, 2).tolist()))
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    (Path(out_dir) / "reports").mkdir(exist_ok=True)
    (Path(out_dir) / "reports/labeling.csv").write_text(
        labeling.labeling_table(panel, flags, tiers), encoding="utf-8")
    click.echo(f"wrote {out_dir}/reports/labeling.csv")


def _model_from_bundle_or_fit(out_dir, std, seed):
    path = Path(out_dir) / "jdrc.json"
    if path.exists():
        return jdrc.JdrcModel.from_dict(json.loads(path.read_text()))
    q = pca.select_components(pca.fit_pca(std), "elbow_on_gt_one")
    return jdrc.fit_fkm(std, 4, q, seed=seed, restarts=100)


@main.command()
@input_option
@delimiter_option
@out_option
@seed_option
def train(input_path, delimiter, out_dir, seed):
    """Train the leader-membership classifier against the fitted clusters."""
    from . import classifier as clf

    panel = _load_panel(input_path, delimiter)
    std = standardize(panel)
    model = _model_from_bundle_or_fit(out_dir, std, seed)
    tiers = labeling.rank_centroids(model, labeling.AxisSemantics((1, 1)))
    binary = (model.labels == tiers.leader_cluster).astype(int)
    task = clf.BinaryTask("Innovation leader", panel.values_matrix(), binary)
    classifier, report, splits = clf.run_protocol(task, seed=seed)
    click.echo(f"splits: {splits.sizes}")
    click.echo(f"test accuracy: {report.accuracy:.4f}  "
               f"precision(1): {report.precision(1):.4f}  "
               f"recall(1): {report.recall(1):.4f}")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    (Path(out_dir) / "classifier.json").write_text(
        bundle_mod.canonical_json(classifier.to_dict()), encoding="utf-8")
    click.echo(f"wrote {out_dir}/classifier.json")


@main.command(name="whatif")
@click.option("--bundle", "bundle_dir", type=click.Path(exists=True),
              required=True)
@click.option("--base-region", required=True)
@click.option("--base-year", type=int, required=True)
@click.option("--set", "overrides", multiple=True,
              help="indicator=value, repeatable")
@click.option("--session-file", type=click.Path(), default=None,
              help="trial log to continue and update")
def whatif_cmd(bundle_dir, base_region, base_year, overrides, session_file):
    """Run one progressive trial against a bundle's classifier."""
    panel = load_bundle_panel(bundle_dir)
    classifier = MembershipClassifier.from_dict(
        bundle_mod.read_document(bundle_dir, "classifier.json"))
    if session_file and Path(session_file).exists():
        log = whatif.TrialLog.loads(Path(session_file).read_text())
    else:
        labeling_doc = bundle_mod.read_document(bundle_dir, "labeling.json")
        leader = labeling_doc["labels"][str(labeling_doc["leader_cluster"])]
        log = whatif.TrialLog(base_region, base_year, leader)
    parsed = {}
    for item in overrides:
        name, _, value = item.partition("=")
        parsed[name.strip()] = float(value)
    entry = whatif.run_trial(log, panel, parsed, classifier)
    click.echo(f"trial {entry.number}: probability {entry.probability:.6f}")
    if entry.out_of_range:
        click.echo("out of training range: " + ", ".join(entry.out_of_range))
    if session_file:
        Path(session_file).write_text(log.dumps(), encoding="utf-8")
        click.echo(f"updated {session_file}")


@main.command(name="shift")
@input_option
@delimiter_option
@click.option("--significance", type=float, default=0.05, show_default=True)
def shift_cmd(input_path, delimiter, significance):
    """Two-sample KS period-shift report for every indicator."""
    panel = _load_panel(input_path, delimiter)
    click.echo(shift.shift_table(shift.shift_report(panel, significance)),
               nl=False)


@main.command()
@input_option
@delimiter_option
@out_option
@seed_option
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON pipeline config")
@click.option("--k", type=int, default=None)
@click.option("--q-policy", default=None)
@click.option("--restarts", type=int, default=None)
def pipeline(input_path, delimiter, out_dir, seed, config_path, k, q_policy,
             restarts):
    """Run every stage and write the artifacts bundle."""
    config = _config_from(
        {"input_path": input_path, "delimiter": delimiter, "seed": seed,
         "k": k, "q_policy": q_policy, "restarts": restarts}, config_path)
    try:
        artifacts = run_pipeline(config)
    except StageError as exc:
        raise click.ClickException(str(exc)) from exc
    except InnoscopeError as exc:
        raise click.ClickException(f"pipeline failed: {exc}") from exc
    out = write_artifacts(artifacts, out_dir)
    click.echo(f"bundle written to {out}")
    click.echo(f"clusters: {artifacts.model.sizes.tolist()}  q: {artifacts.q}")
    click.echo(f"leader test accuracy: {artifacts.leader_report.accuracy:.4f}")


@main.command()
@click.option("--bundle", "bundle_dir", type=click.Path(exists=True),
              required=True)
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
def serve(bundle_dir, bind):
    """Serve a bundle over HTTP for scripts and the explorer UI."""
    click.echo(f"serving {bundle_dir} on {bind}")
    service.serve(bundle_dir, bind)


if __name__ == "__main__":
    main()
