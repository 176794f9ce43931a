"""Turn a fitted clustering into scoreboard-style tier labels.

Centroids are ranked against declared axis orientations (which direction of
each reduced component means "more innovative"), pivot members are flagged
from their distance distribution, and members are ranked within clusters.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import LABEL_NAMES, IndicatorPanel
from .jdrc import JdrcModel

TIER_ORDER = ("Innovation leader", "Strong innovator",
              "Moderate innovator", "Emerging innovator")


@dataclass(frozen=True)
class AxisSemantics:
    """Orientation of each reduced component: +1 if higher is better, -1 if lower.

    Component meaning is a human judgment over the variable scores, so this
    is explicit configuration rather than something inferred from loadings.
    Optional display names annotate reports only.
    """

    directions: tuple = (1, -1)
    component_names: tuple = ("component 1", "component 2")

    def oriented(self, coords: np.ndarray) -> np.ndarray:
        return np.asarray(coords, dtype=float) * np.asarray(self.directions)


@dataclass
class ClusterLabeling:
    """Bijective assignment of the four tier names to the four clusters."""

    labels: dict                  # cluster index -> tier name
    ranks: dict                   # cluster index -> 1..4
    distance_to_leader: dict      # cluster index -> Euclidean distance
    leader_cluster: int

    def cluster_for(self, tier: str) -> int:
        for c, name in self.labels.items():
            if name == tier:
                return c
        raise KeyError(tier)

    def name_codes(self) -> dict:
        """Cluster index -> EURIS integer code of the assigned tier."""
        inverse = {name: code for code, name in LABEL_NAMES.items()}
        return {c: inverse[name] for c, name in self.labels.items()}


def rank_centroids(model: JdrcModel, axis_semantics: AxisSemantics) -> ClusterLabeling:
    """Assign tier names from centroid geometry.

    The leader is the centroid extremal in every declared better direction
    and the emerging cluster the one extremal in every worse direction; the
    two middle clusters take Strong/Moderate by ascending distance to the
    leader centroid. Without a dominant extreme the ranking falls back to
    distance from the oriented best corner, with a warning.
    """
    if model.k != 4:
        raise ValueError(f"tier labeling requires k=4, got k={model.k}")
    if model.Y.shape[1] != len(axis_semantics.directions):
        raise ValueError("axis semantics do not match the model dimensionality")
    oriented = axis_semantics.oriented(model.Y)
    dominant_max = [c for c in range(4)
                    if np.all(oriented[c] >= oriented.max(axis=0) - 1e-12)]
    dominant_min = [c for c in range(4)
                    if np.all(oriented[c] <= oriented.min(axis=0) + 1e-12)]
    if len(dominant_max) == 1 and len(dominant_min) == 1 \
            and dominant_max[0] != dominant_min[0]:
        leader = dominant_max[0]
        emerging = dominant_min[0]
        middle = [c for c in range(4) if c not in (leader, emerging)]
        d_leader = np.linalg.norm(model.Y - model.Y[leader], axis=1)
        middle.sort(key=lambda c: (d_leader[c], c))
        order = [leader, *middle, emerging]
    else:
        warnings.warn("no centroid dominates the declared orientations; "
                      "ranking by distance to the oriented best corner",
                      stacklevel=2)
        corner = oriented.max(axis=0)
        d_corner = np.linalg.norm(oriented - corner, axis=1)
        order = sorted(range(4), key=lambda c: (d_corner[c], c))
        leader = order[0]
        d_leader = np.linalg.norm(model.Y - model.Y[leader], axis=1)
    labels = {c: TIER_ORDER[pos] for pos, c in enumerate(order)}
    ranks = {c: pos + 1 for pos, c in enumerate(order)}
    return ClusterLabeling(
        labels=labels, ranks=ranks,
        distance_to_leader={c: float(d_leader[c]) for c in range(4)},
        leader_cluster=order[0],
    )


@dataclass
class PivotFlags:
    """Per-row pivot flags with the distance statistics behind them.

    A member is a pivot when its centroid distance lies within the cluster's
    distance distribution band. The default mean-anchored band is
    dist <= mu_c + sigma_c; the strict zero-anchored reading (dist <= sigma_c)
    is available via pivot_filter(mode="zero_anchored"). Population sigma.
    """

    is_pivot: np.ndarray
    dist: np.ndarray
    cluster: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    mode: str = "mean_anchored"

    def share(self, cluster: int) -> float:
        members = self.cluster == cluster
        return float(self.is_pivot[members].mean()) if members.any() else float("nan")


def pivot_filter(model: JdrcModel, coords: np.ndarray,
                 mode: str = "mean_anchored") -> PivotFlags:
    """Flag members whose centroid distance is inside the cluster band."""
    if mode not in ("mean_anchored", "zero_anchored"):
        raise ValueError(f"unknown pivot mode: {mode!r}")
    coords = np.asarray(coords, dtype=float)
    d2 = np.sum(coords ** 2, axis=1, keepdims=True) \
        - 2.0 * coords @ model.Y.T + np.sum(model.Y ** 2, axis=1)
    labels = np.argmin(d2, axis=1)
    dist = np.sqrt(np.maximum(np.take_along_axis(
        d2, labels[:, None], axis=1).ravel(), 0.0))
    mu = np.zeros(model.k)
    sigma = np.zeros(model.k)
    is_pivot = np.zeros(coords.shape[0], dtype=bool)
    for c in range(model.k):
        members = labels == c
        n_c = int(members.sum())
        if n_c == 0:
            continue
        if n_c < 2:
            warnings.warn(f"cluster {c} has fewer than 2 members; sigma undefined, "
                          f"all flagged pivot", stacklevel=2)
            mu[c] = float(dist[members].mean())
            sigma[c] = float("nan")
            is_pivot[members] = True
            continue
        mu[c] = float(dist[members].mean())
        sigma[c] = float(dist[members].std())  # population form
        threshold = mu[c] + sigma[c] if mode == "mean_anchored" else sigma[c]
        # tolerance keeps exactly-equidistant members (sigma = 0) inside
        is_pivot[members] = dist[members] <= threshold * (1 + 1e-12) + 1e-12
    return PivotFlags(is_pivot, dist, labels, mu, sigma, mode)


@dataclass(frozen=True)
class RankedMember:
    region_id: str
    year: int
    distance: float


def intra_cluster_ranking(model: JdrcModel, coords: np.ndarray, keys,
                          labeling: ClusterLabeling,
                          axis_semantics: AxisSemantics | None = None,
                          target: str = "corner"):
    """Order members of each cluster by distance to an improvement target.

    target="corner" (default) measures against the cluster's own best corner:
    the componentwise extreme of its members in the declared better
    directions. target="centroid" measures against the cluster centroid, in
    which case each rank-1 member is the nearest-to-centroid row. Ties break
    on region id then year. The returned mapping also carries, per cluster,
    the member closest to the leader centroid ("first in class").
    """
    if target not in ("corner", "centroid"):
        raise ValueError(f"unknown ranking target: {target!r}")
    if target == "corner" and axis_semantics is None:
        raise ValueError("corner target requires axis semantics")
    coords = np.asarray(coords, dtype=float)
    d2 = np.sum(coords ** 2, axis=1, keepdims=True) \
        - 2.0 * coords @ model.Y.T + np.sum(model.Y ** 2, axis=1)
    labels = np.argmin(d2, axis=1)
    leader = labeling.leader_cluster
    rankings = {}
    first_in_class = {}
    for c in range(model.k):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            rankings[c] = []
            continue
        pts = coords[members]
        if target == "centroid":
            goal = model.Y[c]
        else:
            oriented = axis_semantics.oriented(pts)
            goal = axis_semantics.oriented(oriented.max(axis=0))  # un-orient corner
        dists = np.linalg.norm(pts - goal, axis=1)
        order = sorted(
            range(members.size),
            key=lambda i: (dists[i], keys[members[i]][0], keys[members[i]][1]))
        rankings[c] = [RankedMember(keys[members[i]][0], int(keys[members[i]][1]),
                                    float(dists[i])) for i in order]
        d_leader = np.linalg.norm(pts - model.Y[leader], axis=1)
        j = int(np.argmin(d_leader))
        first_in_class[c] = RankedMember(keys[members[j]][0],
                                         int(keys[members[j]][1]),
                                         float(d_leader[j]))
    return rankings, first_in_class


def fine_tuned_dataset(flags: PivotFlags, panel: IndicatorPanel,
                       labeling: ClusterLabeling):
    """Restrict the panel to pivot rows, carrying the fitted tier labels.

    Returns (pivot panel, cluster indices, tier names) aligned row-wise;
    the supervised fine-tuning stage trains on exactly this subset.
    """
    mask = flags.is_pivot
    sub = panel.subset(mask)
    clusters = flags.cluster[mask]
    names = [labeling.labels[int(c)] for c in clusters]
    return sub, clusters, names


def labeling_table(panel: IndicatorPanel, flags: PivotFlags,
                   labeling: ClusterLabeling, delimiter: str = ",") -> str:
    """Row-level export: region, year, cluster, tier, EURIS label, distance, pivot."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["region", "year", "fkm_cluster", "fkm_label",
                     "euris_label", "distance", "pivot"])
    for i, row in enumerate(panel.rows):
        c = int(flags.cluster[i])
        writer.writerow([row.region_id, row.year, c + 1, labeling.labels[c],
                         LABEL_NAMES[row.euris_label],
                         f"{flags.dist[i]:.6f}", int(flags.is_pivot[i])])
    return buf.getvalue()
