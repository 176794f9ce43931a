"""Joint dimension reduction and clustering: factorial and reduced k-means.

Both methods alternate a cluster step with a projection step on a columnwise
orthonormal matrix A (14 x q):

  factorial k-means: minimize ||X A - U Y||^2   (within variance in the
      reduced space; A comes from the smallest eigenvectors of the
      within-group scatter)
  reduced k-means:   minimize ||X - U Y A^T||^2 (distance to rank-q "quasi
      centroids"; A comes from the largest eigenvectors of the between-group
      scatter)

Cluster identity and eigenvector sign are arbitrary, so fitted models are
canonicalized: clusters ordered by size descending (ties by first centroid
coordinate), each A column sign-flipped so its largest-magnitude entry is
positive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import StandardizedMatrix
from .errors import NumericError


@dataclass
class JdrcModel:
    """Fitted joint dimension-reduction clustering solution."""

    method: str
    A: np.ndarray              # (p, q) columnwise orthonormal projection
    Y: np.ndarray              # (k, q) centroids in the reduced space
    labels: np.ndarray         # (n,) cluster index per training row
    objective: float
    objective_trace: np.ndarray
    seed: int
    restarts: int
    k: int
    q: int
    n_iter: int = 0
    converged: bool = True

    @property
    def variable_scores(self) -> np.ndarray:
        """Coordinates of the original variables on the reduced components."""
        return self.A

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "method": self.method,
            "k": self.k,
            "q": self.q,
            "A": self.A.tolist(),
            "Y": self.Y.tolist(),
            "sizes": self.sizes.tolist(),
            "labels": self.labels.tolist(),
            "objective": self.objective,
            "objective_trace": self.objective_trace.tolist(),
            "seed": self.seed,
            "restarts": self.restarts,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JdrcModel":
        return cls(
            method=d["method"],
            A=np.array(d["A"], dtype=float),
            Y=np.array(d["Y"], dtype=float),
            labels=np.array(d["labels"], dtype=int),
            objective=float(d["objective"]),
            objective_trace=np.array(d["objective_trace"], dtype=float),
            seed=int(d["seed"]),
            restarts=int(d["restarts"]),
            k=int(d["k"]),
            q=int(d["q"]),
            n_iter=int(d.get("n_iter", 0)),
            converged=bool(d.get("converged", True)),
        )


@dataclass(frozen=True)
class ReducedPoint:
    """A projected row with its cluster assignment."""

    region_id: str
    year: int
    coords: tuple
    cluster: int
    sq_dist_to_centroid: float


def _as_array(std_matrix) -> np.ndarray:
    if isinstance(std_matrix, StandardizedMatrix):
        return std_matrix.data
    return np.asarray(std_matrix, dtype=float)


def kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws; returns k initial centroids."""
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    first = rng.integers(n)
    centroids[0] = X[first]
    closest = np.sum((X - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r))
            idx = min(idx, n - 1)
        centroids[c] = X[idx]
        closest = np.minimum(closest, np.sum((X - centroids[c]) ** 2, axis=1))
    return centroids


def _assign_to_centroids(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Nearest-centroid labels; ties resolved to the lowest cluster index."""
    d2 = np.sum(P ** 2, axis=1, keepdims=True) - 2.0 * P @ Y.T + np.sum(Y ** 2, axis=1)
    return np.argmin(d2, axis=1)


def _repair_empty(P: np.ndarray, labels: np.ndarray, Y: np.ndarray, k: int) -> np.ndarray:
    """Move the point farthest from its centroid into each empty cluster."""
    labels = labels.copy()
    for c in range(k):
        if np.any(labels == c):
            continue
        dists = np.sum((P - Y[labels]) ** 2, axis=1)
        counts = np.bincount(labels, minlength=k)
        # only donate from clusters that can spare a member
        dists[counts[labels] <= 1] = -np.inf
        donor = int(np.argmax(dists))
        labels[donor] = c
        Y = _group_means(P, labels, k)
    return labels


def _group_means(P: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    Y = np.zeros((k, P.shape[1]))
    for c in range(k):
        members = labels == c
        if np.any(members):
            Y[c] = P[members].mean(axis=0)
    return Y


def _within_scatter(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    centered = X - _group_means(X, labels, k)[labels]
    return centered.T @ centered


def _between_scatter(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    means = _group_means(X, labels, k)
    counts = np.bincount(labels, minlength=k).astype(float)
    return (means.T * counts) @ means


def _bottom_eigvecs(M: np.ndarray, q: int) -> np.ndarray:
    vals, vecs = np.linalg.eigh((M + M.T) / 2.0)
    return vecs[:, :q]


def _top_eigvecs(M: np.ndarray, q: int) -> np.ndarray:
    vals, vecs = np.linalg.eigh((M + M.T) / 2.0)
    return vecs[:, ::-1][:, :q]


def _fkm_objective(X, A, labels, k):
    P = X @ A
    return float(np.sum((P - _group_means(P, labels, k)[labels]) ** 2))


def _rkm_objective(X, A, labels, k):
    P = X @ A
    Y = _group_means(P, labels, k)
    return float(np.sum(X ** 2) - 2.0 * np.sum(P * Y[labels]) + np.sum(Y[labels] ** 2))


def _canonicalize(A, Y, labels, k):
    """Deterministic representative: size-descending clusters, positive-max A columns."""
    sizes = np.bincount(labels, minlength=k)
    order = sorted(range(k), key=lambda c: (-sizes[c], Y[c, 0]))
    remap = np.empty(k, dtype=int)
    for new, old in enumerate(order):
        remap[old] = new
    labels = remap[labels]
    Y = Y[order]
    A = A.copy()
    for j in range(A.shape[1]):
        if A[np.argmax(np.abs(A[:, j])), j] < 0:
            A[:, j] = -A[:, j]
            Y[:, j] = -Y[:, j]
    return A, Y, labels


def _validate_fit_args(X, k, q):
    n, p = X.shape
    # q = p is allowed: the projection becomes a rotation and both methods
    # reduce to plain k-means on X.
    if not (1 <= q <= p):
        raise ValueError(f"q must satisfy 1 <= q <= {p}, got {q}")
    if not (2 <= k <= n):
        raise ValueError(f"k must satisfy 2 <= k <= {n}, got {k}")
    if k < q:
        warnings.warn(f"k={k} < q={q}: the reduced space cannot separate "
                      f"more directions than clusters", stacklevel=3)


def _warm_start_labels(X, k, rng, sweeps=20):
    """Full-space k-means++ plus a few Lloyd sweeps.

    Joint solutions whose cluster plane carries most of the between variance
    are unreachable from random projections (the projection step only ever
    picks low-within directions), so half the restarts seed the membership
    from a plain full-space clustering instead.
    """
    Y = kmeanspp_init(X, k, rng)
    labels = _assign_to_centroids(X, Y)
    labels = _repair_empty(X, labels, _group_means(X, labels, k), k)
    for _ in range(sweeps):
        Y = _group_means(X, labels, k)
        new = _assign_to_centroids(X, Y)
        new = _repair_empty(X, new, _group_means(X, new, k), k)
        if np.array_equal(new, labels):
            break
        labels = new
    return labels


def _als_fit(X, k, q, method, seed, restarts, tol, max_iter):
    n, p = X.shape
    objective_fn = _fkm_objective if method == "fkm" else _rkm_objective
    best = None
    master = np.random.SeedSequence(seed)
    for restart, child in enumerate(master.spawn(restarts)):
        rng = np.random.Generator(np.random.PCG64(child))
        if restart % 2 == 1:
            labels = _warm_start_labels(X, k, rng)
        else:
            # random columnwise-orthonormal start, k-means++ on the projection
            G = rng.standard_normal((p, q))
            A, _ = np.linalg.qr(G)
            A = A[:, :q]
            P = X @ A
            Y = kmeanspp_init(P, k, rng)
            labels = _assign_to_centroids(P, Y)
            labels = _repair_empty(P, labels, _group_means(P, labels, k), k)

        trace = []
        prev = None
        n_iter = 0
        converged = False
        for n_iter in range(1, max_iter + 1):
            # projection step
            if method == "fkm":
                A = _bottom_eigvecs(_within_scatter(X, labels, k), q)
            else:
                A = _top_eigvecs(_between_scatter(X, labels, k), q)
            # cluster step on the new projection
            P = X @ A
            Y = _group_means(P, labels, k)
            labels = _assign_to_centroids(P, Y)
            labels = _repair_empty(P, labels, _group_means(P, labels, k), k)
            Y = _group_means(P, labels, k)
            obj = objective_fn(X, A, labels, k)
            trace.append(obj)
            if not np.isfinite(obj):
                raise NumericError(f"{method} objective became non-finite")
            if prev is not None and prev - obj <= tol * max(abs(prev), 1.0):
                converged = True
                break
            prev = obj
        if best is None or trace[-1] < best["objective"] - 1e-12:
            best = {"A": A, "Y": Y, "labels": labels, "objective": trace[-1],
                    "trace": np.array(trace), "n_iter": n_iter,
                    "converged": converged}
    A, Y, labels = _canonicalize(best["A"], best["Y"], best["labels"], k)
    return JdrcModel(
        method=method, A=A, Y=Y, labels=labels,
        objective=best["objective"], objective_trace=best["trace"],
        seed=seed, restarts=restarts, k=k, q=q,
        n_iter=best["n_iter"], converged=best["converged"],
    )


def fit_fkm(std_matrix, k: int, q: int, *, seed: int = 0, restarts: int = 100,
            tol: float = 1e-8, max_iter: int = 200) -> JdrcModel:
    """Factorial k-means: best of `restarts` seeded alternating optimizations."""
    X = _as_array(std_matrix)
    _validate_fit_args(X, k, q)
    return _als_fit(X, k, q, "fkm", seed, restarts, tol, max_iter)


def fit_rkm(std_matrix, k: int, q: int, *, seed: int = 0, restarts: int = 100,
            tol: float = 1e-8, max_iter: int = 200) -> JdrcModel:
    """Reduced k-means: same contract as fit_fkm with the RKM objective."""
    X = _as_array(std_matrix)
    _validate_fit_args(X, k, q)
    return _als_fit(X, k, q, "rkm", seed, restarts, tol, max_iter)


def project(model: JdrcModel, std_rows: np.ndarray) -> np.ndarray:
    """Reduced-space coordinates of standardized rows (rows @ A)."""
    rows = np.atleast_2d(np.asarray(std_rows, dtype=float))
    if rows.shape[1] != model.A.shape[0]:
        raise ValueError(f"expected {model.A.shape[0]} features, got {rows.shape[1]}")
    return rows @ model.A


def assign(model: JdrcModel, coords: np.ndarray):
    """Nearest centroid for one reduced-space point: (cluster index, squared distance)."""
    c = np.asarray(coords, dtype=float).reshape(-1)
    d2 = np.sum((model.Y - c) ** 2, axis=1)
    cluster = int(np.argmin(d2))  # argmin takes the lowest index on ties
    return cluster, float(d2[cluster])


def within_ss(labels: np.ndarray, coords: np.ndarray, k: int | None = None):
    """Per-cluster and total sum of squared distances to own-cluster means.

    Centroids are recomputed from the given labels, so this measures the
    compactness of any labeling over the same coordinates.
    """
    labels = np.asarray(labels)
    coords = np.asarray(coords, dtype=float)
    uniq = np.unique(labels)
    if k is not None:
        expected = set(range(k))
        present = set(int(u) for u in uniq)
        if not expected <= present:
            raise ValueError(f"empty clusters: {sorted(expected - present)}")
    per_cluster = {}
    total = 0.0
    for c in uniq:
        members = coords[labels == c]
        ss = float(np.sum((members - members.mean(axis=0)) ** 2))
        per_cluster[int(c) if np.issubdtype(labels.dtype, np.integer) else c] = ss
        total += ss
    return per_cluster, total


def nearest_to_centroid(model: JdrcModel, coords: np.ndarray, keys):
    """The member row closest to its centroid, for each cluster."""
    coords = np.asarray(coords, dtype=float)
    labels = _assign_to_centroids(coords, model.Y)
    out = []
    for c in range(model.k):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        d2 = np.sum((coords[members] - model.Y[c]) ** 2, axis=1)
        best = members[int(np.argmin(d2))]
        region_id, year = keys[best]
        out.append(ReducedPoint(region_id, int(year), tuple(coords[best]),
                                c, float(d2.min())))
    return out


def agreement_matrix(fkm_labels: np.ndarray, euris_labels: np.ndarray,
                     k: int = 4, n_classes: int = 4):
    """Cross-tab of cluster membership against EURIS tiers.

    Returns (counts, row_pct, col_pct). row_pct normalizes by cluster size
    (the default display); col_pct by EURIS class size. EURIS codes are 1-4.
    """
    fkm = np.asarray(fkm_labels)
    eur = np.asarray(euris_labels)
    if fkm.shape != eur.shape:
        raise ValueError(f"label vectors differ in length: {fkm.shape} vs {eur.shape}")
    counts = np.zeros((k, n_classes), dtype=int)
    for c, e in zip(fkm, eur):
        counts[int(c), int(e) - 1] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        row_pct = 100.0 * counts / np.maximum(counts.sum(axis=1, keepdims=True), 1)
        col_pct = 100.0 * counts / np.maximum(counts.sum(axis=0, keepdims=True), 1)
    return counts, row_pct, col_pct


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Adjusted Rand index between two flat labelings."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("labelings differ in length")
    n = a.size
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    for i, j in zip(ia, ib):
        table[i, j] += 1

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / comb2(n)
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))
