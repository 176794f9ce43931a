import itertools

import numpy as np
import pytest

from innoscope import dataset, jdrc

# Published reduced-space solution of the reference analysis: centroids and
# a projected member used to pin the geometry helpers with injected values.
REFERENCE_CENTROIDS = np.array([
    [-0.6228974, 1.700024531],
    [0.3154438, 0.006924866],
    [-0.2611542, -0.991203260],
    [1.4111348, -2.444121954],
])


def _injected_model(Y, q=2):
    k = Y.shape[0]
    A = np.eye(14)[:, :q]
    return jdrc.JdrcModel(
        method="fkm", A=A, Y=np.asarray(Y, dtype=float),
        labels=np.arange(k), objective=0.0,
        objective_trace=np.array([0.0]), seed=0, restarts=1, k=k, q=q)


def planted_subspace_data(seed=0, n_per=60, noise_scale=1.0, sep=0.9):
    """Four tight Gaussians in a 2-D subspace of 14-D, noise orthogonal.

    The orthogonal noise carries more variance than the cluster plane
    (the masking regime the factorial method is built for).
    Returns (X, labels)."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0], [sep, 0], [0, sep], [sep, sep]], dtype=float)
    centers -= centers.mean(axis=0)
    pts = []
    labels = []
    for c, center in enumerate(centers):
        pts.append(center + 0.05 * rng.standard_normal((n_per, 2)))
        labels += [c] * n_per
    P = np.vstack(pts)
    E = noise_scale * rng.standard_normal((P.shape[0], 12))
    basis = np.linalg.qr(rng.standard_normal((14, 14)))[0]
    X = P @ basis[:, :2].T + E @ basis[:, 2:].T
    return X - X.mean(axis=0), np.array(labels)


# --- fitting ----------------------------------------------------------------

def test_fkm_objective_trace_non_increasing():
    X, _ = planted_subspace_data(seed=1)
    model = jdrc.fit_fkm(X, 4, 2, seed=3, restarts=5)
    assert np.all(np.diff(model.objective_trace) <= 1e-9)


def test_fkm_recovers_planted_partition():
    X, truth = planted_subspace_data(seed=2)
    model = jdrc.fit_fkm(X, 4, 2, seed=0, restarts=20)
    assert jdrc.adjusted_rand_index(model.labels, truth) >= 0.99


def test_fkm_each_point_its_own_cluster():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(5, 14))
    X -= X.mean(axis=0)
    model = jdrc.fit_fkm(X, 5, 2, seed=0, restarts=10)
    assert model.objective == pytest.approx(0.0, abs=1e-18)
    proj = jdrc.project(model, X)
    assert np.allclose(np.sort(model.Y, axis=0), np.sort(proj, axis=0), atol=1e-9)


def test_fkm_brute_force_small_n():
    """All 2^n partitions with the per-partition optimal axis, vs ALS."""
    rng = np.random.default_rng(5)
    n = 7
    X = rng.normal(size=(n, 4))
    X -= X.mean(axis=0)

    best = np.inf
    for bits in itertools.product([0, 1], repeat=n):
        labels = np.array(bits)
        if labels.min() == labels.max():
            continue
        W = np.zeros((4, 4))
        for c in (0, 1):
            member = X[labels == c]
            centered = member - member.mean(axis=0)
            W += centered.T @ centered
        best = min(best, float(np.linalg.eigvalsh(W)[0]))

    model = jdrc.fit_fkm(X, 2, 1, seed=0, restarts=60)
    assert best <= model.objective + 1e-9
    assert model.objective == pytest.approx(best, abs=1e-9)


def _lloyd(X, centroids, max_iter=500):
    """Reference k-means for the q = p equivalence check."""
    Y = centroids.copy()
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        newY = np.vstack([
            X[labels == c].mean(axis=0) if np.any(labels == c) else Y[c]
            for c in range(Y.shape[0])])
        if np.allclose(newY, Y, atol=1e-13):
            break
        Y = newY
    d2 = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return float(np.take_along_axis(d2, labels[:, None], 1).sum())


def test_fkm_full_q_equals_plain_kmeans():
    X, _ = planted_subspace_data(seed=6, n_per=30)
    model = jdrc.fit_fkm(X, 4, X.shape[1], seed=1, restarts=5)
    # continuing with plain k-means from the fitted solution cannot improve it
    start = model.Y @ model.A.T
    assert _lloyd(X, start) == pytest.approx(model.objective, abs=1e-9)


def test_rkm_full_q_equals_plain_kmeans():
    X, _ = planted_subspace_data(seed=7, n_per=30)
    model = jdrc.fit_rkm(X, 4, X.shape[1], seed=1, restarts=5)
    start = model.Y @ model.A.T
    assert _lloyd(X, start) == pytest.approx(model.objective, abs=1e-9)


def test_rkm_recovers_high_variance_structure():
    # cluster structure lives in the high-variance subspace: RKM's scenario
    rng = np.random.default_rng(8)
    centers = np.array([[0, 0], [8, 0], [0, 8], [8, 8]], dtype=float)
    centers -= centers.mean(axis=0)
    labels = np.repeat(np.arange(4), 50)
    P = centers[labels] + 0.5 * rng.standard_normal((200, 2))
    E = 0.3 * rng.standard_normal((200, 12))
    basis = np.linalg.qr(rng.standard_normal((14, 14)))[0]
    X = P @ basis[:, :2].T + E @ basis[:, 2:].T
    X -= X.mean(axis=0)
    model = jdrc.fit_rkm(X, 4, 2, seed=0, restarts=20)
    assert jdrc.adjusted_rand_index(model.labels, labels) >= 0.99


def test_rkm_trace_non_increasing():
    X, _ = planted_subspace_data(seed=9)
    model = jdrc.fit_rkm(X, 4, 2, seed=2, restarts=5)
    assert np.all(np.diff(model.objective_trace) <= 1e-9)


def test_rkm_n_equals_k_matches_truncated_decomposition():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(6, 8))
    X -= X.mean(axis=0)
    model = jdrc.fit_rkm(X, 6, 2, seed=0, restarts=20)
    svals = np.linalg.svd(X, compute_uv=False)
    assert model.objective == pytest.approx(float(np.sum(svals[2:] ** 2)), abs=1e-8)


def test_fit_argument_validation():
    X = np.random.default_rng(11).normal(size=(20, 14))
    with pytest.raises(ValueError):
        jdrc.fit_fkm(X, 25, 2, restarts=1)
    with pytest.raises(ValueError):
        jdrc.fit_fkm(X, 4, 0, restarts=1)
    with pytest.raises(ValueError):
        jdrc.fit_fkm(X, 4, 15, restarts=1)
    with pytest.warns(UserWarning):
        jdrc.fit_fkm(X, 2, 3, seed=0, restarts=1)


def test_fit_is_seed_deterministic():
    X, _ = planted_subspace_data(seed=12, n_per=20)
    m1 = jdrc.fit_fkm(X, 4, 2, seed=5, restarts=4)
    m2 = jdrc.fit_fkm(X, 4, 2, seed=5, restarts=4)
    assert np.array_equal(m1.A, m2.A)
    assert np.array_equal(m1.labels, m2.labels)
    assert m1.objective == m2.objective


def test_stepwise_monotonicity():
    """Each half-step of the alternation cannot increase the FKM objective."""
    X, _ = planted_subspace_data(seed=13, n_per=15)
    rng = np.random.default_rng(0)
    A = np.linalg.qr(rng.standard_normal((14, 2)))[0]
    labels = rng.integers(0, 4, size=X.shape[0])
    labels[:4] = np.arange(4)

    before = jdrc._fkm_objective(X, A, labels, 4)
    A2 = jdrc._bottom_eigvecs(jdrc._within_scatter(X, labels, 4), 2)
    after_a = jdrc._fkm_objective(X, A2, labels, 4)
    assert after_a <= before + 1e-9

    P = X @ A2
    Y = jdrc._group_means(P, labels, 4)
    labels2 = jdrc._assign_to_centroids(P, Y)
    labels2 = jdrc._repair_empty(P, labels2, jdrc._group_means(P, labels2, 4), 4)
    after_u = jdrc._fkm_objective(X, A2, labels2, 4)
    assert after_u <= after_a + 1e-9


def test_fitted_solution_is_fixed_point():
    X, _ = planted_subspace_data(seed=14)
    model = jdrc.fit_fkm(X, 4, 2, seed=0, restarts=10, tol=1e-10)
    A = jdrc._bottom_eigvecs(jdrc._within_scatter(X, model.labels, 4), 2)
    P = X @ A
    Y = jdrc._group_means(P, model.labels, 4)
    labels = jdrc._assign_to_centroids(P, Y)
    obj = jdrc._fkm_objective(X, A, labels, 4)
    assert abs(obj - model.objective) < 1e-8 * max(model.objective, 1.0)


def test_empty_cluster_repair_keeps_k():
    rng = np.random.default_rng(15)
    X = np.vstack([rng.normal(size=(30, 14)), rng.normal(size=(30, 14)) + 20])
    X -= X.mean(axis=0)
    model = jdrc.fit_fkm(X, 4, 2, seed=0, restarts=10)
    assert np.unique(model.labels).size == 4


# --- geometry helpers -------------------------------------------------------

def test_project_is_linear():
    model = _injected_model(REFERENCE_CENTROIDS)
    assert np.allclose(jdrc.project(model, np.zeros(14)), 0.0)
    rows = np.random.default_rng(16).normal(size=(3, 14))
    assert np.allclose(jdrc.project(model, 2 * rows),
                       2 * jdrc.project(model, rows), atol=1e-12)


def test_project_dimension_mismatch():
    model = _injected_model(REFERENCE_CENTROIDS)
    with pytest.raises(ValueError):
        jdrc.project(model, np.zeros(13))


def test_assign_published_member_coordinates():
    model = _injected_model(REFERENCE_CENTROIDS)
    # published projected rows land in their reported clusters
    cluster, d2 = jdrc.assign(model, [1.629911, -1.935844])
    assert cluster == 3
    assert np.sqrt(d2) == pytest.approx(0.553362, abs=5e-5)
    cluster, d2 = jdrc.assign(model, [-0.636459, 1.703864])
    assert cluster == 0
    assert d2 == pytest.approx(0.000199, abs=5e-7)


def test_assign_exact_centroid_and_tie_rule():
    Y = np.array([[0.0, 0.0], [2.0, 0.0]])
    model = _injected_model(Y)
    assert jdrc.assign(model, [0.0, 0.0]) == (0, 0.0)
    cluster, _ = jdrc.assign(model, [1.0, 0.0])  # midpoint: lowest index wins
    assert cluster == 0


def test_within_ss_hand_example():
    coords = np.array([[0, 0], [0, 2], [10, 0], [10, 2]], dtype=float)
    labels = np.array([1, 1, 2, 2])
    per, total = jdrc.within_ss(labels, coords)
    assert per[1] == pytest.approx(2.0)
    assert per[2] == pytest.approx(2.0)
    assert total == pytest.approx(4.0)


def test_within_ss_identical_points():
    coords = np.ones((6, 2))
    _, total = jdrc.within_ss(np.array([0, 0, 0, 1, 1, 1]), coords)
    assert total == 0.0


def test_within_ss_empty_cluster_errors():
    with pytest.raises(ValueError):
        jdrc.within_ss(np.array([0, 0, 2]), np.zeros((3, 2)), k=3)


def test_nearest_to_centroid_matches_brute_force():
    X, truth = planted_subspace_data(seed=17, n_per=25)
    model = jdrc.fit_fkm(X, 4, 2, seed=0, restarts=10)
    coords = jdrc.project(model, X)
    keys = [(f"R{i:03d}", 2016 + i % 8) for i in range(X.shape[0])]
    nearest = jdrc.nearest_to_centroid(model, coords, keys)
    assert len(nearest) == 4
    labels = jdrc._assign_to_centroids(coords, model.Y)
    for point in nearest:
        members = np.flatnonzero(labels == point.cluster)
        d2 = np.sum((coords[members] - model.Y[point.cluster]) ** 2, axis=1)
        assert point.sq_dist_to_centroid == pytest.approx(float(d2.min()), abs=1e-12)


def test_nearest_to_centroid_single_member():
    Y = np.array([[0.0, 0.0], [5.0, 5.0]])
    model = _injected_model(Y)
    coords = np.array([[0.1, 0.0], [0.0, 0.2], [5.0, 5.0]])
    keys = [("A", 2016), ("B", 2017), ("C", 2018)]
    nearest = jdrc.nearest_to_centroid(model, coords, keys)
    by_cluster = {p.cluster: p for p in nearest}
    assert by_cluster[1].region_id == "C"
    assert by_cluster[1].sq_dist_to_centroid == 0.0


def test_agreement_matrix_toy():
    counts, row_pct, _ = jdrc.agreement_matrix(
        np.array([0, 0, 1, 1]), np.array([1, 2, 2, 2]), k=2, n_classes=4)
    assert counts[0, 0] == 1 and counts[0, 1] == 1
    assert row_pct[0, 0] == pytest.approx(50.0)
    assert row_pct[1, 1] == pytest.approx(100.0)


def test_agreement_matrix_identity():
    labels = np.array([0, 1, 2, 3] * 5)
    counts, row_pct, col_pct = jdrc.agreement_matrix(labels, labels + 1)
    assert np.allclose(np.diag(row_pct), 100.0)
    assert np.allclose(np.diag(col_pct), 100.0)
    assert counts.sum() == 20


def test_agreement_matrix_length_mismatch():
    with pytest.raises(ValueError):
        jdrc.agreement_matrix(np.zeros(3), np.ones(4))


def test_model_serialization_roundtrip():
    X, _ = planted_subspace_data(seed=18, n_per=10)
    model = jdrc.fit_fkm(X, 4, 2, seed=0, restarts=2)
    clone = jdrc.JdrcModel.from_dict(model.to_dict())
    assert np.array_equal(clone.A, model.A)
    assert np.array_equal(clone.labels, model.labels)
    assert clone.objective == model.objective


def test_adjusted_rand_index_basics():
    a = np.array([0, 0, 1, 1])
    assert jdrc.adjusted_rand_index(a, a) == pytest.approx(1.0)
    assert jdrc.adjusted_rand_index(a, np.array([1, 1, 0, 0])) == pytest.approx(1.0)
    assert abs(jdrc.adjusted_rand_index(a, np.array([0, 1, 0, 1]))) < 0.5
