"""Acceptance suite: every exit criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one line per criterion.
The bundled panel stands in for the public scoreboard file and replicates
the published aggregates.
"""

import itertools
import math
import time

import numpy as np
import pytest

from innoscope import classifier as clf
from innoscope import dataset, jdrc, labeling, pca, shift, whatif
from innoscope.fixture import load_fixture_panel

TIER_TARGET_SHARES = {"Innovation leader": 0.91, "Strong innovator": 0.70,
                      "Moderate innovator": 0.61, "Emerging innovator": 0.68}
REFERENCE_CENTROIDS = np.array([
    [-0.6228974, 1.700024531],    # emerging (679)
    [0.3154438, 0.006924866],     # moderate (477)
    [-0.2611542, -0.991203260],   # strong (475)
    [1.4111348, -2.444121954],    # leader (281)
])
REFERENCE_SIZES = np.array([679, 477, 475, 281])
TRIALS = [("2.2.1", 1.22), ("2.1.1", 1.04), ("4.1.1", 21.8),
          ("2.3.2", 8.53), ("2.3.2", 11.8)]


def criterion(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {status}: {name}" + (f" — {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def panel():
    return load_fixture_panel()


@pytest.fixture(scope="module")
def std(panel):
    return dataset.standardize(panel)


@pytest.fixture(scope="module")
def fkm_fit(std):
    start = time.perf_counter()
    model = jdrc.fit_fkm(std, 4, 2, seed=0, restarts=100)
    return model, time.perf_counter() - start


@pytest.fixture(scope="module")
def tiers(fkm_fit):
    model, _ = fkm_fit
    return labeling.rank_centroids(model, labeling.AxisSemantics((1, 1)))


@pytest.fixture(scope="module")
def leader_task(panel, fkm_fit, tiers):
    model, _ = fkm_fit
    binary = (model.labels == tiers.leader_cluster).astype(int)
    return clf.BinaryTask("Innovation leader", panel.values_matrix(), binary)


def _match_up_to_sign(Y, reference, tol):
    """Centroid match up to cluster permutation (by size) and per-axis sign."""
    for signs in itertools.product((1, -1), repeat=Y.shape[1]):
        if np.all(np.abs(Y * np.array(signs) - reference) <= tol):
            return True
    return False


# --- PCA ----------------------------------------------------------------------

def test_pca_golden_numbers(std):
    start = time.perf_counter()
    model = pca.fit_pca(std)
    elapsed = time.perf_counter() - start
    lam1 = model.eigenvalues[0]
    cum2 = model.cumulative[1]
    criterion("PCA lambda_1 = 5.7601 +/- 0.01",
              abs(lam1 - 5.7601) <= 0.01, f"lambda_1 = {lam1:.6f}")
    criterion("PCA cumulative(2) = 55.14% +/- 0.5pp",
              abs(cum2 - 0.551448) <= 0.005, f"cumulative = {cum2:.6f}")
    criterion("PCA runtime < 1 s", elapsed < 1.0, f"{elapsed:.3f} s")


def test_pca_properties(std):
    model = pca.fit_pca(std)
    corr = std.data.T @ std.data / std.data.shape[0]
    recon = model.loadings @ np.diag(model.eigenvalues) @ model.loadings.T
    scores = std.data @ model.loadings
    criterion("PCA eigenvalue sum = 14 within 1e-6",
              abs(model.eigenvalues.sum() - 14.0) <= 1e-6,
              f"sum = {model.eigenvalues.sum():.9f}")
    err = np.abs(recon - corr).max()
    criterion("PCA reconstruction within 1e-6", err <= 1e-6, f"max err {err:.2e}")
    var_err = np.abs(scores.var(axis=0) - model.eigenvalues).max()
    criterion("PCA score variances equal eigenvalues within 1e-6",
              var_err <= 1e-6, f"max err {var_err:.2e}")


# --- correlation -----------------------------------------------------------------

def test_correlation_spot_checks(panel):
    report = dataset.correlation_analysis(panel)
    r, t, _, _ = report.pair("1.2.1", "3.2.2")
    criterion("r(1.2.1, 3.2.2) = 0.91 +/- 0.005",
              abs(r - 0.91) <= 0.005, f"r = {r:.6f}, t = {t:.2f}")

    def holm_oracle(p):
        m = len(p)
        order = sorted(range(m), key=lambda i: p[i])
        out = [0.0] * m
        running = 0.0
        for rank, idx in enumerate(order):
            running = max(running, (m - rank) * p[idx])
            out[idx] = min(1.0, running)
        return np.array(out)

    rng = np.random.default_rng(42)
    exact = all(
        np.array_equal(dataset.holm_adjust(p), holm_oracle(p))
        for p in (rng.uniform(0, 1, size=rng.integers(2, 50))
                  for _ in range(20)))
    criterion("Holm matches brute-force oracle exactly on 20 random vectors",
              exact)


# --- factorial k-means -------------------------------------------------------

def test_fkm_objective_monotone_100_runs():
    rng = np.random.default_rng(0)
    centers = np.array([[0, 0], [0.9, 0], [0, 0.9], [0.9, 0.9]]) - 0.45
    P = np.repeat(centers, 40, axis=0) + 0.05 * rng.standard_normal((160, 2))
    basis = np.linalg.qr(rng.standard_normal((14, 14)))[0]
    X = P @ basis[:, :2].T + rng.standard_normal((160, 12)) @ basis[:, 2:].T
    X -= X.mean(axis=0)
    violations = 0
    for seed in range(100):
        model = jdrc.fit_fkm(X, 4, 2, seed=seed, restarts=1, max_iter=80)
        if np.any(np.diff(model.objective_trace) > 1e-9):
            violations += 1
    criterion("FKM objective non-increasing on 100 seeded runs",
              violations == 0, f"{violations} violations")


def test_fkm_planted_subspace_recovery():
    rng = np.random.default_rng(7)
    centers = np.array([[0, 0], [0.9, 0], [0, 0.9], [0.9, 0.9]]) - 0.45
    labels = np.repeat(np.arange(4), 60)
    P = centers[labels] + 0.05 * rng.standard_normal((240, 2))
    basis = np.linalg.qr(rng.standard_normal((14, 14)))[0]
    X = P @ basis[:, :2].T + rng.standard_normal((240, 12)) @ basis[:, 2:].T
    X -= X.mean(axis=0)
    model = jdrc.fit_fkm(X, 4, 2, seed=0, restarts=20)
    ari = jdrc.adjusted_rand_index(model.labels, labels)
    criterion("FKM planted-subspace ARI >= 0.99", ari >= 0.99, f"ARI {ari:.4f}")


def test_fkm_brute_force_small_n():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(7, 4))
    X -= X.mean(axis=0)
    best = np.inf
    for bits in itertools.product([0, 1], repeat=7):
        assignment = np.array(bits)
        if assignment.min() == assignment.max():
            continue
        W = np.zeros((4, 4))
        for c in (0, 1):
            member = X[assignment == c]
            centered = member - member.mean(axis=0)
            W += centered.T @ centered
        best = min(best, float(np.linalg.eigvalsh(W)[0]))
    model = jdrc.fit_fkm(X, 2, 1, seed=0, restarts=60)
    criterion("FKM brute-force oracle matched within 1e-9 (n=7, k=2, q=1)",
              abs(model.objective - best) <= 1e-9,
              f"ALS {model.objective:.12f} vs brute {best:.12f}")


def test_fkm_full_q_equals_kmeans():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(80, 14)) + np.repeat(
        rng.normal(scale=2.0, size=(4, 14)), 20, axis=0)
    X -= X.mean(axis=0)
    model = jdrc.fit_fkm(X, 4, 14, seed=1, restarts=5)
    Y = model.Y @ model.A.T
    for _ in range(500):
        d2 = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        newY = np.vstack([X[assign == c].mean(axis=0) if np.any(assign == c)
                          else Y[c] for c in range(4)])
        if np.allclose(newY, Y, atol=1e-13):
            break
        Y = newY
    d2 = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
    kmeans_obj = float(np.take_along_axis(d2, d2.argmin(1)[:, None], 1).sum())
    criterion("FKM with q=14 equals plain k-means within 1e-9",
              abs(model.objective - kmeans_obj) <= 1e-9,
              f"diff {abs(model.objective - kmeans_obj):.2e}")


def test_fkm_reference_run(fkm_fit):
    model, elapsed = fkm_fit
    sizes = np.sort(model.sizes)[::-1]
    criterion("FKM cluster sizes (679, 477, 475, 281)",
              np.array_equal(sizes, REFERENCE_SIZES),
              f"sizes {model.sizes.tolist()}")
    order = np.argsort(-model.sizes)
    matched = _match_up_to_sign(model.Y[order], REFERENCE_CENTROIDS, 0.05)
    criterion("FKM centroids within +/-0.05 of reference (perm/sign)",
              matched, f"fitted {np.round(model.Y, 4).tolist()}")
    criterion("FKM reference run < 60 s (100 restarts)", elapsed < 60.0,
              f"{elapsed:.1f} s")


# --- labeling ------------------------------------------------------------------

def test_labeling_reference_centroids_ranking():
    injected = jdrc.JdrcModel(
        method="fkm", A=np.eye(14)[:, :2], Y=REFERENCE_CENTROIDS.copy(),
        labels=np.arange(4), objective=0.0, objective_trace=np.zeros(1),
        seed=0, restarts=1, k=4, q=2)
    tiers = labeling.rank_centroids(injected, labeling.AxisSemantics((1, -1)))
    expected = {3: "Innovation leader", 2: "Strong innovator",
                1: "Moderate innovator", 0: "Emerging innovator"}
    ok = all(tiers.labels[c] == name for c, name in expected.items())
    criterion("Labeling of reference centroids matches the published ranking",
              ok, str(tiers.labels))


def test_labeling_pivot_shares(std, fkm_fit, tiers):
    model, _ = fkm_fit
    coords = jdrc.project(model, std.data)
    flags = labeling.pivot_filter(model, coords)
    deltas = {}
    ok = True
    for c in range(4):
        name = tiers.labels[c]
        share = flags.share(c)
        target = TIER_TARGET_SHARES[name]
        deltas[name] = share - target
        ok &= abs(share - target) <= 0.08
    criterion("Pivot shares within +/-8pp of (91, 70, 61, 68)%", ok,
              ", ".join(f"{k}: {100 * v:+.1f}pp" for k, v in deltas.items()))


def test_labeling_fine_tuned_within_ss(std, panel, fkm_fit, tiers):
    model, _ = fkm_fit
    coords = jdrc.project(model, std.data)
    flags = labeling.pivot_filter(model, coords)
    violations = 0
    for c in range(4):
        members = flags.cluster == c
        full = coords[members]
        kept = coords[members & flags.is_pivot]
        ss_full = np.sum((full - full.mean(axis=0)) ** 2)
        ss_kept = np.sum((kept - kept.mean(axis=0)) ** 2)
        if ss_kept > ss_full + 1e-9:
            violations += 1
    criterion("Fine-tuned per-cluster within-SS <= full within-SS",
              violations == 0, f"{violations} violations")


def test_compactness_claim(std, panel, fkm_fit):
    model, _ = fkm_fit
    coords = jdrc.project(model, std.data)
    _, fkm_ss = jdrc.within_ss(model.labels, coords)
    _, euris_ss = jdrc.within_ss(panel.euris_labels(), coords)
    criterion("FKM within-SS <= EURIS-label within-SS (reduced space)",
              fkm_ss <= euris_ss,
              f"FKM {fkm_ss:.1f} vs EURIS {euris_ss:.1f}")


# --- classifier ----------------------------------------------------------------

def test_classifier_gradient_and_determinism():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(24, 14))
    y = (X[:, 0] > 0).astype(float)
    params = clf.nn_init(14, 9, rng)
    z1 = X @ params["W1"] + params["b1"]
    params["b1"] = params["b1"] + np.where(np.abs(z1).min(axis=0) < 1e-3,
                                           5e-3, 0.0)
    err = clf.gradient_check(params, X, y)
    criterion("Gradient check relative error < 1e-4", err < 1e-4,
              f"max rel err {err:.2e}")

    Xb = rng.normal(size=(60, 14)) + 3.0 * (rng.random((60, 1)) > 0.5)
    yb = (Xb[:, 0] > 1.5).astype(int)
    hp = clf.HyperParams(epochs=8)
    m1 = clf.train((Xb[:40], yb[:40]), (Xb[40:], yb[40:]), hyperparams=hp,
                   seed=11)
    m2 = clf.train((Xb[:40], yb[:40]), (Xb[40:], yb[40:]), hyperparams=hp,
                   seed=11)
    identical = all(np.array_equal(m1.params[k], m2.params[k])
                    for k in m1.params)
    criterion("Training is bit-exactly seed deterministic", identical)


def test_classifier_split_sizes(leader_task):
    splits = clf.make_splits(leader_task.labels, seed=0)
    criterion("Split sizes (1146, 382, 384) exact on n = 1912",
              splits.sizes == (1146, 382, 384), f"sizes {splits.sizes}")


@pytest.fixture(scope="module")
def comparison_runs(panel, fkm_fit, tiers, leader_task):
    model, _ = fkm_fit
    features = panel.values_matrix()
    fkm_binary = leader_task.labels
    euris_binary = (panel.euris_labels() == 1).astype(int)
    coords_std = dataset.standardize(panel)
    coords = jdrc.project(model, coords_std.data)
    flags = labeling.pivot_filter(model, coords)
    pivot_idx = np.flatnonzero(flags.is_pivot)
    inter_idx = np.flatnonzero(fkm_binary == euris_binary)

    start = time.perf_counter()
    leader_metrics = []
    medians = {"euris": [], "fkm": [], "fine_tuned": [], "intersection": []}
    for seed in range(5):
        tasks = [
            clf.BinaryTask("euris", features, euris_binary),
            clf.BinaryTask("fkm", features, fkm_binary),
            clf.BinaryTask("fine_tuned", features[pivot_idx],
                           fkm_binary[pivot_idx]),
            clf.BinaryTask("intersection", features[inter_idx],
                           fkm_binary[inter_idx]),
        ]
        reports = clf.compare_labelings(tasks, seed=seed)
        for name, report in reports.items():
            medians[name].append(report.accuracy)
        _, leader_report, _ = clf.run_protocol(
            clf.BinaryTask("Innovation leader", features, fkm_binary),
            seed=seed)
        leader_metrics.append((leader_report.accuracy,
                               leader_report.precision(1)))
    elapsed = time.perf_counter() - start
    return ({k: float(np.median(v)) for k, v in medians.items()},
            leader_metrics, elapsed)


def test_classifier_reference_task(comparison_runs):
    _, leader_metrics, _ = comparison_runs
    acc = float(np.median([a for a, _ in leader_metrics]))
    prec = float(np.median([p for _, p in leader_metrics]))
    criterion("Leader task median accuracy >= 0.95 (5 seeds)", acc >= 0.95,
              f"median accuracy {acc:.4f}")
    criterion("Leader task median class-1 precision >= 0.85 (5 seeds)",
              prec >= 0.85, f"median precision {prec:.4f}")


def test_classifier_labeling_ordering(comparison_runs):
    medians, _, elapsed = comparison_runs
    detail = ", ".join(f"{k} {v:.4f}" for k, v in medians.items())
    ok = (medians["intersection"] >= medians["fkm"] - 1e-9
          and abs(medians["fkm"] - medians["fine_tuned"]) <= 0.03
          and medians["fkm"] >= medians["euris"]
          and medians["fine_tuned"] >= medians["euris"])
    criterion("Accuracy ordering intersection >= fkm ~ fine-tuned >= euris",
              ok, detail)
    criterion("Classifier criterion runtime < 5 min", elapsed < 300.0,
              f"{elapsed:.1f} s")


# --- what-if -------------------------------------------------------------------

def test_whatif_progressive_session(panel, leader_task):
    model, _, _ = clf.run_protocol(leader_task, seed=0)
    log = whatif.TrialLog("ITF3 - Campania", 2023, "Innovation leader")
    for name, value in TRIALS:
        whatif.run_trial(log, panel, {name: value}, model)
    probs = [e.probability for e in log.entries]
    criterion("Post-trial-5 probability is the session maximum",
              probs[4] == max(probs),
              "probabilities " + ", ".join(f"{p:.4g}" for p in probs))

    replay = whatif.TrialLog("ITF3 - Campania", 2023, "Innovation leader")
    for name, value in TRIALS:
        whatif.run_trial(replay, panel, {name: value}, model)
    criterion("What-if determinism: identical model + session -> identical "
              "probabilities",
              [e.probability for e in replay.entries] == probs)


# --- dataset shift --------------------------------------------------------------

def test_ks_reference_statistics(panel):
    slices_bus = shift.period_slices(panel, "2.2.1")
    slices_pub = shift.period_slices(panel, "2.1.1")
    bus = shift.ks_two_sample(slices_bus.x, slices_bus.z)
    pub = shift.ks_two_sample(slices_pub.x, slices_pub.z)
    criterion("KS D(2.2.1, x vs z) = 0.10112 exactly (rounded to 5 dp)",
              round(bus.d_stat, 5) == 0.10112, f"D = {bus.d_stat:.8f}")
    criterion("KS D(2.1.1, x vs z) = 0.03696 exactly (rounded to 5 dp)",
              round(pub.d_stat, 5) == 0.03696, f"D = {pub.d_stat:.8f}")
    criterion("KS p(2.2.1) within 5e-4 of 0.005676",
              abs(bus.p_value - 0.005676) <= 5e-4, f"p = {bus.p_value:.6f}")
    criterion("KS p(2.1.1) within 5e-3 of 0.8282",
              abs(pub.p_value - 0.8282) <= 5e-3, f"p = {pub.p_value:.6f}")


def test_ks_trivial_cases_and_series_oracle():
    a = np.arange(48.0)
    same = shift.ks_two_sample(a, a.copy())
    disjoint = shift.ks_two_sample(a, a + 1000.0)
    criterion("KS identical samples give D=0, p=1",
              same.d_stat == 0.0 and same.p_value == 1.0)
    criterion("KS disjoint supports give D=1, p~0",
              disjoint.d_stat == 1.0 and disjoint.p_value < 1e-12)

    def oracle(lam, terms=10000):
        total = sum((-1) ** (j - 1) * math.exp(-2 * j * j * lam * lam)
                    for j in range(1, terms + 1))
        return min(1.0, max(0.0, 2.0 * total))

    worst = max(abs(shift.kolmogorov_sf(lam) - oracle(lam))
                for lam in (0.4, 0.7, 1.0, 1.3, 1.7, 2.5))
    criterion("Tail series matches 1e4-term oracle within 1e-10",
              worst <= 1e-10, f"max diff {worst:.2e}")
