import numpy as np
import pytest

from innoscope import dataset, pca
from innoscope.errors import InsufficientDataError

# Published spectrum of the reference analysis; used to pin the selection
# rules independently of any fitted data.
REFERENCE_EIGENVALUES = np.array([
    5.76009622, 1.96016931, 1.40769345, 1.11137752, 0.74551365,
    0.72981916, 0.47980632, 0.42690114, 0.37658725, 0.35238312,
    0.28888394, 0.16861254, 0.13479526, 0.05736112,
])


def _model_from_spectrum(lam):
    lam = np.asarray(lam, dtype=float)
    explained = lam / lam.sum()
    return pca.PcaModel(lam, np.eye(lam.size), explained, np.cumsum(explained))


def _random_correlated(seed=0, n=500, k=6):
    rng = np.random.default_rng(seed)
    mix = rng.normal(size=(k, k))
    return rng.normal(size=(n, k)) @ mix


def test_fit_pca_identity_correlation_spectrum():
    # independent standard normals: the population spectrum is all ones
    rng = np.random.default_rng(42)
    std = dataset.standardize(rng.normal(size=(20000, 14)))
    model = pca.fit_pca(std)
    assert np.all(np.abs(model.eigenvalues - 1.0) < 0.1)


def test_fit_pca_invariants():
    std = dataset.standardize(_random_correlated(1))
    model = pca.fit_pca(std)
    k = model.n_features
    assert np.all(np.diff(model.eigenvalues) <= 1e-12)
    assert np.all(model.eigenvalues >= 0)
    assert model.eigenvalues.sum() == pytest.approx(k, abs=1e-6)
    # unit-norm orthogonal loading columns
    gram = model.loadings.T @ model.loadings
    assert np.allclose(gram, np.eye(k), atol=1e-9)
    assert model.cumulative[-1] == pytest.approx(1.0, abs=1e-9)


def test_fit_pca_reconstruction():
    std = dataset.standardize(_random_correlated(2))
    model = pca.fit_pca(std)
    corr = std.data.T @ std.data / std.data.shape[0]
    recon = model.loadings @ np.diag(model.eigenvalues) @ model.loadings.T
    assert np.allclose(recon, corr, atol=1e-6)


def test_fit_pca_score_variances_match_eigenvalues():
    std = dataset.standardize(_random_correlated(3))
    model = pca.fit_pca(std)
    sc = pca.scores(model, std.data)
    assert np.allclose(sc.var(axis=0), model.eigenvalues, atol=1e-6)


def test_fit_pca_deterministic_sign_convention():
    std = dataset.standardize(_random_correlated(4))
    m1 = pca.fit_pca(std)
    m2 = pca.fit_pca(std)
    assert np.array_equal(m1.loadings, m2.loadings)
    for j in range(m1.n_features):
        col = m1.loadings[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_fit_pca_requires_enough_rows():
    with pytest.raises(InsufficientDataError):
        pca.fit_pca(np.random.default_rng(0).normal(size=(10, 14)))


def test_variance_table_values():
    model = _model_from_spectrum([2.0, 1.0, 1.0])
    rows = pca.variance_table(model)
    assert rows[0][0] == 1
    assert [r[3] for r in rows] == pytest.approx([0.5, 0.25, 0.25])
    assert rows[-1][4] == pytest.approx(1.0)


def test_variance_table_reference_standard_deviation():
    model = _model_from_spectrum(REFERENCE_EIGENVALUES)
    rows = pca.variance_table(model)
    assert rows[1][2] == pytest.approx(1.4000605, abs=1e-6)
    assert rows[0][2] == pytest.approx(2.4000200, abs=1e-6)


def test_variance_table_text_layout():
    model = _model_from_spectrum([2.0, 1.0, 1.0])
    text = pca.variance_table_text(model)
    lines = text.strip().split("\n")
    assert len(lines) == 4
    assert lines[0].startswith("component,eigenvalue,standard_deviation")


def test_select_components_reference_spectrum():
    model = _model_from_spectrum(REFERENCE_EIGENVALUES)
    assert pca.select_components(model, "elbow_on_gt_one") == 2
    assert pca.select_components(model, "eigenvalue_gt_one") == 4


def test_select_components_single_above_one():
    model = _model_from_spectrum([5.0, 0.5, 0.3, 0.2])
    assert pca.select_components(model, "elbow_on_gt_one") == 1
    assert pca.select_components(model, "eigenvalue_gt_one") == 1


def test_select_components_manual_bounds():
    model = _model_from_spectrum([2.0, 1.0, 1.0])
    assert pca.select_components(model, "manual", q=2) == 2
    with pytest.raises(ValueError):
        pca.select_components(model, "manual", q=0)
    with pytest.raises(ValueError):
        pca.select_components(model, "manual", q=4)


def test_select_components_unknown_policy():
    model = _model_from_spectrum([2.0, 1.0])
    with pytest.raises(ValueError):
        pca.select_components(model, "scree_by_eye")
