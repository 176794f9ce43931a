"""Eigendecomposition of the correlation matrix and component-count selection."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, NumericError
from .dataset import StandardizedMatrix


@dataclass
class PcaModel:
    """Eigenpairs of a correlation matrix with explained-variance accounting.

    loadings columns are unit-norm eigenvectors, sign-normalized so the
    largest-magnitude entry of each column is positive (eigenvector sign is
    otherwise arbitrary and run-dependent).
    """

    eigenvalues: np.ndarray
    loadings: np.ndarray
    explained: np.ndarray
    cumulative: np.ndarray
    n_obs: int = 0

    @property
    def n_features(self) -> int:
        return self.eigenvalues.size


def _sign_normalize(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            out[:, j] = -col
    return out


def fit_pca(std_matrix: StandardizedMatrix | np.ndarray) -> PcaModel:
    """PCA on the correlation matrix of standardized data.

    Uses the symmetric eigensolver; tiny negative eigenvalues are clamped
    to zero and components are ordered by decreasing eigenvalue.
    """
    if isinstance(std_matrix, StandardizedMatrix):
        Z = std_matrix.data
    else:
        Z = np.asarray(std_matrix, dtype=float)
    n, k = Z.shape
    if n < k + 1:
        raise InsufficientDataError(
            f"PCA needs at least {k + 1} rows for {k} features, got {n}")
    corr = Z.T @ Z / n
    corr = (corr + corr.T) / 2.0
    if not np.all(np.isfinite(corr)):
        raise NumericError("correlation matrix contains non-finite entries")
    try:
        eigvals, eigvecs = np.linalg.eigh(corr)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    if eigvals[-1] < -1e-9:
        raise NumericError(f"correlation matrix not PSD: min eigenvalue {eigvals[-1]}")
    eigvals = np.clip(eigvals, 0.0, None)
    eigvecs = _sign_normalize(eigvecs[:, order])
    total = eigvals.sum()
    explained = eigvals / total
    return PcaModel(eigvals, eigvecs, explained, np.cumsum(explained), n_obs=n)


def scores(model: PcaModel, std_data: np.ndarray) -> np.ndarray:
    """Component scores of standardized rows (rows @ loadings)."""
    return np.asarray(std_data, dtype=float) @ model.loadings


def variance_table(model: PcaModel):
    """Rows of (component, eigenvalue, standard deviation, proportion, cumulative)."""
    return [
        (j + 1, float(model.eigenvalues[j]), float(np.sqrt(model.eigenvalues[j])),
         float(model.explained[j]), float(model.cumulative[j]))
        for j in range(model.n_features)
    ]


def variance_table_text(model: PcaModel, delimiter: str = ",") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(["component", "eigenvalue", "standard_deviation",
                     "proportion_of_variance", "cumulative_proportion"])
    for comp, lam, sd, prop, cum in variance_table(model):
        writer.writerow([comp, f"{lam:.8f}", f"{sd:.7f}", f"{prop:.7f}", f"{cum:.7f}"])
    return buf.getvalue()


def select_components(model: PcaModel, policy: str = "elbow_on_gt_one",
                      q: int | None = None) -> int:
    """Choose the reduced dimensionality from the eigenvalue spectrum.

    Policies:
      eigenvalue_gt_one  count of eigenvalues strictly above 1
      elbow_on_gt_one    among the >1 components, keep everything up to the
                         lower side of the largest successive eigenvalue drop
      manual             return q unchanged after a bounds check
    """
    lam = model.eigenvalues
    if policy == "manual":
        if q is None or not (1 <= q <= lam.size):
            raise ValueError(f"manual q must be in [1, {lam.size}], got {q}")
        return int(q)
    above = int(np.sum(lam > 1.0))
    if policy == "eigenvalue_gt_one":
        return max(above, 1)
    if policy == "elbow_on_gt_one":
        if above <= 1:
            return 1
        gaps = lam[: above - 1] - lam[1:above]
        return int(np.argmax(gaps)) + 2
    raise ValueError(f"unknown selection policy: {policy!r}")
