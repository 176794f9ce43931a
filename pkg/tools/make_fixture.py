"""Generator for the bundled synthetic scoreboard panel.

Builds a 1912-row panel (239 NUTS-2-style regions x 8 years, 14 indicators,
EURIS tier codes) whose analysis outputs land on the published aggregate
targets: leading correlation eigenvalues, the 0.91 co-publication pair, the
four-cluster reduced-space solution (sizes, centroids, pivot shares), the
classifier protocol headroom, the progressive-trial storyline anchors, and
the exact two-sample KS statistics for the period comparisons.

Construction outline
  1. geometry: an orthonormal set {V (projection plane), u_A, u_B (common
     factors), c (co-publication contrast)} in indicator space. Cluster
     means carry the published reduced-space centroids on V plus a factor
     constellation on u_A/u_B; everything except c has identical
     coordinates for the two co-publication indicators, which pins their
     correlation exactly.
  2. covariance: within-cluster noise is V-block (plane shapes) plus factor
     noise plus a floored covariance on the residual subspace whose
     diagonal is solved linearly so the population matrix has unit
     diagonal; factor scales are tuned so the two leading correlation
     eigenvalues match, and two rank-one boosts shape the third and fourth
     above one.
  3. sampling: core/halo cluster shapes in the plane (pivot shares), normal
     noise elsewhere; empirical moments are enforced exactly blockwise.
  4. identity: rows are grouped into 239 region bundles with year
     trajectories; special rows are cast (Campania, Hamburg, Berlin and the
     documented movers); indicator units are affine maps solved from the
     published raw anchor values.
  5. period assignment: a local search places year groups so the business
     and public R&D KS statistics are exactly 145/1434 and 53/1434.

Run:  python3 tools/make_fixture.py [--out src/innoscope/data/...]
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

# single-threaded linear algebra: multithreaded reductions make the design
# solve drift between runs, and the shipped panel must be regenerable
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
from scipy.optimize import lsq_linear

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from innoscope import classifier as clf
from innoscope import dataset, jdrc, labeling, pca, shift

# ---------------------------------------------------------------------------
# targets
# ---------------------------------------------------------------------------

N_ROWS = 1912
N_REGIONS = 239
YEARS = tuple(range(2016, 2024))
# cluster order: emerging, moderate, strong, leader (size-descending, the
# canonical model order)
SIZES = np.array([679, 477, 475, 281])
TIERS = ("Emerging innovator", "Moderate innovator",
         "Strong innovator", "Innovation leader")
EURIS_CODE = {"Emerging innovator": 4, "Moderate innovator": 3,
              "Strong innovator": 2, "Innovation leader": 1}

# Published centroids with the second axis flipped into the sign-canonical
# frame the fitted models report (largest loading of each column positive).
CENTROIDS = np.array([
    [-0.6228974, -1.700024531],
    [0.3154438, -0.006924866],
    [-0.2611542, 0.991203260],
    [1.4111348, 2.444121954],
])
PIVOT_TARGETS = np.array([0.68, 0.61, 0.70, 0.91])

LAMBDA_1 = 5.76009622
LAMBDA_2 = 1.96016931
PAIR = (2, 8)                  # 1.2.1 and 3.2.2 (0-based indicator indexes)
PAIR_R = 0.9105804431          # prints as r=0.91, t(1910)=96.28

KS_TARGET_BUSINESS = 145 / 1434   # indicator 2.2.1, periods x vs z
KS_TARGET_PUBLIC = 53 / 1434      # indicator 2.1.1, periods x vs z

W_PLANE = np.array([0.016, 0.027])   # pooled within variance along V columns
ORTH_FLOOR = 0.085                   # min within variance off the plane

# variable scores in the sign-canonical frame (published column 2 negated),
# with the ICT-specialists row redirected toward the leader direction so the
# documented progressive-trial storyline holds, and the two co-publication
# rows averaged (they share one channel).
V_SEED = np.array([
    [-0.1814, 0.0848],
    [-0.1226, 0.3924],
    [0.2098, 0.2168],
    [0.0260, 0.4246],
    [-0.1981, 0.3416],
    [0.6283, -0.0470],
    [0.5583, 0.0758],
    [0.3300, 0.2900],
    [0.2098, 0.2168],
    [0.2617, 0.3602],
    [-0.1005, 0.3239],
    [-0.0125, 0.2420],
    [0.1127, -0.0894],
    [0.0920, -0.3718],
])

# factor sign layout: overall level positive everywhere but air emissions;
# the secondary factor opposes human-capital indicators to application ones
SIGN_A = np.array([1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, -1.0])
SIGN_B = np.array([-1, 1, -1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1, -1.0])

# factor constellation patterns (emerging, moderate, strong, leader)
PATTERN_A = np.array([-2.05, -0.20, 0.55, 4.30])
PATTERN_B = np.array([-0.55, 0.95, -0.85, 0.60])

INDICATOR_CODES = [n.split(" ", 1)[0] for n in dataset.INDICATORS]


def polar_orthonormal(M: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(M, full_matrices=False)
    return u @ vt


def symmetrize_pair(vec: np.ndarray) -> np.ndarray:
    out = vec.astype(float).copy()
    mean = 0.5 * (out[PAIR[0]] + out[PAIR[1]])
    out[PAIR[0]] = out[PAIR[1]] = mean
    return out


def _capped_factor(pattern, basis, var_total, chi, caps):
    """Unit vector orthogonal to `basis` maximizing pattern alignment, with
    each coordinate's total variance contribution bounded.

    The contribution of coordinate j is quadratic in the loading,
    var_total*u_j^2 + chi_j*u_j (chi carries the between-group cross term
    with the projection plane), so the cap translates into an interval
    bound per coordinate.
    """
    from scipy.optimize import minimize

    pattern = pattern / np.linalg.norm(pattern)
    caps = np.asarray(caps, dtype=float)
    disc = np.sqrt(chi ** 2 + 4.0 * var_total * caps)
    lb = (-chi - disc) / (2.0 * var_total)
    ub = (-chi + disc) / (2.0 * var_total)

    constraints = [
        {"type": "eq", "fun": lambda u: u @ u - 1.0, "jac": lambda u: 2 * u},
        {"type": "eq", "fun": lambda u: u[PAIR[0]] - u[PAIR[1]]},
    ]
    for b in basis:
        constraints.append({"type": "eq",
                            "fun": (lambda u, b=b: u @ b),
                            "jac": (lambda u, b=b: b)})

    start = pattern.copy()
    for b in basis:
        start = start - (start @ b) * b
    start = np.clip(start / max(np.linalg.norm(start), 1e-9),
                    lb + 1e-6, ub - 1e-6)
    n = np.linalg.norm(start)
    if n > 1e-9:
        start = start / n
    res = minimize(lambda u: -(pattern @ u), start, jac=lambda u: -pattern,
                   bounds=list(zip(lb, ub)), constraints=constraints,
                   method="SLSQP", options={"maxiter": 800, "ftol": 1e-12})
    u = res.x
    u = symmetrize_pair(u)
    for b in basis:
        u = u - (u @ b) * b
    return u / np.linalg.norm(u)


def centered_pattern(raw: np.ndarray) -> np.ndarray:
    return raw - (SIZES * raw).sum() / N_ROWS


@dataclass
class Geometry:
    """Directions of the design in indicator coordinates."""

    V: np.ndarray          # 14x2 plane (variable scores)
    u_a: np.ndarray        # overall-level factor
    u_b: np.ndarray        # secondary factor
    contrast: np.ndarray   # co-publication contrast direction
    P_fill: np.ndarray     # projector onto the 9-dim residual subspace

    def cluster_means(self, scale_a: float, scale_b: float) -> np.ndarray:
        za = scale_a * centered_pattern(PATTERN_A)
        zb = scale_b * centered_pattern(PATTERN_B)
        return (CENTROIDS @ self.V.T + np.outer(za, self.u_a)
                + np.outer(zb, self.u_b))


@dataclass
class Design:
    """Geometry plus the tuned covariance pieces."""

    geom: Geometry
    scale_a: float
    scale_b: float
    d_a: float
    d_b: float
    d_c: float
    W_fill: np.ndarray     # within covariance on the residual subspace
    S: np.ndarray          # implied population covariance
    diag_misfit: float = 0.0

    @property
    def means(self) -> np.ndarray:
        return self.geom.cluster_means(self.scale_a, self.scale_b)

    def within_covariance(self) -> np.ndarray:
        g = self.geom
        return (g.V @ np.diag(W_PLANE) @ g.V.T
                + self.d_a * np.outer(g.u_a, g.u_a)
                + self.d_b * np.outer(g.u_b, g.u_b)
                + self.d_c * np.outer(g.contrast, g.contrast)
                + self.W_fill)


def build_geometry(scale_a: float = 0.95, scale_b: float = 1.55) -> Geometry:
    V = polar_orthonormal(np.column_stack([symmetrize_pair(V_SEED[:, 0]),
                                           symmetrize_pair(V_SEED[:, 1])]))
    for j in range(2):
        if V[np.argmax(np.abs(V[:, j])), j] < 0:
            V[:, j] = -V[:, j]

    w = SIZES / N_ROWS
    plane_diag = np.einsum(
        "ji,il,jl->j", V, (CENTROIDS.T * w) @ CENTROIDS + np.diag(W_PLANE), V)
    # Allocate factor loadings from the leftover variance budget. Each
    # coordinate's full contribution (quadratic plus the between cross term
    # with the plane) is capped by a share of its budget, so the unit
    # diagonal stays reachable for the residual noise solve.
    d_a, d_b = 0.45, 0.40
    budget = np.clip(1.0 - plane_diag - 0.12, 0.03, None)
    za = scale_a * centered_pattern(PATTERN_A)
    zb = scale_b * centered_pattern(PATTERN_B)
    var_a = float((w * za ** 2).sum() + d_a)
    var_b = float((w * zb ** 2).sum() + d_b)
    chi_a = 2.0 * (V @ ((CENTROIDS.T * w) @ za))
    u_a = _capped_factor(symmetrize_pair(SIGN_A * np.sqrt(budget)),
                         [V[:, 0], V[:, 1]], var_a, chi_a,
                         0.62 * budget)
    contrib_a = var_a * u_a ** 2 + chi_a * u_a
    resid = np.clip(budget - contrib_a, 0.02, None)
    chi_b = 2.0 * (V @ ((CENTROIDS.T * w) @ zb)) \
        + 2.0 * float((w * za * zb).sum()) * u_a
    u_b = _capped_factor(symmetrize_pair(SIGN_B * np.sqrt(resid)),
                         [V[:, 0], V[:, 1], u_a], var_b, chi_b,
                         0.80 * resid)

    contrast = np.zeros(14)
    contrast[PAIR[0]] = 1 / np.sqrt(2)
    contrast[PAIR[1]] = -1 / np.sqrt(2)
    P_fill = (np.eye(14) - V @ V.T - np.outer(u_a, u_a) - np.outer(u_b, u_b)
              - np.outer(contrast, contrast))
    return Geometry(V, u_a, u_b, contrast, P_fill)


def _population_s(geom: Geometry, scale_a, scale_b, d_a, d_b, d_c, W_fill):
    means = geom.cluster_means(scale_a, scale_b)
    w = SIZES / N_ROWS
    B = (means.T * w) @ means
    W = (geom.V @ np.diag(W_PLANE) @ geom.V.T
         + d_a * np.outer(geom.u_a, geom.u_a)
         + d_b * np.outer(geom.u_b, geom.u_b)
         + d_c * np.outer(geom.contrast, geom.contrast)
         + W_fill)
    return B + W


def solve_design(geom: Geometry, verbose: bool = False) -> Design:
    """Tune scales, boosts and residual variances against the spectrum pins.

    The residual-subspace covariance is floor*P + P diag(delta) P with
    delta >= 0 solved linearly for a unit diagonal; delta's two largest
    boost directions (seeded vectors inside the subspace) lift the third and
    fourth correlation eigenvalues above one.
    """
    P = geom.P_fill
    d_a, d_b = 0.45, 0.40

    def structural(scale_a, scale_b, d_c, boost):
        return _population_s(geom, scale_a, scale_b, d_a, d_b, d_c,
                             ORTH_FLOOR * P + boost)

    def boost_directions(scale_a, scale_b):
        # allocated from the residual budget so they never overload an
        # indicator's unit variance
        base = structural(scale_a, scale_b, 1.0 - PAIR_R, np.zeros((14, 14)))
        resid0 = np.clip(1.0 - base.diagonal(), 0.04, None)
        g1_ = P @ symmetrize_pair(np.sqrt(resid0))
        g1_ /= np.linalg.norm(g1_)
        alt = np.array([1, -1, 1, -1, 1, -1, 1, -1, 1, -1, 1, -1, 1, -1.0])
        g2_ = P @ symmetrize_pair(alt * np.sqrt(resid0))
        g2_ -= (g2_ @ g1_) * g1_
        g2_ /= np.linalg.norm(g2_)
        return g1_, g2_

    g1, g2 = boost_directions(0.90, 1.50)

    def solve_fill(scale_a, scale_b, d_c, rho_):
        boost = rho_[0] * np.outer(g1, g1) + rho_[1] * np.outer(g2, g2)
        target = 1.0 - structural(scale_a, scale_b, d_c, boost).diagonal()
        fit = lsq_linear(P ** 2, target, bounds=(0.0, np.inf))
        W_fill = ORTH_FLOOR * P + boost + P @ np.diag(fit.x) @ P
        misfit = float(np.abs(P ** 2 @ fit.x - target).max())
        return W_fill, misfit

    def evaluate(scales_, rho_):
        d_c = 1.0 - PAIR_R
        W_fill = misfit = S = None
        for _ in range(3):
            W_fill, misfit = solve_fill(*scales_, d_c, rho_)
            S = _population_s(geom, scales_[0], scales_[1], d_a, d_b, d_c,
                              W_fill)
            d_c = (1.0 - PAIR_R) * S[PAIR[0], PAIR[0]]
        dd = np.sqrt(S.diagonal())
        lam = np.linalg.eigvalsh(S / np.outer(dd, dd))[::-1]
        return S, W_fill, d_c, lam, misfit

    def secant2(update, fixed, targets, start, lo, hi, rounds=15, h=0.02):
        x = start.copy()
        for _ in range(rounds):
            f = update(x, fixed)
            err = f - targets
            if np.abs(err).max() < 1e-6:
                break
            J = np.zeros((2, 2))
            for j in range(2):
                bump = x.copy()
                bump[j] += h
                J[:, j] = (update(bump, fixed) - f) / h
            step = np.clip(np.linalg.solve(J, err), -0.25, 0.25)
            x = np.clip(x - step, lo, hi)
        return x

    scales = np.array([0.95, 1.55])
    rho = np.array([0.45, 0.25])
    for outer in range(8):
        scales = secant2(
            lambda x, r: evaluate(x, r)[3][:2], rho,
            np.array([LAMBDA_1, LAMBDA_2]), scales, 0.2, 3.0)
        rho = secant2(
            lambda x, s: evaluate(s, x)[3][2:4], scales,
            np.array([1.33, 1.10]), rho, 0.02, 1.0)
        S, W_fill, d_c, lam, misfit = evaluate(scales, rho)
        if outer in (1, 3):
            # re-derive the boost directions from the current budgets
            g1, g2 = boost_directions(*scales)
        if (abs(lam[0] - LAMBDA_1) < 1e-5 and abs(lam[1] - LAMBDA_2) < 1e-5
                and abs(lam[2] - 1.33) < 5e-3 and abs(lam[3] - 1.10) < 5e-3
                and misfit < 1e-6):
            break

    # settle the two leading eigenvalues last; they are the pinned targets
    scales = secant2(lambda x, r: evaluate(x, r)[3][:2], rho,
                     np.array([LAMBDA_1, LAMBDA_2]), scales, 0.2, 3.0,
                     rounds=25)
    S, W_fill, d_c, lam, misfit = evaluate(scales, rho)
    design = Design(geom, scales[0], scales[1], d_a, d_b, d_c, W_fill, S)
    design.diag_misfit = misfit
    if verbose:
        dd = np.sqrt(S.diagonal())
        R = S / np.outer(dd, dd)
        lam = np.linalg.eigvalsh(R)[::-1]
        print("tuned eigs:", np.round(lam, 5))
        print("count > 1:", int((lam > 1).sum()))
        print("cum2:", (lam[0] + lam[1]) / 14)
        print("diag error:", np.abs(S.diagonal() - 1.0).max())
        print("pair r:", R[PAIR[0], PAIR[1]])
        print("scales:", np.round(scales, 5), "rho:", np.round(rho, 4))
        W = design.within_covariance()
        # within spectrum off the plane must clear the plane's variances
        evals = np.linalg.eigvalsh(W)
        print("within eigs (low end):", np.round(evals[:6], 4))
    return design


def design_fixture(verbose: bool = False) -> Design:
    """Alternate the loading allocator with the spectrum tuner until the
    factor scales they assume agree."""
    scales = (0.95, 1.55)
    design = None
    best_score = np.inf
    for round_ in range(4):
        geometry = build_geometry(*scales)
        candidate = solve_design(geometry, verbose=False)
        lam = np.linalg.eigvalsh(
            candidate.S / np.outer(np.sqrt(candidate.S.diagonal()),
                                   np.sqrt(candidate.S.diagonal())))[::-1]
        score = (10 * abs(lam[0] - LAMBDA_1) + 10 * abs(lam[1] - LAMBDA_2)
                 + candidate.diag_misfit)
        if verbose:
            print(f"round {round_}: scales "
                  f"{np.round((candidate.scale_a, candidate.scale_b), 4)} "
                  f"diag misfit {candidate.diag_misfit:.4g} score {score:.4g}")
        if score < best_score:
            best_score = score
            design = candidate
        new_scales = (candidate.scale_a, candidate.scale_b)
        if max(abs(new_scales[0] - scales[0]),
               abs(new_scales[1] - scales[1])) < 0.005:
            break
        scales = new_scales
    if verbose:
        S = design.S
        dd = np.sqrt(S.diagonal())
        R = S / np.outer(dd, dd)
        lam = np.linalg.eigvalsh(R)[::-1]
        print("eigs:", np.round(lam, 5))
        print("count > 1:", int((lam > 1).sum()), " cum2:",
              (lam[0] + lam[1]) / 14)
        print("diag error:", np.abs(S.diagonal() - 1.0).max())
        print("pair r:", R[PAIR[0], PAIR[1]])
        print("within eigs (low end):",
              np.round(np.linalg.eigvalsh(design.within_covariance())[:6], 4))
    return design




# ---------------------------------------------------------------------------
# stage 2: sampling with exact empirical moments
# ---------------------------------------------------------------------------

CORE_SIGMA = 0.055
CORE_MAX = 0.15
HALO_BANDS = [(0.32, 0.40), (0.32, 0.40), (0.32, 0.40), (0.30, 0.37)]
VORONOI_MARGIN = 0.07


def _voronoi_ok(points, own, margin=VORONOI_MARGIN):
    """Points strictly inside their own centroid's cell by `margin`."""
    d_own = np.linalg.norm(points - CENTROIDS[own], axis=1)
    ok = np.ones(points.shape[0], dtype=bool)
    for other in range(4):
        if other == own:
            continue
        d_other = np.linalg.norm(points - CENTROIDS[other], axis=1)
        ok &= d_other - d_own >= margin
    return ok


def sample_plane_shapes(rng: np.random.Generator, bands=None):
    """Core/halo deviations around each centroid.

    Core points sit within CORE_MAX of the centroid; halo points occupy an
    annulus kept inside the cluster's cell. The core share per cluster is the
    pivot-share target. Returns per-row deviations (exact per-cluster zero
    mean, pooled covariance exactly diag(W_PLANE)) and the cluster labels.
    """
    deviations = []
    labels = []
    for c, (n_c, f_c) in enumerate(zip(SIZES, PIVOT_TARGETS)):
        n_core = int(round(f_c * n_c))
        n_halo = n_c - n_core
        radii = rng.rayleigh(CORE_SIGMA, size=n_core * 3)
        radii = radii[radii < CORE_MAX][:n_core]
        while radii.size < n_core:
            extra = rng.rayleigh(CORE_SIGMA, size=n_core)
            radii = np.concatenate([radii, extra[extra < CORE_MAX]])[:n_core]
        angles = rng.uniform(0, 2 * np.pi, size=n_core)
        aniso = np.sqrt(2.0 * W_PLANE / W_PLANE.sum())
        core = np.column_stack([radii * np.cos(angles),
                                radii * np.sin(angles)]) * aniso
        # Halo rings are circles in the final metric; the covariance split
        # between the two plane axes comes from a tilted angle density
        # (1 + gamma sin^2), so the exact-moment whitening stays near the
        # identity and does not smear ring distances across the pivot
        # threshold.
        ratio = W_PLANE[0] / W_PLANE[1]
        gamma = 4.0 * (1.0 - ratio) / (3.0 * ratio - 1.0) if ratio > 1 / 3 \
            else 8.0
        lo, hi = (bands or HALO_BANDS)[c]
        halo = np.empty((0, 2))
        while halo.shape[0] < n_halo:
            m = 4 * (n_halo - halo.shape[0]) + 16
            r = np.sqrt(rng.uniform(lo ** 2, hi ** 2, size=m))
            a = rng.uniform(0, 2 * np.pi, size=m)
            keep_angle = rng.uniform(0, 1 + abs(gamma), size=m) <= \
                1 + gamma * np.sin(a) ** 2
            cand = np.column_stack([r * np.cos(a), r * np.sin(a)])[keep_angle]
            keep = _voronoi_ok(CENTROIDS[c] + cand, c, VORONOI_MARGIN + 0.02)
            halo = np.vstack([halo, cand[keep]])
        halo = halo[:n_halo]
        dev = np.vstack([core, halo])
        deviations.append(dev)
        labels.append(np.full(n_c, c))
    return np.vstack(deviations), np.concatenate(labels)


def _sym_sqrt(M, inv=False):
    vals, vecs = np.linalg.eigh((M + M.T) / 2.0)
    vals = np.clip(vals, 1e-12, None)
    power = -0.5 if inv else 0.5
    return vecs @ np.diag(vals ** power) @ vecs.T


def _ot_map(C_from, C_to):
    """Symmetric PSD map L with L C_from L = C_to (minimal rotation)."""
    r_to = _sym_sqrt(C_to)
    inner = _sym_sqrt(r_to @ C_from @ r_to)
    return r_to @ np.linalg.inv(inner) @ r_to


def enforce_plane_moments(dev, labels, rounds: int = 8):
    """Exactly zero per-cluster means and pooled covariance diag(W_PLANE),
    while keeping every point inside its cluster's cell."""
    dev = dev.copy()
    for _ in range(rounds):
        for c in range(4):
            members = labels == c
            dev[members] -= dev[members].mean(axis=0)
        pooled = dev.T @ dev / dev.shape[0]
        L = _ot_map(pooled, np.diag(W_PLANE))
        dev = dev @ L.T
        # pull any margin violators radially inward, then re-enforce
        violated = False
        for c in range(4):
            members = np.flatnonzero(labels == c)
            pts = CENTROIDS[c] + dev[members]
            ok = _voronoi_ok(pts, c)
            if not np.all(ok):
                violated = True
                bad = members[~ok]
                dev[bad] *= 0.85
        if not violated:
            break
    for c in range(4):
        members = labels == c
        dev[members] -= dev[members].mean(axis=0)
    pooled = dev.T @ dev / dev.shape[0]
    dev = dev @ _ot_map(pooled, np.diag(W_PLANE)).T
    return dev


def sample_orth_noise(design: Design, labels, rng, plane_dev):
    """Within noise orthogonal to the plane with exact blockwise moments.

    Per-cluster means are exactly zero, the pooled cross moment with the
    plane deviations is exactly zero, and the pooled covariance equals the
    design's orthogonal within block exactly.
    """
    geom = design.geom
    V = geom.V
    # orthonormal complement basis
    Q, _ = np.linalg.qr(np.eye(14) - V @ V.T)
    Q = Q[:, :12] if Q.shape[1] >= 12 else Q
    # ensure Q really spans the complement
    Q = np.linalg.svd(np.eye(14) - V @ V.T)[0][:, :12]
    W_ind = design.within_covariance()
    W_orth_target = Q.T @ W_ind @ Q

    eta = rng.multivariate_normal(np.zeros(12), W_orth_target, size=N_ROWS,
                                  method="cholesky")
    for _ in range(3):
        for c in range(4):
            members = labels == c
            eta[members] -= eta[members].mean(axis=0)
        # regress out the plane deviations (their per-cluster means are zero,
        # so this keeps the per-cluster centering intact)
        beta = np.linalg.lstsq(plane_dev, eta, rcond=None)[0]
        eta = eta - plane_dev @ beta
        pooled = eta.T @ eta / N_ROWS
        eta = eta @ _ot_map(pooled, W_orth_target).T
    return eta, Q


def _pivot_shares(plane_dev, labels):
    """Share of members within mu+sigma of the distance distribution."""
    shares = np.zeros(4)
    for c in range(4):
        d = np.linalg.norm(plane_dev[labels == c], axis=1)
        shares[c] = float((d <= d.mean() + d.std()).mean())
    return shares


def calibrated_plane_shapes(seed: int, max_rounds: int = 30):
    """Tune per-cluster halo bands until the pivot shares hit their targets
    on the moment-enforced deviations."""
    offsets = np.zeros(4)
    plane_dev = labels = None
    for round_ in range(max_rounds):
        bands = [(lo + offsets[c], hi + offsets[c])
                 for c, (lo, hi) in enumerate(HALO_BANDS)]
        rng = np.random.default_rng(seed)
        plane_dev, labels = sample_plane_shapes(rng, bands)
        plane_dev = enforce_plane_moments(plane_dev, labels)
        shares = _pivot_shares(plane_dev, labels)
        err = shares - PIVOT_TARGETS
        if np.abs(err).max() <= 0.015:
            break
        # share too high: push the halo outward past the threshold
        offsets = np.clip(offsets + np.clip(err * 0.8, -0.03, 0.03),
                          -0.10, 0.22)
    return plane_dev, labels


def assemble_panel_z(design: Design, seed: int = 11):
    """Standardized data matrix with empirical covariance exactly design.S."""
    plane_dev, labels = calibrated_plane_shapes(seed)
    rng = np.random.default_rng(seed + 1)
    eta, Q = sample_orth_noise(design, labels, rng, plane_dev)
    means = design.means
    Z = means[labels] + plane_dev @ design.geom.V.T + eta @ Q.T
    return Z, labels, plane_dev, eta, Q


# ---------------------------------------------------------------------------
# stage 3: EURIS tier labels with band-structured disagreement
# ---------------------------------------------------------------------------

# Per FKM cluster: EURIS code -> count. Row shares reproduce the published
# agreement rates (85.4 / 31.2 / 53.7 / 74.0 percent on the diagonal).
EURIS_MIX = {
    0: {4: 580, 3: 99},             # emerging
    1: {3: 149, 2: 200, 4: 128},    # moderate
    2: {2: 255, 1: 42, 3: 178},     # strong
    3: {1: 208, 2: 73},             # leader
}


def assign_euris_labels(Z: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """EURIS codes per row: composite-index bands within each cluster.

    The composite is the unweighted average of standardized indicators (the
    scoreboard's own recipe); within each cluster the better-ranked rows take
    the better foreign label, which concentrates disagreement at band edges.
    """
    composite = Z.mean(axis=1)
    euris = np.zeros(N_ROWS, dtype=int)
    for c, mix in EURIS_MIX.items():
        members = np.flatnonzero(labels == c)
        order = members[np.argsort(-composite[members])]
        start = 0
        for code in sorted(mix):   # best code (1) first
            count = mix[code]
            euris[order[start:start + count]] = code
            start += count
        assert start == members.size
    return euris


# ---------------------------------------------------------------------------
# stage 4: region identities, casting and unit anchors
# ---------------------------------------------------------------------------

MOVERS = {
    # region -> list of (year, cluster) for all eight years
    "ITF3 - Campania": [(y, 0) for y in range(2016, 2022)]
                       + [(y, 2) for y in (2022, 2023)],
    "ES61 - Andalucía": [(y, 0) for y in range(2016, 2021)]
                        + [(y, 2) for y in (2021, 2022, 2023)],
    "DK01 - Hovedstaden": [(y, 2) for y in range(2016, 2023)] + [(2023, 3)],
    "CZ01 - Praha": [(2016, 1)] + [(y, 2) for y in range(2017, 2024)],
    "PL91 - Warszawski stołeczny": [(y, 0) for y in (2016, 2017, 2018, 2019)]
                                   + [(y, 1) for y in (2020, 2021, 2022, 2023)],
}

HOME_COUNTS = {0: 83, 1: 59, 2: 57, 3: 35}   # full-panel regions per cluster

LEADER_HOMES = [
    "DE11 - Stuttgart", "DE12 - Karlsruhe", "DE14 - Tübingen",
    "DE21 - Oberbayern", "DE25 - Mittelfranken", "DE30 - Berlin",
    "DE60 - Hamburg", "DE71 - Darmstadt", "DE91 - Braunschweig",
    "DEA2 - Köln", "DK04 - Midtjylland", "FI1B - Helsinki-Uusimaa",
    "FI1C - Etelä-Suomi", "FI19 - Länsi-Suomi", "SE11 - Stockholm",
    "SE12 - Östra Mellansverige", "SE22 - Sydsverige", "SE23 - Västsverige",
    "NL31 - Utrecht", "NL41 - Noord-Brabant", "NL32 - Noord-Holland",
    "BE24 - Prov. Vlaams-Brabant", "BE31 - Prov. Brabant Wallon",
    "IE06 - Eastern and Midland", "UKJ1 - Berkshire, Bucks and Oxon",
    "UKH1 - East Anglia", "UKI3 - Inner London West",
    "CH01 - Région lémanique", "CH02 - Espace Mittelland",
    "CH03 - Nordwestschweiz", "CH04 - Zürich", "CH05 - Ostschweiz",
    "CH06 - Zentralschweiz", "AT13 - Wien", "DK03 - Syddanmark",
]

STRONG_HOMES = [
    "FR10 - Ile-de-France", "FR71 - Rhône-Alpes", "FR62 - Midi-Pyrénées",
    "FR52 - Bretagne", "FR42 - Alsace", "DE13 - Freiburg",
    "DE26 - Unterfranken", "DE27 - Schwaben", "DEB3 - Rheinhessen-Pfalz",
    "DED2 - Dresden", "DE92 - Hannover", "DEA1 - Düsseldorf",
    "DEA4 - Detmold", "DEA5 - Arnsberg", "DE72 - Gießen",
    "DE73 - Kassel", "DEF0 - Schleswig-Holstein", "DE50 - Bremen",
    "AT12 - Niederösterreich", "AT22 - Steiermark", "AT31 - Oberösterreich",
    "AT32 - Salzburg", "AT33 - Tirol", "AT34 - Vorarlberg",
    "BE10 - Région de Bruxelles-Capitale", "BE21 - Prov. Antwerpen",
    "BE22 - Prov. Limburg", "BE23 - Prov. Oost-Vlaanderen",
    "BE25 - Prov. West-Vlaanderen", "BE32 - Prov. Hainaut",
    "NL11 - Groningen", "NL21 - Overijssel", "NL22 - Gelderland",
    "NL33 - Zuid-Holland", "NL42 - Limburg", "DK02 - Sjælland",
    "DK05 - Nordjylland", "SE21 - Småland med öarna",
    "SE31 - Norra Mellansverige", "SE33 - Övre Norrland",
    "FI1D - Pohjois- ja Itä-Suomi", "NO01 - Oslo og Akershus",
    "NO03 - Sør-Østlandet", "NO05 - Vestlandet", "NO06 - Trøndelag",
    "NO07 - Nord-Norge", "IE04 - Northern and Western",
    "IE05 - Southern", "UKJ2 - Surrey, East and West Sussex",
    "UKK1 - Gloucestershire, Wiltshire and Bristol", "UKM5 - North Eastern Scotland",
    "UKD6 - Cheshire", "LU00 - Luxembourg", "EE00 - Eesti",
    "SI04 - Zahodna Slovenija", "ITC4 - Lombardia", "ITH5 - Emilia-Romagna",
]

MODERATE_HOMES = [
    "ES11 - Galicia", "ES12 - Principado de Asturias", "ES13 - Cantabria",
    "ES21 - País Vasco", "ES22 - Comunidad Foral de Navarra",
    "ES23 - La Rioja", "ES24 - Aragón", "ES30 - Comunidad de Madrid",
    "ES41 - Castilla y León", "ES42 - Castilla-La Mancha",
    "ES51 - Cataluña", "ES52 - Comunitat Valenciana", "ES62 - Región de Murcia",
    "ITC1 - Piemonte", "ITC3 - Liguria", "ITH2 - Provincia Autonoma di Trento",
    "ITH3 - Veneto", "ITH4 - Friuli-Venezia Giulia", "ITI1 - Toscana",
    "ITI2 - Umbria", "ITI3 - Marche", "ITI4 - Lazio", "ITF1 - Abruzzo",
    "PT11 - Norte", "PT16 - Centro", "PT17 - Área Metropolitana de Lisboa",
    "PT15 - Algarve", "PT18 - Alentejo", "CZ02 - Střední Čechy",
    "CZ03 - Jihozápad", "CZ06 - Jihovýchod", "CZ08 - Moravskoslezsko",
    "SI03 - Vzhodna Slovenija", "HU11 - Budapest", "HU12 - Pest",
    "HU22 - Nyugat-Dunántúl", "SK01 - Bratislavský kraj",
    "HR05 - Grad Zagreb", "HR06 - Sjeverna Hrvatska",
    "EL30 - Attiki", "EL52 - Kentriki Makedonia", "EL61 - Thessalia",
    "CY00 - Kypros", "MT00 - Malta", "LT01 - Sostinės regionas",
    "LV00 - Latvija", "PL21 - Małopolskie", "PL22 - Śląskie",
    "PL41 - Wielkopolskie", "PL51 - Dolnośląskie", "PL63 - Pomorskie",
    "FR30 - Nord-Pas-de-Calais", "FR61 - Aquitaine", "FR81 - Languedoc-Roussillon",
    "UKC1 - Tees Valley and Durham", "UKG3 - West Midlands",
    "UKL1 - West Wales and The Valleys", "UKN0 - Northern Ireland",
    "NO02 - Hedmark og Oppland",
]

EMERGING_HOMES = [
    "BG31 - Severozapaden", "BG32 - Severen tsentralen", "BG33 - Severoiztochen",
    "BG34 - Yugoiztochen", "BG41 - Yugozapaden", "BG42 - Yuzhen tsentralen",
    "RO11 - Nord-Vest", "RO12 - Centru", "RO21 - Nord-Est", "RO22 - Sud-Est",
    "RO31 - Sud-Muntenia", "RO32 - Bucuresti-Ilfov", "RO41 - Sud-Vest Oltenia",
    "RO42 - Vest", "EL41 - Voreio Aigaio", "EL42 - Notio Aigaio",
    "EL43 - Kriti", "EL51 - Anatoliki Makedonia, Thraki",
    "EL53 - Dytiki Makedonia", "EL54 - Ipeiros", "EL62 - Ionia Nisia",
    "EL63 - Dytiki Ellada", "EL64 - Sterea Ellada", "EL65 - Peloponnisos",
    "PL42 - Zachodniopomorskie", "PL43 - Lubuskie", "PL52 - Opolskie",
    "PL61 - Kujawsko-pomorskie", "PL62 - Warmińsko-mazurskie",
    "PL71 - Łódzkie", "PL72 - Świętokrzyskie", "PL81 - Lubelskie",
    "PL82 - Podkarpackie", "PL84 - Podlaskie", "PL92 - Mazowiecki regionalny",
    "HU21 - Közép-Dunántúl", "HU23 - Dél-Dunántúl", "HU31 - Észak-Magyarország",
    "HU32 - Észak-Alföld", "HU33 - Dél-Alföld", "SK02 - Západné Slovensko",
    "SK03 - Stredné Slovensko", "SK04 - Východné Slovensko",
    "CZ04 - Severozápad", "CZ05 - Severovýchod", "CZ07 - Střední Morava",
    "HR02 - Panonska Hrvatska", "HR03 - Jadranska Hrvatska",
    "ITF2 - Molise", "ITF4 - Puglia", "ITF5 - Basilicata", "ITF6 - Calabria",
    "ITG1 - Sicilia", "ITG2 - Sardegna", "ES43 - Extremadura",
    "ES53 - Illes Balears", "ES70 - Canarias", "ES64 - Ciudad de Ceuta",
    "PT20 - Região Autónoma dos Açores", "PT30 - Região Autónoma da Madeira",
    "FR26 - Bourgogne", "LT02 - Vidurio ir vakarų Lietuvos regionas",
    "RS11 - Beogradski region", "RS12 - Region Vojvodine",
    "RS21 - Region Šumadije i Zapadne Srbije",
    "RS22 - Region Južne i Istočne Srbije", "ME00 - Crna Gora",
    "MK00 - Severna Makedonija", "AL01 - Veri", "AL02 - Qender", "AL03 - Jug",
    "BA00 - Bosna i Hercegovina", "FR83 - Corse", "FR25 - Franche-Comté",
    "FRY1 - Guadeloupe", "FRY2 - Martinique", "FRY3 - Guyane",
    "FRY4 - La Réunion", "ES63 - Ciudad de Melilla", "IS00 - Ísland",
    "UKK3 - Cornwall and Isles of Scilly", "UKF3 - Lincolnshire",
    "FR53 - Poitou-Charentes",
]


# Raw units for indicators without published anchors: (mean, sd, decimals).
RAW_UNITS = {
    0: (40.5, 9.0, 1),     # 1.1.2 tertiary education %
    1: (11.5, 4.6, 1),     # 1.1.3 lifelong learning %
    2: (1750.0, 1050.0, 0),  # 1.2.1 co-publications per million
    3: (9.6, 2.6, 3),      # 1.2.2 top-10% publications %
    4: (31.5, 7.5, 2),     # 1.3.2 digital skills %
    8: (430.0, 260.0, 1),  # 3.2.2 public-private co-publications
    9: (3.6, 2.1, 3),      # 3.3.1 PCT patents per billion GDP
    10: (7.4, 3.3, 3),     # 3.3.2 trademark applications
    11: (3.9, 2.4, 3),     # 3.3.3 design applications
    13: (8.9, 3.1, 3),     # 4.3.2 PM2.5 air emissions
}
ANCHOR_DECIMALS = {5: 2, 6: 2, 7: 3, 12: 1}
# published raw anchor values: (campania_2023, hamburg_2023)
ANCHORS = {6: (0.63, 1.22), 5: (0.68, 1.04), 12: (13.0, 21.8),
           7: (3.03, 8.53)}
BERLIN_ICT = 11.8
TRIAL_SEQUENCE = [("2.2.1", 1.22), ("2.1.1", 1.04), ("4.1.1", 21.8),
                  ("2.3.2", 8.53), ("2.3.2", BERLIN_ICT)]


def plan_identity(Z, labels):
    """Assign (region, year) to every row.

    Rows in each cluster are ranked by the scoreboard composite and chunked
    into bundles of eight consecutive rows (one region's trajectory); mover
    regions take boundary rows of their old and new clusters. Initial year
    order inside a bundle follows the composite, which yields the upward
    drift the period-shift search then shapes.
    """
    composite = Z.mean(axis=1)
    order_by_cluster = {
        c: list(np.flatnonzero(labels == c)[
            np.argsort(composite[labels == c])]) for c in range(4)}

    region_of = np.empty(N_ROWS, dtype=object)
    year_of = np.zeros(N_ROWS, dtype=int)
    pinned = np.zeros(N_ROWS, dtype=bool)

    def take(cluster, n, from_top):
        rows = order_by_cluster[cluster]
        if from_top:
            picked = rows[-n:]
            del rows[-n:]
        else:
            picked = rows[:n]
            del rows[:n]
        return picked

    # movers: old-cluster rows from the top of their band (about to move up),
    # new-cluster rows from the bottom (fresh arrivals)
    for region, plan in MOVERS.items():
        clusters = [c for _, c in plan]
        first_cluster = clusters[0]
        n_old = clusters.count(first_cluster)
        new_cluster = clusters[-1]
        n_new = 8 - n_old
        old_rows = take(first_cluster, n_old, from_top=True)
        new_rows = take(new_cluster, n_new, from_top=False)
        rows = sorted(old_rows, key=lambda i: composite[i]) + \
            sorted(new_rows, key=lambda i: composite[i])
        for (year, cluster), row in zip(plan, rows):
            assert labels[row] == cluster
            region_of[row] = region
            year_of[row] = year
            pinned[row] = True

    homes = {0: EMERGING_HOMES, 1: MODERATE_HOMES,
             2: STRONG_HOMES, 3: LEADER_HOMES}
    for c, names in homes.items():
        rows = order_by_cluster[c]
        assert len(rows) == 8 * len(names), (c, len(rows), len(names))
        # best bundle goes to the first name in the list
        bundles = [rows[i * 8:(i + 1) * 8] for i in range(len(names))]
        for name, bundle in zip(names, reversed(bundles)):
            bundle = sorted(bundle, key=lambda i: composite[i])
            for year, row in zip(YEARS, bundle):
                region_of[row] = name
                year_of[row] = year
    assert all(r is not None for r in region_of)
    return region_of, year_of, pinned


def solve_units(Z, region_of, year_of):
    """Affine indicator units: anchored columns from the published raw
    values of Campania and Hamburg 2023, the rest from realistic scales."""
    idx = {(r, y): i for i, (r, y) in enumerate(zip(region_of, year_of))}
    cam = idx[("ITF3 - Campania", 2023)]
    ham = idx[("DE60 - Hamburg", 2023)]
    mu = np.zeros(14)
    scale = np.zeros(14)
    for j, (lo, hi) in ANCHORS.items():
        dz = Z[ham, j] - Z[cam, j]
        scale[j] = (hi - lo) / dz
        mu[j] = lo - scale[j] * Z[cam, j]
    for j, (mean, sd, _) in RAW_UNITS.items():
        scale[j] = sd
        mu[j] = mean
        low = mean + sd * Z[:, j].min()
        if low < 0:
            mu[j] = mean - low + 0.02 * sd   # keep raw values positive
    return mu, scale, cam, ham


def raw_decimals():
    out = {}
    for j, (_, _, dec) in RAW_UNITS.items():
        out[j] = dec
    out.update(ANCHOR_DECIMALS)
    return [out[j] for j in range(14)]


def raw_matrix(Z, mu, scale):
    raw = Z * scale + mu
    dec = raw_decimals()
    for j in range(14):
        raw[:, j] = np.round(raw[:, j], dec[j])
    return raw


def _ks_d(a, b):
    pooled = np.unique(np.concatenate([a, b]))
    fa = np.searchsorted(np.sort(a), pooled, side="right") / a.size
    fb = np.searchsorted(np.sort(b), pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def tune_period_shift(raw, region_of, year_of, pinned, seed=5):
    """Local search over within-region year permutations until the business
    and public R&D x-vs-z KS statistics hit their exact rational targets."""
    rng = np.random.default_rng(seed)
    years = year_of.copy()
    regions = {}
    for i, r in enumerate(region_of):
        regions.setdefault(r, []).append(i)
    free_regions = [r for r, rows in regions.items()
                    if not pinned[rows].any()]

    col_bus = raw[:, 6]
    col_pub = raw[:, 5]
    x_years = {2021, 2022, 2023}
    z_years = {2016, 2017}

    def group_masks(yrs):
        in_x = np.isin(yrs, list(x_years))
        in_z = np.isin(yrs, list(z_years))
        return in_x, in_z

    def loss(yrs):
        in_x, in_z = group_masks(yrs)
        d1 = _ks_d(col_bus[in_x], col_bus[in_z])
        d2 = _ks_d(col_pub[in_x], col_pub[in_z])
        err = 2.0 * abs(d1 - KS_TARGET_BUSINESS) + abs(d2 - KS_TARGET_PUBLIC)
        return err, (d1, d2)

    # soften the initial drift: randomize year order in a share of regions
    for r in rng.permutation(free_regions)[: int(0.55 * len(free_regions))]:
        rows = regions[r]
        perm = rng.permutation(8)
        years[rows] = np.array(YEARS)[perm]

    def critical_value(yrs):
        in_x, in_z = group_masks(yrs)
        pooled = np.unique(np.concatenate([col_bus[in_x], col_bus[in_z]]))
        fa = np.searchsorted(np.sort(col_bus[in_x]), pooled, "right") / in_x.sum()
        fb = np.searchsorted(np.sort(col_bus[in_z]), pooled, "right") / in_z.sum()
        return pooled[int(np.argmax(np.abs(fa - fb)))]

    current, ds = loss(years)
    best_state = (current, years.copy(), ds)
    stale = 0
    vstar = critical_value(years)
    for step in range(400000):
        if rng.random() < 0.5:
            # targeted: a region whose business value sits near the
            # current ECDF argmax, where single swaps move the statistic
            tries = 0
            while True:
                r = free_regions[rng.integers(len(free_regions))]
                rows = regions[r]
                near = np.abs(col_bus[rows] - vstar) < 0.06
                if near.any() or tries > 6:
                    break
                tries += 1
        else:
            r = free_regions[rng.integers(len(free_regions))]
            rows = regions[r]
        i, j = rng.choice(8, size=2, replace=False)
        a, b = rows[i], rows[j]
        if years[a] == years[b]:
            continue
        years[a], years[b] = years[b], years[a]
        cand, ds_new = loss(years)
        if cand <= current or rng.random() < 0.005:
            current = cand
            ds = ds_new
            if cand < best_state[0]:
                best_state = (cand, years.copy(), ds_new)
                stale = 0
            if current == 0.0:
                break
        else:
            years[a], years[b] = years[b], years[a]
            stale += 1
        if step % 2000 == 0:
            vstar = critical_value(years)
        if stale > 25000:
            # plateau kick: reshuffle a few regions and resume from best
            current, years, ds = best_state[0], best_state[1].copy(), best_state[2]
            for r in rng.choice(free_regions, size=4, replace=False):
                rows = regions[r]
                years[rows] = np.array(YEARS)[rng.permutation(8)]
            current, ds = loss(years)
            stale = 0
    if best_state[0] < current:
        current, years, ds = best_state[0], best_state[1], best_state[2]
    return years, ds, current


# ---------------------------------------------------------------------------
# stage 5: cast-row nudges, final assembly and verification
# ---------------------------------------------------------------------------

def sample_orth_noise_with_targets(design, labels, rng, plane_dev, targets):
    """Like sample_orth_noise, but iterates small adjustments so selected
    (row, column) cells land on exact standardized values after the moment
    enforcement. targets: list of (row, col, z_value)."""
    geom = design.geom
    V = geom.V
    Q = np.linalg.svd(np.eye(14) - V @ V.T)[0][:, :12]
    W_ind = design.within_covariance()
    W_orth_target = Q.T @ W_ind @ Q
    eta0 = rng.multivariate_normal(np.zeros(12), W_orth_target, size=N_ROWS,
                                   method="cholesky")
    means = design.means

    by_row = {}
    for row, col, value in targets:
        by_row.setdefault(row, []).append((col, value))

    adjust = np.zeros_like(eta0)
    eta = eta0.copy()
    for _ in range(6):
        eta = eta0 + adjust
        for _ in range(3):
            for c in range(4):
                members = labels == c
                eta[members] -= eta[members].mean(axis=0)
            beta = np.linalg.lstsq(plane_dev, eta, rcond=None)[0]
            eta = eta - plane_dev @ beta
            pooled = eta.T @ eta / N_ROWS
            eta = eta @ _ot_map(pooled, W_orth_target).T
        if not by_row:
            break
        Z = means[labels] + plane_dev @ geom.V.T + eta @ Q.T
        worst = 0.0
        for row, cells in by_row.items():
            cols = [c for c, _ in cells]
            want = np.array([v for _, v in cells])
            have = Z[row, cols]
            err = want - have
            worst = max(worst, np.abs(err).max())
            # move eta along the least-norm direction fixing these columns
            A = Q[cols, :]
            delta, *_ = np.linalg.lstsq(A, err, rcond=None)
            adjust[row] += delta
        if worst < 1e-9:
            break
    return eta, Q


def choose_cast_targets(Z, labels, region_of, year_of):
    """Standardized-value targets for the cast rows.

    Chosen so the affine unit maps solved from the published raw anchors have
    realistic scales, every raw column stays positive, Berlin tops the
    leader cluster's ICT column with Hamburg in the exemplar range, and the
    progressive-trial walk crosses into the leader region at the last step.
    """
    idx = {(r, y): i for i, (r, y) in enumerate(zip(region_of, year_of))}
    cam = idx[("ITF3 - Campania", 2023)]
    ham = idx[("DE60 - Hamburg", 2023)]
    ber = idx[("DE30 - Berlin", 2023)]
    leaders = np.flatnonzero(labels == 3)
    ict = Z[:, 7]
    lead_sorted = np.sort(ict[leaders])
    third = lead_sorted[-3]
    z_ham_ict = float(max(third + 0.12, 2.4))
    z_cam_ict = -1.6
    s_ict = (8.53 - 3.03) / (z_ham_ict - z_cam_ict)
    z_ber_ict = z_ham_ict + (BERLIN_ICT - 8.53) / s_ict
    targets = [
        (cam, 6, -0.75), (ham, 6, 1.04),     # business R&D
        (cam, 5, -0.35), (ham, 5, 1.035),    # public R&D
        (cam, 12, -1.10), (ham, 12, 1.41),   # knowledge-intensive employment
        (cam, 7, z_cam_ict), (ham, 7, z_ham_ict), (ber, 7, z_ber_ict),
    ]
    # keep the anchored ICT unit map positive: floor the column's tail
    floor = -2.85
    low_rows = np.flatnonzero(ict < floor)
    for k, row in enumerate(low_rows):
        if row not in (cam, ham, ber):
            targets.append((row, 7, floor + 0.01 * k))
    # populate the high-ICT corner with other leader rows so the classifier
    # generalizes there instead of keying on a single extreme point
    span = z_ber_ict - z_ham_ict
    fillers = [r for r in leaders[np.argsort(-ict[leaders])]
               if r not in (cam, ham, ber)][:8]
    for k, row in enumerate(fillers):
        frac = 0.25 + 0.6 * k / 7.0
        targets.append((int(row), 7, z_ham_ict + frac * span))
    return targets, (cam, ham, ber)


def assemble_final_panel(design, seed: int = 11):
    """Two-phase assembly: plan identities on a first draw, then regenerate
    the same draw with the cast-row cells pinned."""
    plane_dev, labels = calibrated_plane_shapes(seed)
    rng = np.random.default_rng(seed + 1)
    eta0, Q = sample_orth_noise(design, labels, rng, plane_dev)
    Z0 = design.means[labels] + plane_dev @ design.geom.V.T + eta0 @ Q.T
    region_of, year_of, pinned = plan_identity(Z0, labels)
    targets, cast = choose_cast_targets(Z0, labels, region_of, year_of)

    rng = np.random.default_rng(seed + 1)
    eta, Q = sample_orth_noise_with_targets(design, labels, rng, plane_dev,
                                            targets)
    Z = design.means[labels] + plane_dev @ design.geom.V.T + eta @ Q.T
    # pin the donor and base regions' trajectories to their planned years
    for i, r in enumerate(region_of):
        if r in ("DE30 - Berlin", "DE60 - Hamburg"):
            pinned[i] = True
    return Z, labels, region_of, year_of, pinned, cast


def write_csv(path, raw, region_of, year_of, euris):
    import csv as _csv
    dec = raw_decimals()
    order = sorted(range(N_ROWS), key=lambda i: (region_of[i], year_of[i]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["region", "year"] + INDICATOR_CODES + ["euris_label"])
        for i in order:
            cells = [region_of[i], int(year_of[i])]
            cells += [f"{raw[i, j]:.{dec[j]}f}" for j in range(14)]
            cells.append(int(euris[i]))
            writer.writerow(cells)


def verify_panel(csv_path, verbose=True):
    """Reload the written panel and check every pinned aggregate."""
    from innoscope import labeling as lab
    from innoscope import whatif
    from innoscope.dataset import (ColumnSchema, correlation_analysis,
                                   load_scoreboard, standardize)

    panel = load_scoreboard(str(csv_path), ColumnSchema())
    report = {}
    report["n_rows"] = panel.n_rows

    std = standardize(panel)
    model_pca = pca.fit_pca(std)
    report["lambda1"] = float(model_pca.eigenvalues[0])
    report["cum2"] = float(model_pca.cumulative[1])
    report["n_gt_one"] = int((model_pca.eigenvalues > 1).sum())
    report["q_elbow"] = pca.select_components(model_pca, "elbow_on_gt_one")

    corr = correlation_analysis(panel)
    r, t, _, _ = corr.pair("1.2.1", "3.2.2")
    report["pair_r"] = float(r)
    report["pair_t"] = float(t)

    model = jdrc.fit_fkm(std.data, 4, 2, seed=0, restarts=100)
    report["sizes"] = model.sizes.tolist()
    report["centroid_err"] = float(np.abs(model.Y - CENTROIDS).max())
    coords = jdrc.project(model, std.data)
    sem = lab.AxisSemantics((1, 1))
    labeling_ = lab.rank_centroids(model, sem)
    flags = lab.pivot_filter(model, coords)
    report["labels"] = {c: labeling_.labels[c] for c in range(4)}
    report["pivot_shares"] = [round(flags.share(c), 4) for c in range(4)]

    euris = panel.euris_labels()
    _, tot_fkm = jdrc.within_ss(model.labels, coords)
    _, tot_eur = jdrc.within_ss(euris, coords)
    report["within_fkm"] = tot_fkm
    report["within_euris"] = tot_eur

    ks_bus = shift.ks_two_sample(*_slices(panel, "2.2.1"))
    ks_pub = shift.ks_two_sample(*_slices(panel, "2.1.1"))
    report["D_business"] = ks_bus.d_stat
    report["p_business"] = ks_bus.p_value
    report["D_public"] = ks_pub.d_stat
    report["p_public"] = ks_pub.p_value

    # classifier protocol on the leader task
    features = panel.values_matrix()
    leader_mask = model.labels == labeling_.leader_cluster
    task = clf.BinaryTask("Innovation leader", features,
                          leader_mask.astype(int))
    _, rep, splits = clf.run_protocol(task, seed=0)
    report["split_sizes"] = list(splits.sizes)
    report["leader_accuracy"] = rep.accuracy
    report["leader_precision1"] = rep.precision(1)
    report["leader_recall1"] = rep.recall(1)

    # progressive trial storyline
    model_clf, _, _ = clf.run_protocol(task, seed=0)
    log = whatif.TrialLog("ITF3 - Campania", 2023, "Innovation leader")
    for name, value in TRIAL_SEQUENCE:
        whatif.run_trial(log, panel, {name: value}, model_clf)
    probs = [e.probability for e in log.entries]
    report["trial_probs"] = [round(p, 6) for p in probs]
    report["trial5_is_max"] = probs[4] == max(probs)

    donors = whatif.donor_lookup(panel, leader_mask, "Innovation leader",
                                 "2.3.2")
    vals = [v for _, _, v in donors.exemplars]
    report["donor_has_hamburg_berlin"] = (8.53 in vals and 11.8 in vals)

    if verbose:
        for key, value in report.items():
            print(f"  {key}: {value}")
    return report


def _slices(panel, indicator):
    s = shift.period_slices(panel, indicator)
    return s.x, s.z


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(
        Path(__file__).resolve().parents[1]
        / "src/innoscope/data/euris_2016_2023_panel.csv"))
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    print("solving population design ...")
    design = design_fixture(verbose=False)
    if design.diag_misfit > 1e-8:
        raise RuntimeError(f"design diagonal misfit {design.diag_misfit:.3g}; "
                           "geometry infeasible")
    print("assembling panel ...")
    Z, labels, region_of, year_of, pinned, cast = assemble_final_panel(
        design, seed=args.seed)
    euris = assign_euris_labels(Z, labels)
    mu, scale, cam, ham = solve_units(Z, region_of, year_of)
    raw = raw_matrix(Z, mu, scale)
    print("tuning period shift ...")
    year_of, ds, loss = tune_period_shift(raw, region_of, year_of, pinned,
                                          seed=args.seed)
    print(f"  D business {ds[0]:.8f} (target {KS_TARGET_BUSINESS:.8f})")
    print(f"  D public   {ds[1]:.8f} (target {KS_TARGET_PUBLIC:.8f})")
    if loss > 0:
        print("  WARNING: KS targets not exact, residual", loss)
    write_csv(args.out, raw, region_of, year_of, euris)
    print("wrote", args.out)
    print("verifying ...")
    verify_panel(args.out)


if __name__ == "__main__":
    main()
