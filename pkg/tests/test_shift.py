import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from innoscope import shift
from innoscope.dataset import INDICATORS, IndicatorPanel, RegionYear


def _panel(values_by_year, indicator_idx=0, label=3):
    """Panel with a chosen indicator varying by year, others constant-ish."""
    rows = []
    k = 0
    for year, values in values_by_year.items():
        for v in values:
            vals = [1.0 + 0.001 * k + j for j in range(14)]
            vals[indicator_idx] = v
            rows.append(RegionYear(f"R{k:04d}", year, tuple(vals), label))
            k += 1
    return IndicatorPanel(rows)


# --- ECDF --------------------------------------------------------------------

def test_ecdf_direct_counts():
    f = shift.ecdf([1.0, 2.0, 3.0])
    assert f(2.0) == pytest.approx(2 / 3)
    assert f(0.5) == 0.0
    assert f(3.0) == 1.0
    assert f(99.0) == 1.0


def test_ecdf_right_continuity():
    f = shift.ecdf([1.0, 2.0, 2.0, 5.0])
    assert f(2.0) == pytest.approx(0.75)
    assert f(np.nextafter(2.0, -np.inf)) == pytest.approx(0.25)


def test_ecdf_empty_errors():
    with pytest.raises(ValueError):
        shift.ecdf([])


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=60),
       st.floats(-60, 60))
def test_ecdf_matches_counting_oracle(sample, t):
    f = shift.ecdf(sample)
    brute = sum(1 for v in sample if v <= t) / len(sample)
    assert f(t) == pytest.approx(brute)


# --- Kolmogorov tail series --------------------------------------------------

def kolmogorov_oracle(lam, terms=10000):
    total = 0.0
    for j in range(1, terms + 1):
        total += (-1) ** (j - 1) * math.exp(-2 * j * j * lam * lam)
    return min(1.0, max(0.0, 2.0 * total))


def test_series_matches_partial_sum_oracle():
    for lam in (0.3, 0.5, 0.8, 1.0, 1.36, 1.63, 2.2):
        assert shift.kolmogorov_sf(lam) == pytest.approx(
            kolmogorov_oracle(lam), abs=1e-10)


def test_series_limits():
    assert shift.kolmogorov_sf(0.0) == 1.0
    assert shift.kolmogorov_sf(6.0) < 1e-20


# --- two-sample test ---------------------------------------------------------

def test_identical_samples():
    a = np.arange(30, dtype=float)
    res = shift.ks_two_sample(a, a.copy())
    assert res.d_stat == 0.0
    assert res.p_value == 1.0


def test_disjoint_support():
    res = shift.ks_two_sample(np.arange(40.0), np.arange(100.0, 140.0))
    assert res.d_stat == 1.0
    assert res.p_value < 1e-12


def test_d_statistic_brute_force():
    rng = np.random.default_rng(0)
    a = rng.normal(size=37)
    b = rng.normal(0.7, size=53)
    res = shift.ks_two_sample(a, b)
    fa, fb = shift.ecdf(a), shift.ecdf(b)
    grid = np.concatenate([a, b])
    brute = max(abs(fa(t) - fb(t)) for t in grid)
    assert res.d_stat == pytest.approx(brute, abs=1e-12)


def test_swap_symmetry():
    rng = np.random.default_rng(1)
    a = rng.normal(size=25)
    b = rng.normal(0.4, size=40)
    r1 = shift.ks_two_sample(a, b)
    r2 = shift.ks_two_sample(b, a)
    assert r1.d_stat == r2.d_stat
    assert r1.p_value == r2.p_value


def test_invariance_under_monotone_transform():
    rng = np.random.default_rng(2)
    a = rng.uniform(0.1, 4.0, size=30)
    b = rng.uniform(0.3, 4.5, size=45)
    base = shift.ks_two_sample(a, b)
    trans = shift.ks_two_sample(np.exp(a), np.exp(b))
    assert base.d_stat == pytest.approx(trans.d_stat, abs=1e-15)


def test_d_handles_ties_on_both_sides():
    a = np.array([1.0, 1.0, 2.0, 3.0])
    b = np.array([1.0, 2.0, 2.0, 2.0])
    res = shift.ks_two_sample(a, b)
    # at t=1: |0.5 - 0.25|; at t=2: |0.75 - 1.0|; at t=3: 0
    assert res.d_stat == pytest.approx(0.25)


def test_small_sample_correction_changes_lambda_only():
    rng = np.random.default_rng(3)
    a = rng.normal(size=30)
    b = rng.normal(0.5, size=30)
    plain = shift.ks_two_sample(a, b)
    corr = shift.ks_two_sample(a, b, small_sample_correction=True)
    assert plain.d_stat == corr.d_stat
    assert corr.p_value < plain.p_value  # larger lambda, smaller tail


def test_empty_sample_errors():
    with pytest.raises(ValueError):
        shift.ks_two_sample([], [1.0])


# --- period slicing and the report ------------------------------------------

def test_period_slices_partition_years():
    values = {y: [float(y)] * 3 for y in range(2016, 2024)}
    panel = _panel(values)
    slices = shift.period_slices(panel, "1.1.2")
    assert slices.x.size == 9 and slices.y.size == 9 and slices.z.size == 6
    assert set(np.unique(slices.z)) == {2016.0, 2017.0}


def test_shift_report_shape_and_verdicts():
    rng = np.random.default_rng(4)
    values = {y: list(rng.normal(size=6)) for y in range(2016, 2024)}
    panel = _panel(values)
    report = shift.shift_report(panel)
    assert len(report.rows) == 14 * 3
    pairs = {r.pair for r in report.rows}
    assert pairs == {"x_vs_y", "x_vs_z", "y_vs_z"}
    for r in report.rows:
        assert r.verdict in ("shifted", "stable", "untestable")


def test_shift_report_null_panel_false_positive_rate():
    # identically drawn years: about alpha of tests flag, not many more
    rng = np.random.default_rng(5)
    rows = []
    k = 0
    for year in range(2016, 2024):
        for _ in range(40):
            rows.append(RegionYear(f"R{k:04d}", year,
                                   tuple(rng.normal(size=14)), 3))
            k += 1
    panel = IndicatorPanel(rows)
    report = shift.shift_report(panel, significance=0.05)
    shifted = sum(r.verdict == "shifted" for r in report.rows)
    assert shifted <= 8  # 42 tests at 5% expect ~2; generous ceiling


def test_shift_report_untestable_when_slice_empty():
    values = {y: [1.0 + 0.1 * i for i in range(4)] for y in (2021, 2022, 2023)}
    panel = _panel(values)
    report = shift.shift_report(panel)
    assert report.row("1.1.2", "x_vs_z").verdict == "untestable"
    assert report.row("1.1.2", "x_vs_y").verdict == "untestable"


def test_shift_table_export():
    rng = np.random.default_rng(6)
    values = {y: list(rng.normal(size=5)) for y in range(2016, 2024)}
    panel = _panel(values)
    text = shift.shift_table(shift.shift_report(panel))
    lines = text.strip().split("\n")
    assert lines[0] == "indicator,pair,n1,n2,D,p,verdict"
    assert len(lines) == 43
