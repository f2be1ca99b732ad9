from __future__ import annotations

import math

import numpy as np
import pytest

from renormlab.analysis.cantor import PieceSample
from renormlab.analysis.geometry import (
    a_threshold,
    GeometryReport,
    GeometryRow,
    diameter_bounds_check,
    fixed_point_sigma,
    geometry_scan,
    holder_bound,
    horizontal_overlap,
    point_pair_distances,
    ratio_trend,
    scan_overlap,
    signed_overlap,
    tune_overlap,
    unbounded_geometry_criterion,
)
from renormlab.errors import HypothesisError
from renormlab.words import Word


def test_holder_bound_value() -> None:
    assert holder_bound(0.25, 0.0625) == pytest.approx(0.75, abs=1e-15)


@pytest.mark.parametrize("b1, b1t", [(0.25, 0.25), (0.1, 0.2), (1.0, 0.5), (0.5, 0.0)])
def test_holder_bound_rejects_bad_arguments(b1, b1t) -> None:
    with pytest.raises(HypothesisError):
        holder_bound(b1, b1t)


def test_holder_bound_monotone_and_in_range() -> None:
    grid = np.linspace(0.01, 0.99, 100)
    b1t = 0.005
    values = [holder_bound(b, b1t) for b in grid]
    assert all(0.5 < v < 1.0 for v in values)
    assert all(later < earlier for earlier, later in zip(values, values[1:]))


def test_a_threshold() -> None:
    assert a_threshold(0.5, 0.1) == 0.0
    assert a_threshold(1e-4, 0.1) == pytest.approx(math.log2(3.0), rel=1e-12)


def test_criterion_picks_nearest_level() -> None:
    sigma = -0.3995
    rows = unbounded_geometry_criterion(0.05, sigma, 3)
    assert [k for k, _, _ in rows] == [0, 1, 2, 3]
    for k, n, gap in rows:
        assert n > k
        assert gap <= abs(math.log(abs(sigma))) / 2 + 1e-12


def test_criterion_hypotheses() -> None:
    with pytest.raises(HypothesisError):
        unbounded_geometry_criterion(1.5, -0.4, 2)
    with pytest.raises(HypothesisError):
        unbounded_geometry_criterion(0.05, 0.4, 2)


def _sample(lo, hi) -> PieceSample:
    pts = np.array([[lo, 0.0, 0.0], [hi, 0.1, 0.1]])
    return PieceSample.from_points(Word(), pts)


def test_horizontal_overlap() -> None:
    assert horizontal_overlap(_sample(0.0, 1.0), _sample(0.5, 2.0)) == (True, pytest.approx(0.5))
    assert horizontal_overlap(_sample(0.0, 1.0), _sample(1.5, 2.0)) == (False, 0.0)


def test_geometry_scan(example_cascade) -> None:
    report = geometry_scan(example_cascade, kmax=1, b1=0.01, workers=1)
    pairs = sorted((r.k, r.n) for r in report.rows)
    assert pairs == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]
    for r in report.rows:
        assert r.dist_min > 0
        assert r.diam_v > 0
        assert r.ratio == pytest.approx(r.dist_min / r.diam_v)
        assert r.log_b1_2k == pytest.approx(2**r.k * math.log(0.01))
    assert set(report.ratios_by_k()) == {0, 1}
    fit = diameter_bounds_check(report, 0.01)
    assert 0 < fit.c_lower < math.inf
    assert 0 < fit.c_upper < math.inf


def test_point_pair_distances(example_cascade) -> None:
    out = point_pair_distances(example_cascade, 0, 1)
    assert out["distance"] > 0
    assert out["x_separation"] > 0
    with pytest.raises(ValueError):
        point_pair_distances(example_cascade, 1, 3)


def test_signed_overlap_reports_the_gap() -> None:
    assert signed_overlap(_sample(0.0, 1.0), _sample(0.5, 2.0)) == pytest.approx(0.5)
    assert signed_overlap(_sample(0.0, 1.0), _sample(1.5, 2.0)) == pytest.approx(-0.5)


def test_scan_uses_fixed_point_sigma(example_cascade) -> None:
    sigma = fixed_point_sigma(example_cascade)
    assert -0.41 < sigma < -0.39
    report = geometry_scan(example_cascade, kmax=1, workers=1)
    assert report.sigma == sigma
    for r in report.rows:
        assert r.log_sigma_k == pytest.approx(r.k * math.log(abs(sigma)), abs=1e-15)


def test_scan_overlap_matches_scan_rows(example_cascade) -> None:
    report = geometry_scan(example_cascade, kmax=1, workers=1)
    for r in report.rows:
        width = scan_overlap(example_cascade, r.k, r.n)
        assert r.overlap == (width > 0)
        assert r.overlap_width == pytest.approx(max(width, 0.0), abs=1e-15)


def _row(k: int, n: int, diam: float, ratio: float = 0.1) -> GeometryRow:
    return GeometryRow(
        k=k,
        n=n,
        word="",
        diam_v=diam,
        diam_c=diam,
        dist_min=ratio * diam,
        ratio=ratio,
        overlap=False,
        overlap_width=0.0,
        log_sigma_k=k * math.log(0.4),
    )


def _model_report(s: float = 0.4, b1: float = 0.2) -> GeometryReport:
    # diam = 2 (s^(2n-k) + s^n b1^(2^k)) for k <= 2, k < n <= 5
    rows = [_row(k, n, 2 * (s ** (2 * n - k) + s**n * b1 ** (2**k))) for k in range(3) for n in range(k + 1, 6)]
    return GeometryReport(rows=rows, sigma=-s, b1=b1)


def test_diameter_fit_holds_out_upper_k() -> None:
    fit = diameter_bounds_check(_model_report(), 0.2)
    assert fit.fitted == 9
    assert fit.held_out == 3
    assert fit.c_upper == pytest.approx(2.0, rel=1e-12)
    assert 0 < fit.c_lower < math.inf
    assert fit.shear > 0
    assert fit.violations == 0


def test_diameter_fit_flags_held_out_outlier() -> None:
    report = _model_report()
    held = next(r for r in report.rows if (r.k, r.n) == (2, 4))
    held.diam_v *= 100
    assert diameter_bounds_check(report, 0.2).violations == 1


def test_diameter_fit_b1_dominance() -> None:
    fit = diameter_bounds_check(_model_report(), 0.2)
    # only k=0, n=5 has the b1 term ten times the sigma term
    assert fit.dominated == 1
    assert fit.dominance_spread == pytest.approx(1.0)
    assert fit.dominance_ok


def test_ratio_trend_follows_sigma() -> None:
    report = GeometryReport(rows=[_row(k, k + 1, 1.0, ratio=0.3 * 0.4**k) for k in range(2, 6)], sigma=-0.4)
    trend = ratio_trend(report)
    assert trend.ks == [2, 3, 4, 5]
    assert trend.monotone
    assert trend.slope == pytest.approx(math.log(0.4), rel=1e-10)
    assert trend.consistent


def test_ratio_trend_rejects_non_monotone() -> None:
    ratios = [0.1, 0.05, 0.2, 0.01]
    report = GeometryReport(rows=[_row(k, k + 1, 1.0, ratio=r) for k, r in enumerate(ratios)], sigma=-0.4)
    trend = ratio_trend(report)
    assert not trend.monotone
    assert not trend.consistent


def test_tune_overlap_bisects_to_the_overlapping_side() -> None:
    tuned = tune_overlap(lambda t: t - 0.3, 0.0, 1.0, tol=1e-8)
    assert tuned.param == pytest.approx(0.3, abs=1e-7)
    assert tuned.width > 0
    assert tuned.iterations > 0


def test_tune_overlap_needs_a_sign_change() -> None:
    with pytest.raises(HypothesisError):
        tune_overlap(lambda t: t + 1.0, 0.0, 1.0)
