from __future__ import annotations

import math

import numpy as np
import pytest

from renormlab.analysis.universal import (
    a_spread,
    check_ddelta_recursion,
    check_dx_delta_sum,
    check_dy_delta_relation,
    check_jac_recursion,
    estimate_b1,
    estimate_b2,
    fit_rate,
    log_slope,
    rate_ratio,
    rel_error,
    universal_a,
    universal_numbers,
)
from renormlab.errors import DegenerateMapError


def test_rel_error_scales_by_terms() -> None:
    assert rel_error(np.array([1.0]), np.array([1.0 + 1e-9]), np.array([100.0])) == pytest.approx(1e-11)
    assert rel_error(np.zeros(3), np.zeros(3)) == 0.0


def test_fit_rate_of_geometric_sequence() -> None:
    values = [1.0 - 0.5**n for n in range(8)]
    assert fit_rate(values) == pytest.approx(0.5, rel=1e-9)
    assert math.isnan(fit_rate([2.0, 2.0, 2.0]))


def test_log_slope_skips_exact_zeros() -> None:
    brackets = [8.9e-4, 3.6e-6, 1.4e-10, 0.0]
    expected = np.polyfit([1.0, 2.0, 3.0], np.log(brackets[:3]), 1)[0]
    assert log_slope(brackets) == pytest.approx(expected, rel=1e-9)
    assert log_slope(brackets, floor=1e-9) == pytest.approx(np.log(3.6e-6 / 8.9e-4), rel=1e-12)
    assert math.isnan(log_slope([1e-3, 0.0, 0.0]))


def test_rate_ratio_is_one_sided() -> None:
    assert rate_ratio(-0.9, -0.9) == pytest.approx(1.0)
    assert rate_ratio(-9.0, -0.9) == pytest.approx(0.1)
    assert rate_ratio(0.0, -0.9) == math.inf
    assert math.isnan(rate_ratio(float("nan"), -0.9))

@pytest.mark.parametrize("k", [1, 2, 3])
def test_ddelta_recursion(example_cascade, k: int) -> None:
    assert check_ddelta_recursion(example_cascade, k).worst <= 1e-7


@pytest.mark.parametrize("n", [1, 2, 3])
def test_jacobian_recursion(trivial_cascade, n: int) -> None:
    assert check_jac_recursion(trivial_cascade, n) <= 1e-7


def test_dx_delta_sum(example_cascade) -> None:
    res = check_dx_delta_sum(example_cascade, 0, 3)
    assert res.residual <= 1e-7
    assert len(res.partial_sums) == example_cascade.depth


def test_dy_delta_relation(example_cascade) -> None:
    res = check_dy_delta_relation(example_cascade, 0, 3)
    assert res.residual <= 1e-7
    assert len(res.brackets) == 3


def test_dy_relation_needs_a_diffeomorphism(degenerate_cascade) -> None:
    with pytest.raises(DegenerateMapError):
        check_dy_delta_relation(degenerate_cascade, 0, 1)


def test_b2_of_trivial_extension(trivial_cascade) -> None:
    est = estimate_b2(trivial_cascade, 3)
    np.testing.assert_allclose(est.averaged, 0.1, atol=1e-12)
    np.testing.assert_allclose(est.pointwise, 0.1, atol=1e-12)
    assert max(est.product_errors) <= 1e-7
    # log d_z delta is constant, so there is no rate to fit
    assert math.isnan(est.rho_fit)


def test_b1_times_b2_is_bF(trivial_cascade) -> None:
    b1 = estimate_b1(trivial_cascade, 3)
    assert b1.b1 * b1.b2 == pytest.approx(b1.bF, rel=1e-12)
    assert 0.0 < b1.b1 < 1.0


def test_universal_numbers_report(trivial_cascade) -> None:
    nums, b2, b1 = universal_numbers(trivial_cascade, 3)
    assert nums.b2 == pytest.approx(0.1, abs=1e-12)
    assert len(nums.a_samples) == 7
    assert all(a > 0 and math.isfinite(a) for _, a in nums.a_samples)
    assert b1.expression_logs and len(b2.averaged) == 4


def test_universal_a_requires_depth(trivial_cascade) -> None:
    with pytest.raises(ValueError):
        universal_a(trivial_cascade, 0.0, 1)


@pytest.mark.slow
def test_b2_stays_exact_on_deep_cascade(trivial_config) -> None:
    from renormlab.maps.families import build_seed
    from renormlab.renorm.cascade import cascade

    F, _ = build_seed(trivial_config)
    est = estimate_b2(cascade(F, 5), 5)
    np.testing.assert_allclose(est.averaged, 0.1, atol=1e-12)
    np.testing.assert_allclose(est.pointwise, 0.1, atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_ddelta_bracket_vanishes_in_class_n(example_cascade, k: int) -> None:
    assert check_ddelta_recursion(example_cascade, k).bracket <= 1e-10


def test_ddelta_bracket_off_class_n(sheared_cascade) -> None:
    r = check_ddelta_recursion(sheared_cascade, 1)
    assert r.worst <= 1e-7
    # delta_y = 1e-3 with delta_x = 0 on the seed
    assert r.bracket == pytest.approx(1e-3, rel=1e-9)


def test_dy_bracket_decays_at_least_at_sigma_rate(example_cascade) -> None:
    res = check_dy_delta_relation(example_cascade, 0, 3)
    assert np.isfinite(res.slope)
    assert res.rate_ratio <= 1 / 0.7


def test_universal_a_agrees_across_levels(trivial_cascade) -> None:
    nums, _, _ = universal_numbers(trivial_cascade, 3)
    xs = np.linspace(-0.9, 0.9, 7)
    assert nums.a_spread == pytest.approx(a_spread(trivial_cascade, xs, 2, log_bF=math.log(nums.bF)), rel=1e-12)
    assert nums.a_spread <= 0.25
    with pytest.raises(ValueError):
        a_spread(trivial_cascade, xs, 3)
