from __future__ import annotations

import numpy as np
import pytest

from renormlab.analysis.cantor import compute_tips
from renormlab.analysis.tipframe import (
    all_frames,
    check_cocycle,
    check_dut_recursions,
    check_R_recursion,
    check_z_difference,
    decompose,
    r_quadratic_fit,
    reassembly_error,
)
from renormlab.maps.families import build_seed
from renormlab.renorm.cascade import cascade


@pytest.fixture(scope="module")
def frames(example_cascade):
    return all_frames(example_cascade, compute_tips(example_cascade), workers=2)


def test_every_pair_is_decomposed(frames, example_cascade) -> None:
    N = example_cascade.depth
    assert sorted(frames) == [(k, n) for k in range(N) for n in range(k + 1, N + 1)]


def test_frame_matrix_structure(frames) -> None:
    for fr in frames.values():
        assert fr.structural <= 1e-8
        D = np.array([[fr.alpha, fr.t * fr.sigma_nk, fr.u * fr.sigma_nk], [0.0, fr.sigma_nk, 0.0], [0.0, fr.d * fr.sigma_nk, fr.sigma_nk]])
        np.testing.assert_allclose(fr.D[0], D[0], atol=1e-12)
        assert fr.R(np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-12)


def test_sigma_nk_is_product_of_single_steps(frames, example_cascade) -> None:
    fr = frames[(0, example_cascade.depth)]
    steps = np.prod([frames[(i, i + 1)].sigma_nk for i in range(example_cascade.depth)])
    assert fr.sigma_nk == pytest.approx(steps, rel=1e-8)


def test_cocycle(frames) -> None:
    assert check_cocycle(frames) <= 1e-8


def test_dut_recursions(frames) -> None:
    for row in check_dut_recursions(frames):
        assert row.d <= 1e-6
        assert row.u <= 1e-6
        assert row.t <= 1e-6
        assert row.t_minus_ud <= 1e-6


def test_reassembly_is_exact(frames) -> None:
    for fr in frames.values():
        assert reassembly_error(fr) <= 1e-9


def test_R_recursion(frames, example_cascade) -> None:
    decay = check_R_recursion(example_cascade, frames, 0)
    assert decay.recursion_residual <= 1e-9
    assert len(decay.norms) == example_cascade.depth
    assert len(decay.quadratic) == example_cascade.depth


def test_R_quadratic_fit(frames) -> None:
    assert np.isfinite(r_quadratic_fit(frames[(0, 1)]))


def test_z_difference(frames, example_cascade) -> None:
    z = check_z_difference(example_cascade, frames, 0, 2)
    assert z.difference <= 1e-7
    assert z.corollary <= 1e-7
    assert len(z.d_sequence) == example_cascade.depth


def test_decompose_rejects_bad_pairs(example_cascade) -> None:
    with pytest.raises(ValueError):
        decompose(example_cascade, None, 2, 2)


def test_R_decays_faster_than_sigma_in_class_n(frames, example_cascade) -> None:
    decay = check_R_recursion(example_cascade, frames, 0)
    assert decay.resolved[0]
    assert 0 < decay.rate_ratio <= 1.0


def test_R_decays_at_sigma_rate_off_class_n(sheared_cascade) -> None:
    frames = all_frames(sheared_cascade, workers=1)
    decay = check_R_recursion(sheared_cascade, frames, 0)
    assert all(decay.resolved)
    assert decay.recursion_residual <= 1e-9
    assert 1 / 3 <= decay.rate_ratio <= 3


def test_R_recursion_holds_for_every_k(frames, example_cascade) -> None:
    for k in range(example_cascade.depth):
        decay = check_R_recursion(example_cascade, frames, k)
        assert decay.recursion_residual <= 1e-9
        assert len(decay.resolved) == example_cascade.depth - k
    assert frames[(0, 1)].R_noise() > 0


@pytest.mark.slow
def test_R_recursion_on_deep_cascade(example_config) -> None:
    cfg = example_config.model_copy(update={"depth": 5})
    F, _ = build_seed(cfg)
    c = cascade(F, cfg.depth)
    frames = all_frames(c, workers=1)
    for k in range(c.depth):
        decay = check_R_recursion(c, frames, k)
        assert decay.recursion_residual <= 1e-9
        if np.isfinite(decay.rate_ratio):
            assert decay.rate_ratio <= 3
