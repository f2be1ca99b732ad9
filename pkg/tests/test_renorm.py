from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from renormlab.analysis.universal import check_class_n, check_conjugacy, check_psi_identities
from renormlab.cli import load_config
from renormlab.errors import CascadeError
from renormlab.maps.families import build_seed
from renormlab.maps.fields import Box3, ScalarField3
from renormlab.maps.hmap3 import HenonMap3
from renormlab.maps.unimodal import UnimodalMap
from renormlab.jets import Point3
from renormlab.renorm.cascade import WordMap, cascade, psi_word
from renormlab.renorm.operator import hmap, prerenormalize, renormalize
from renormlab.renorm.tuning import drift
from renormlab.words import Word


def test_degenerate_cascade_stays_at_fixed_point(degenerate_cascade, fstar) -> None:
    grid = np.linspace(-1.0, 1.0, 101)
    for F in degenerate_cascade.levels:
        assert np.max(np.abs(F.f.raw(grid) - fstar.fstar.raw(grid))) <= 1e-7
    np.testing.assert_allclose(degenerate_cascade.sigmas, fstar.sigma, atol=1e-7)


def test_renormalized_map_keeps_henon_form(example_cascade) -> None:
    RF = example_cascade.levels[1]
    w = RF.box.sample(np.random.default_rng(0), 30, shrink=0.5)
    out = RF.evaluate(w)
    np.testing.assert_array_equal(out[:, 1], w[:, 0])
    assert example_cascade.fit_residuals[1] <= 1e-6


def test_renormalize_returns_sigma(fstar) -> None:
    F = HenonMap3(f=fstar.fstar, eps=ScalarField3.zero(), delta=ScalarField3.linear_z(0.1), box=Box3.default())
    RF, s = renormalize(F)
    assert s == pytest.approx(fstar.sigma)
    # delta = b z renormalizes to b^2 z
    w = np.array([[0.1, 0.2, 0.01]])
    assert RF.evaluate_jac(w)[1][0, 2, 2] == pytest.approx(0.01, rel=1e-9)


def test_straightening_inverts(example_cascade) -> None:
    link = hmap(example_cascade.levels[0])
    v = np.array([[0.1, -0.1, 0.0], [0.3, 0.05, 0.01]]) * abs(link.sigma)
    np.testing.assert_allclose(link.h(link.h_inverse(v)), v, atol=1e-11)


def test_psi_jacobian_matches_finite_differences(example_cascade) -> None:
    w = np.array([[0.2, -0.3, 0.01]])
    for letter in (0, 1):
        _, J = example_cascade.psi(1, letter, w, np.eye(3)[None])
        h = 1e-5
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = h
            fd = (example_cascade.psi(1, letter, w + e)[0] - example_cascade.psi(1, letter, w - e)[0]) / (2 * h)
            np.testing.assert_allclose(J[0, :, axis], fd[0], atol=1e-6)


def test_batched_words_match_single_words(example_cascade) -> None:
    w = example_cascade.box.sample(np.random.default_rng(1), 5, shrink=0.5)
    vals, J = example_cascade.psi_words(0, 2, w, jac=True)
    for word in Word.all(2):
        single, Js = example_cascade.psi_word_eval(0, word, w, jac=True)
        np.testing.assert_allclose(vals[word.index], single, atol=1e-10)
        np.testing.assert_allclose(J[word.index], Js, atol=1e-8)


def test_word_map_apply(example_cascade) -> None:
    psi = WordMap(example_cascade, 0, Word.parse("vc"))
    p = Point3.seed([[0.1, 0.1, 0.0]])
    out = psi.apply(p)
    np.testing.assert_allclose(out.values(), psi.evaluate(p.values()))
    w = np.array([[0.2, -0.1, 0.0]])
    np.testing.assert_allclose(psi_word(example_cascade, 0, Word.parse("vc")).evaluate(w), example_cascade.psi_word_eval(0, Word.parse("vc"), w)[0])


def test_prerenormalization_rescales_to_next_level(example_cascade) -> None:
    F = example_cascade.levels[0]
    s = example_cascade.sigmas[0]
    w = np.array([[0.3, 0.2, 0.0], [-0.5, 0.1, 0.01]])
    prf = prerenormalize(F).apply(Point3.seed(s * w)).values() / s
    np.testing.assert_allclose(prf, example_cascade.levels[1].evaluate(w), atol=1e-9)


def test_class_n_invariance(example_cascade) -> None:
    assert max(check_class_n(example_cascade)) <= 1e-8


def test_coordinate_change_identities(example_cascade) -> None:
    for n in (1, 2):
        assert check_psi_identities(example_cascade, n) <= 1e-8
        assert check_conjugacy(example_cascade, n) <= 1e-7


def test_depth_bounds(fstar) -> None:
    F = HenonMap3(f=fstar.fstar, eps=ScalarField3.zero(), delta=ScalarField3.zero(), box=Box3.default())
    with pytest.raises(ValueError):
        cascade(F, 99)


def test_cascade_error_names_level() -> None:
    F = HenonMap3(f=UnimodalMap.quadratic(0.5), eps=ScalarField3.zero(), delta=ScalarField3.zero(), box=Box3.default())
    with pytest.raises(CascadeError) as info:
        cascade(F, 2)
    assert info.value.level == 0


def test_tuned_seed_tracks_fixed_point(trivial_cascade, fstar) -> None:
    assert drift(trivial_cascade, fstar.fstar)[-1] <= 1e-3


def test_straightening_inverts_on_every_level(example_cascade) -> None:
    for link in example_cascade.links:
        v = np.array([[0.1, -0.1, 0.0], [0.3, 0.05, 0.01], [-0.4, 0.9, -0.01]]) * abs(link.sigma)
        sol = link.invert(v, link.shear(v[:, 1], slope=False)[0])
        assert sol.iterations <= link.max_iters
        np.testing.assert_allclose(link.h(sol.u), v, atol=1e-11)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["example-n.toml", "trivial-extension.toml"])
def test_shipped_configs_reach_their_depth(name: str) -> None:
    cfg = load_config(Path(__file__).resolve().parent.parent / "configs" / name)
    F, _ = build_seed(cfg)
    c = cascade(F, cfg.depth)
    assert c.depth == cfg.depth == 5
    assert max(check_class_n(c)) <= 1e-8
    assert max(c.fit_residuals) <= 1e-6
