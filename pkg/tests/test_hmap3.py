from __future__ import annotations

import numpy as np
import pytest

from renormlab.api.schemas import MapParams, RunConfig
from renormlab.errors import BudgetError, DomainError
from renormlab.maps.families import build_seed
from renormlab.maps.fields import Box3, ScalarField1, ScalarField2, ScalarField3
from renormlab.maps.hmap3 import HenonMap3, class_n_residual, conjugate, eval_map, jacobian, make_example_N


def _trivial(fstar, a: float = 0.01, kappa: float = 0.5, b: float = 0.1) -> HenonMap3:
    eps = ScalarField3.polynomial({(0, 1, 0): a, (1, 1, 0): a * kappa})
    return HenonMap3(f=fstar.fstar, eps=eps, delta=ScalarField3.linear_z(b), box=Box3.default())


def test_box_lattice_and_sampling() -> None:
    box = Box3.default(0.1)
    pts = box.lattice(3)
    assert pts.shape == (27, 3)
    assert box.contains(pts).all()
    rng = np.random.default_rng(0)
    assert box.contains(box.sample(rng, 50, shrink=0.5)).all()
    with pytest.raises(ValueError):
        Box3.default(0.0)


def test_henon_form(fstar) -> None:
    F = _trivial(fstar)
    w = np.array([[0.3, -0.2, 0.01], [-0.7, 0.5, -0.02]])
    out = eval_map(F, w)
    np.testing.assert_allclose(out[:, 1], w[:, 0])
    np.testing.assert_allclose(out[:, 2], 0.1 * w[:, 2])
    expected_x = fstar.fstar.raw(w[:, 0]) - 0.01 * w[:, 1] * (1 + 0.5 * w[:, 0])
    np.testing.assert_allclose(out[:, 0], expected_x)


def test_trivial_extension_determinant(fstar) -> None:
    F = _trivial(fstar)
    w = Box3.default().lattice(4)
    _, det = jacobian(F, w)
    np.testing.assert_allclose(det, 0.01 * 0.1 * (1 + 0.5 * w[:, 0]), rtol=1e-13)
    assert np.max(np.abs(class_n_residual(F, w, check_domain=False))) == 0.0


def test_domain_checked(fstar) -> None:
    with pytest.raises(DomainError):
        eval_map(_trivial(fstar), [1.5, 0.0, 0.0])


def test_example_n_is_class_n(fstar) -> None:
    F = make_example_N(ScalarField1.sine(0.1), 0.02, fstar.fstar)
    w = F.box.sample(np.random.default_rng(1), 200)
    assert np.max(np.abs(class_n_residual(F, w, check_domain=False))) <= 1e-12
    assert not F.is_degenerate


def test_example_n_budget(fstar) -> None:
    with pytest.raises(BudgetError):
        make_example_N(ScalarField1.sine(0.1), 0.2, fstar.fstar)


def test_jets_match_finite_differences(fstar) -> None:
    F = make_example_N(ScalarField1.sine(0.1), 0.02, fstar.fstar)
    w = np.array([[0.2, -0.4, 0.01]])
    _, J = F.evaluate_jac(w)
    h = 1e-6
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        fd = (F.evaluate(w + e) - F.evaluate(w - e)) / (2 * h)
        np.testing.assert_allclose(J[0, :, axis], fd[0], atol=1e-8)


def test_conjugation_preserves_class_n(fstar) -> None:
    F = make_example_N(ScalarField1.sine(0.1), 0.02, fstar.fstar)
    G = conjugate(F, ScalarField2({(0, 1): 1.0, (1, 1): 0.2, (0, 2): 0.5}))
    w = G.box.sample(np.random.default_rng(2), 100, shrink=0.8)
    res = class_n_residual(G, w, check_domain=False)
    assert np.max(np.abs(res)) <= 1e-9
    np.testing.assert_allclose(G.evaluate(w)[:, 1], w[:, 0])


def test_identity_conjugation_changes_nothing(fstar) -> None:
    F = make_example_N(ScalarField1.sine(0.1), 0.02, fstar.fstar)
    G = conjugate(F, ScalarField2.identity())
    w = F.box.sample(np.random.default_rng(3), 20, shrink=0.5)
    np.testing.assert_allclose(G.evaluate(w), F.evaluate(w), atol=1e-14)


def test_families_build_seeds() -> None:
    F, report = build_seed(RunConfig(family="degenerate", depth=2))
    assert F.is_degenerate and report is None
    F, _ = build_seed(RunConfig(family="custom-polynomial", depth=1, params=MapParams(delta_terms={"0,0,1": 0.05, "1,0,0": 0.01})))
    w = np.array([[0.5, 0.1, 0.02]])
    assert F.evaluate(w)[0, 2] == pytest.approx(0.05 * 0.02 + 0.01 * 0.5)


def test_fault_injection_breaks_class_n() -> None:
    cfg = RunConfig(family="example-N", depth=1, params=MapParams(delta_terms={"1,1,0": 1e-3}))
    F, _ = build_seed(cfg)
    w = F.box.sample(np.random.default_rng(4), 50, shrink=0.5)
    assert np.max(np.abs(class_n_residual(F, w, check_domain=False))) > 1e-6


def test_conjugation_transports_class_n_residual(fstar) -> None:
    delta = ScalarField3.polynomial({(0, 0, 1): 0.1, (0, 1, 0): 0.02, (1, 1, 0): 0.01})
    F = HenonMap3(f=fstar.fstar, eps=ScalarField3.zero(), delta=delta, box=Box3.for_delta(delta))
    phi = ScalarField2({(0, 1): 1.0, (2, 0): 0.1})
    G = conjugate(F, phi)
    w = F.box.sample(np.random.default_rng(5), 100, shrink=0.5)
    lifted = np.stack([w[:, 0], w[:, 1], phi(w[:, 1], w[:, 2])], axis=1)
    twice = F.evaluate(F.evaluate(w))
    expected = phi.partial_z(twice[:, 1], twice[:, 2]) * class_n_residual(F, w, check_domain=False)
    assert np.min(np.abs(expected)) > 1e-3
    np.testing.assert_allclose(class_n_residual(G, lifted, check_domain=False), expected, rtol=1e-6)
