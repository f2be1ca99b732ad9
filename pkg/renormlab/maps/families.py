"""Seed maps built from run configuration: the four families and the fault-injection term."""
from __future__ import annotations

import logging
from functools import lru_cache
from typing import Callable, Optional

from renormlab.api.schemas import MapParams, RunConfig
from renormlab.maps.fields import Box3, ScalarField1, ScalarField3
from renormlab.maps.hmap3 import HenonMap3, make_example_N
from renormlab.maps.unimodal import FixedPointResult, UnimodalMap, solve_fixed_point
from renormlab.renorm.tuning import TuneReport, tune_seed

logger = logging.getLogger(__name__)


@lru_cache(maxsize=8)
def fixed_point(degree: int) -> FixedPointResult:
    return solve_fixed_point(degree)


def eps_field(p: MapParams) -> ScalarField3:
    """eps from its kind: a y, a y (1 + kappa x), or explicit polynomial terms."""
    a = p.eps_amplitude
    if p.eps_kind == "zero":
        return ScalarField3.zero()
    if p.eps_kind == "y":
        return ScalarField3.polynomial({(0, 1, 0): a}, name=f"{a:g}*y")
    if p.eps_kind == "y-xy":
        return ScalarField3.polynomial({(0, 1, 0): a, (1, 1, 0): a * p.eps_kappa}, name=f"{a:g}*y*(1+{p.eps_kappa:g}*x)")
    return ScalarField3.polynomial(p.terms("eps"), name="eps")


def eta_field(p: MapParams) -> ScalarField1:
    if p.eta_kind == "sin":
        return ScalarField1.sine(p.eta_amplitude)
    return ScalarField1(kind="poly", coeffs=tuple(p.eta_coeffs) or (0.0,))


def _with_fault(F: HenonMap3, p: MapParams) -> HenonMap3:
    terms = p.terms("delta")
    if not terms:
        return F
    extra = ScalarField3.polynomial(terms, name="injected")
    logger.warning("adding %s to delta of %s", terms, F.name)
    return HenonMap3(f=F.f, eps=F.eps, delta=F.delta + extra, box=F.box, name=F.name)


def _builder(family: str, p: MapParams) -> Callable[[UnimodalMap], HenonMap3]:
    if family == "degenerate":
        return lambda f: HenonMap3(f=f, eps=ScalarField3.zero(), delta=ScalarField3.zero(), box=Box3.default(), name="degenerate")
    if family == "trivial-extension":
        delta = ScalarField3.linear_z(p.b)
        return lambda f: HenonMap3(f=f, eps=eps_field(p), delta=delta, box=Box3.default(), name="trivial-extension")
    if family == "example-N":
        eps = eps_field(p)
        return lambda f: make_example_N(eta_field(p), p.C, f, None if eps.is_zero else eps, budget=p.eps_budget)
    if family == "custom-polynomial":
        delta = ScalarField3.polynomial(p.terms("delta"), name="delta")
        return lambda f: HenonMap3(f=f, eps=eps_field(p), delta=delta, box=Box3.for_delta(delta), name="custom-polynomial")
    raise ValueError(f"Unknown family: {family}")


def build_seed(cfg: RunConfig) -> tuple[HenonMap3, Optional[TuneReport]]:
    """F_0 for the configured family, tuned along the unstable direction when requested."""
    p = cfg.params
    fstar = fixed_point(p.degree).fstar
    base = UnimodalMap(tuple(p.f_coeffs)) if p.f_coeffs else fstar
    build = _builder(cfg.family, p)
    report = None
    if p.tune and cfg.depth > 0:
        F, report = tune_seed(build, base, fstar, cfg.depth)
        logger.info("tuned %s seed: shift %.3e after %d cascades", cfg.family, report.shift, report.evaluations)
    else:
        F = build(base)
    if cfg.family != "custom-polynomial":
        F = _with_fault(F, p)
    F.check_invariant_box()
    return F, report
