"""Shared maps and cascades, built once per test session."""
from __future__ import annotations

import pytest

from renormlab.api.schemas import MapParams, RunConfig
from renormlab.maps.families import build_seed, fixed_point
from renormlab.renorm.cascade import RenormCascade, cascade


@pytest.fixture(scope="session")
def fstar():
    return fixed_point(14)


@pytest.fixture(scope="session")
def example_config() -> RunConfig:
    return RunConfig(family="example-N", depth=3, params=MapParams(C=0.02, eta_amplitude=0.1), workers=1)


@pytest.fixture(scope="session")
def example_cascade(example_config) -> RenormCascade:
    F, _ = build_seed(example_config)
    return cascade(F, example_config.depth)


@pytest.fixture(scope="session")
def trivial_config() -> RunConfig:
    params = MapParams(b=0.1, eps_kind="y-xy", eps_amplitude=0.01, eps_kappa=0.5, tune=True)
    return RunConfig(family="trivial-extension", depth=3, params=params, workers=1)


@pytest.fixture(scope="session")
def trivial_cascade(trivial_config) -> RenormCascade:
    F, _ = build_seed(trivial_config)
    return cascade(F, trivial_config.depth)


@pytest.fixture(scope="session")
def degenerate_cascade() -> RenormCascade:
    F, _ = build_seed(RunConfig(family="degenerate", depth=2, workers=1))
    return cascade(F, 2)


@pytest.fixture(scope="session")
def sheared_cascade() -> RenormCascade:
    """Outside class N: delta picks up a small y-shear, so R decays at the sigma rate."""
    params = MapParams(delta_terms={"0,0,1": 0.1, "0,1,0": 1e-3})
    cfg = RunConfig(family="custom-polynomial", depth=3, params=params, workers=1)
    F, _ = build_seed(cfg)
    return cascade(F, cfg.depth)
