"""Seed tuning along the unstable direction of renormalization."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from renormlab import config
from renormlab.errors import CascadeError, RenormLabError
from renormlab.maps.hmap3 import HenonMap3
from renormlab.maps.unimodal import UnimodalMap
from renormlab.renorm.cascade import RenormCascade, cascade

logger = logging.getLogger(__name__)

SeedBuilder = Callable[[UnimodalMap], HenonMap3]


@dataclass
class TuneReport:
    shift: float
    evaluations: int
    mismatch: float
    slopes: list[float] = field(default_factory=list)

    @property
    def delta_estimates(self) -> list[float]:
        """Ratios of successive secant slopes; these approach the unstable eigenvalue."""
        return [b / a for a, b in zip(self.slopes, self.slopes[1:]) if a]


def _c1(f: UnimodalMap) -> float:
    return f.coeffs[1] if len(f.coeffs) > 1 else 0.0


def tune_seed(build: SeedBuilder, base: UnimodalMap, target: UnimodalMap, depth: int) -> tuple[HenonMap3, TuneReport]:
    """Find t so that f_depth of the cascade seeded by build(base + t x^2) matches target's x^2 coefficient.

    A secant search is run at depth 1, 2, ... in turn, each started from the previous
    solution; a failed trial cascade halves the step.
    """
    goal = _c1(target)
    t = 0.0
    h = 1e-6
    evals = 0
    slopes: list[float] = []
    mismatch = float("nan")

    def mismatch_at(shift: float, n: int) -> float:
        nonlocal evals
        evals += 1
        c = cascade(build(base.with_quadratic_shift(shift)), n)
        return _c1(c.levels[n].f) - goal

    for n in range(1, depth + 1):
        g0 = mismatch_at(t, n)
        slope = None
        for it in range(config.TUNE_MAX_ITERS):
            if abs(g0) <= 1e-12:
                break
            try:
                g1 = mismatch_at(t + h, n)
            except (CascadeError, RenormLabError, ValueError) as e:
                logger.debug("tuning trial failed at depth %d (%s); halving step", n, e)
                h *= 0.5
                continue
            slope = (g1 - g0) / h
            if slope == 0.0:
                break
            step = -g0 / slope
            while True:
                try:
                    g_new = mismatch_at(t + step, n)
                    break
                except (CascadeError, RenormLabError, ValueError):
                    step *= 0.5
                    if abs(step) < 1e-16:
                        raise
            t += step
            g0 = g_new
            h = max(abs(step), 1e-9)
        if slope is not None:
            slopes.append(slope)
        mismatch = g0
        logger.info("tuning depth %d: shift=%.15g mismatch=%.3e", n, t, g0)
    report = TuneReport(shift=t, evaluations=evals, mismatch=float(mismatch), slopes=slopes)
    return build(base.with_quadratic_shift(t)), report


def drift(c: RenormCascade, target: UnimodalMap) -> list[float]:
    """sup |f_k - target| on a grid for every level."""
    grid = np.linspace(-1.0, 1.0, config.CHECK_GRID)
    ref = target.raw(grid)
    return [float(np.max(np.abs(F.f.raw(grid) - ref))) for F in c.levels]
