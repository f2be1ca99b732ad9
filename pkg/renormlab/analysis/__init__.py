# Analysis of renormalization cascades: pieces, tips, universal numbers, frames, geometry
"""Registry of verification checks run by `renorm-lab verify`."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from renormlab import config
from renormlab.analysis.cantor import TipData, boxing_check, compute_tips
from renormlab.analysis.tipframe import (
    Frames,
    all_frames,
    check_cocycle,
    check_dut_recursions,
    check_R_recursion,
    check_z_difference,
    reassembly_error,
)
from renormlab.analysis.universal import (
    a_spread,
    check_class_n,
    check_conjugacy,
    check_ddelta_recursion,
    check_dx_delta_sum,
    check_dy_delta_relation,
    check_jac_recursion,
    check_psi_identities,
    estimate_b2,
)
from renormlab.api.schemas import Tolerances
from renormlab.renorm.cascade import RenormCascade

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = Tolerances().model_dump()


@dataclass
class CheckContext:
    cascade: RenormCascade
    points: int = 50
    seed: int = config.SEED
    lattice: int = 4
    thresholds: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    workers: Optional[int] = None
    _tips: Optional[TipData] = None
    _frames: Optional[Frames] = None

    @property
    def tips(self) -> TipData:
        if self._tips is None:
            self._tips = compute_tips(self.cascade)
        return self._tips

    @property
    def frames(self) -> Frames:
        if self._frames is None:
            self._frames = all_frames(self.cascade, self.tips, self.workers)
        return self._frames

    def skipped(self, check: str, label: str) -> dict[str, Any]:
        return {"check": check, "label": label, "value": None, "threshold": None, "status": "n/a"}

    def result(self, check: str, label: str, value: float, threshold_key: Optional[str] = None) -> dict[str, Any]:
        threshold = self.thresholds[threshold_key or check]
        value = float(value)
        passed = bool(np.isfinite(value) and value <= threshold)
        return {"check": check, "label": label, "value": value, "threshold": threshold, "status": "ok" if passed else "fail"}


def _class_n(ctx: CheckContext) -> list[dict]:
    res = check_class_n(ctx.cascade, ctx.points, ctx.seed)
    return [ctx.result("class_n", f"k={k}", v) for k, v in enumerate(res)]


def _ddelta(ctx: CheckContext) -> list[dict]:
    """Delta derivative recursion, plus the vanishing bracket on levels that are in class N."""
    c = ctx.cascade
    top = min(c.depth, 3)
    members = [v <= ctx.thresholds["class_n"] for v in check_class_n(c, ctx.points, ctx.seed)[:top]]
    out = []
    for k in range(1, top + 1):
        r = check_ddelta_recursion(c, k, 2 * ctx.points, ctx.seed)
        out.append(ctx.result("ddelta", f"k={k}", r.worst))
        if members[k - 1]:
            out.append(ctx.result("ddelta", f"bracket k={k}", r.bracket, "ddelta_bracket"))
    return out


def _jac(ctx: CheckContext) -> list[dict]:
    c = ctx.cascade
    return [ctx.result("jac", f"n={n}", check_jac_recursion(c, n, 2 * ctx.points, ctx.seed)) for n in range(1, min(c.depth, 3) + 1)]


def _dx_sum(ctx: CheckContext) -> list[dict]:
    c = ctx.cascade
    return [ctx.result("dx_sum", f"k=0 n={n}", check_dx_delta_sum(c, 0, n, ctx.points, ctx.seed).residual) for n in range(1, c.depth + 1)]


def _dy(ctx: CheckContext) -> list[dict]:
    c = ctx.cascade
    rels = [check_dy_delta_relation(c, 0, n, ctx.points, ctx.seed) for n in range(1, c.depth + 1)]
    out = [ctx.result("dy", f"k=0 n={r.n}", r.residual) for r in rels]
    # the deepest relation carries the bracket sequence over every n
    rel = rels[-1]
    if np.isnan(rel.rate_ratio):
        out.append(ctx.skipped("dy", "bracket rate"))
    else:
        out.append(ctx.result("dy", "bracket rate", rel.rate_ratio, "dy_rate"))
    return out


def _conjugacy(ctx: CheckContext) -> list[dict]:
    c = ctx.cascade
    out = []
    for n in range(1, c.depth + 1):
        out.append(ctx.result("conjugacy", f"n={n}", check_conjugacy(c, n, ctx.points, ctx.seed)))
        out.append(ctx.result("psi_identities", f"n={n}", check_psi_identities(c, n, ctx.points, ctx.seed)))
    return out


def _frames(ctx: CheckContext) -> list[dict]:
    frames = ctx.frames
    out = [ctx.result("cocycle", "all", check_cocycle(frames))]
    for row in check_dut_recursions(frames):
        worst = max(row.d, row.u, row.t, row.t_minus_ud)
        out.append(ctx.result("dut", f"k={row.k} n={row.n}", worst))
    worst = max((reassembly_error(fr) for fr in frames.values()), default=0.0)
    out.append(ctx.result("reassembly", "all", worst))
    return out


def _r_recursion(ctx: CheckContext) -> list[dict]:
    """Recursion of R per k, and its decay rate against log|sigma| where enough levels are resolved."""
    c = ctx.cascade
    out = []
    for k in range(c.depth):
        decay = check_R_recursion(c, ctx.frames, k)
        out.append(ctx.result("R", f"k={k}", decay.recursion_residual))
        if np.isnan(decay.rate_ratio):
            out.append(ctx.skipped("R", f"rate k={k}"))
        else:
            out.append(ctx.result("R", f"rate k={k}", decay.rate_ratio, "R_rate"))
    return out


def _a_spread(ctx: CheckContext) -> list[dict]:
    c = ctx.cascade
    if c.depth < 3:
        return [ctx.skipped("a_spread", f"n={c.depth - 1}")]
    xs = np.linspace(-0.9, 0.9, 7)
    return [ctx.result("a_spread", f"n={c.depth - 1}", a_spread(c, xs, c.depth - 1))]


def _z_difference(ctx: CheckContext) -> list[dict]:
    c = ctx.cascade
    out = []
    for n in range(1, c.depth + 1):
        z = check_z_difference(c, ctx.frames, 0, n, ctx.points, ctx.seed)
        out.append(ctx.result("z_difference", f"k=0 n={n}", max(z.difference, z.corollary)))
    return out


def _boxing(ctx: CheckContext) -> list[dict]:
    c = ctx.cascade
    out = []
    for n in range(1, min(c.depth, 5) + 1):
        r = boxing_check(c, n, ctx.lattice)
        value = max(r.nesting_violation, r.dynamics_violation) if r.disjoint else float("inf")
        out.append(ctx.result("boxing", f"n={n}", value))
    return out


def _product(ctx: CheckContext) -> list[dict]:
    c = ctx.cascade
    est = estimate_b2(c, min(c.depth, 5))
    return [ctx.result("product", f"n={n}", err) for n, err in enumerate(est.product_errors)]


@dataclass(frozen=True)
class Check:
    run: Callable[[CheckContext], list[dict]]
    requires_diffeo: bool = False


CHECKS: dict[str, Check] = {
    "class_n": Check(_class_n),
    "ddelta": Check(_ddelta),
    "jac": Check(_jac, requires_diffeo=True),
    "dx_sum": Check(_dx_sum),
    "dy": Check(_dy, requires_diffeo=True),
    "conjugacy": Check(_conjugacy),
    "frames": Check(_frames),
    "R": Check(_r_recursion),
    "z_difference": Check(_z_difference),
    "boxing": Check(_boxing),
    "product": Check(_product, requires_diffeo=True),
    "a_spread": Check(_a_spread, requires_diffeo=True),
}


def run_check(name: str, ctx: CheckContext) -> list[dict]:
    """Run the named check. Degenerate cascades skip diffeomorphism checks with status "n/a"."""
    check = CHECKS.get(name)
    if not check:
        raise ValueError(f"Unknown check: {name}")
    if check.requires_diffeo and ctx.cascade.degenerate:
        logger.warning("check %s skipped: map is not a diffeomorphism", name)
        return [ctx.skipped(name, "all")]
    results = check.run(ctx)
    failed = [r for r in results if r["status"] == "fail"]
    if failed:
        logger.warning("check %s: %d of %d rows above threshold", name, len(failed), len(results))
    return results
