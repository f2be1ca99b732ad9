"""Pipelines behind the CLI subcommands. Each returns (report, steps)."""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Optional

from renormlab import config
from renormlab.analysis import CHECKS, CheckContext, run_check
from renormlab.analysis.cantor import birkhoff_log_average, compute_tips, pieces, planar_average_jacobian
from renormlab.analysis.geometry import (
    diameter_bounds_check,
    fixed_point_sigma,
    geometry_scan,
    holder_bound,
    ratio_trend,
    scan_overlap,
    t_vs_b1,
    tune_overlap,
    unbounded_geometry_criterion,
)
from renormlab.analysis.tipframe import all_frames
from renormlab.analysis.universal import estimate_b1, universal_numbers
from renormlab.api import schemas
from renormlab.api.writers import write_csv, write_json
from renormlab.errors import DegenerateMapError, RenormLabError
from renormlab.maps.families import build_seed
from renormlab.maps.unimodal import solve_fixed_point
from renormlab.parallel import fan_out
from renormlab.renorm.cascade import RenormCascade, cascade

logger = logging.getLogger(__name__)

Steps = list[dict[str, Any]]

PIECE_COLUMNS = list(schemas.PieceRow.model_fields)
TIP_COLUMNS = list(schemas.TipRow.model_fields)
FRAME_COLUMNS = list(schemas.FrameRow.model_fields)
GEOMETRY_COLUMNS = list(schemas.GeometryRow.model_fields)


def _step(steps: Steps, module: str, prompt: dict, response: Any) -> None:
    steps.append(schemas.StepRecord(module=module, prompt=prompt, response=response).model_dump())


def _finite(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def run_fixedpoint(degree: int = config.FIXED_POINT_DEGREE, tol: float = config.FIXED_POINT_TOL) -> tuple[schemas.FixedPointReport, Steps]:
    steps: Steps = []
    res = solve_fixed_point(degree, tol)
    _step(steps, "unimodal", {"degree": degree, "tol": tol}, {"sigma": res.sigma, "iterations": res.iterations})
    report = schemas.FixedPointReport(
        degree=degree, tol=tol, coeffs=list(res.fstar.coeffs), sigma=res.sigma, residual=res.residual, iterations=res.iterations
    )
    return report, steps


def build_cascade(cfg: schemas.RunConfig, steps: Steps) -> tuple[RenormCascade, Optional[dict]]:
    F, tune = build_seed(cfg)
    tune_info = None
    if tune is not None:
        tune_info = {"shift": tune.shift, "evaluations": tune.evaluations, "mismatch": tune.mismatch, "delta_estimates": tune.delta_estimates}
    _step(steps, "families", {"family": cfg.family, "params": cfg.params.model_dump()}, {"name": F.name, "tune": tune_info})
    c = cascade(F, cfg.depth)
    _step(steps, "renorm", {"depth": cfg.depth}, {"sigmas": c.sigmas, "degenerate": c.degenerate})
    return c, tune_info


def run_cascade(cfg: schemas.RunConfig, out: Optional[Path] = None) -> tuple[schemas.CascadeReport, Steps]:
    """Cascade levels, plus pieces.csv and tips.csv when an output directory is given."""
    steps: Steps = []
    c, tune_info = build_cascade(cfg, steps)
    report = schemas.CascadeReport(
        family=cfg.family, depth=cfg.depth, seed=cfg.seed, levels=[schemas.LevelRow(**row) for row in c.summary()], tune=tune_info
    )
    if out is not None:
        write_json(out / "cascade.json", report)
        rows = [p.to_row() for n in range(c.depth + 1) for p in pieces(c, n, cfg.lattice)]
        write_csv(out / "pieces.csv", rows, PIECE_COLUMNS)
        write_csv(out / "tips.csv", compute_tips(c).rows(), TIP_COLUMNS)
        _step(steps, "cantor", {"lattice": cfg.lattice}, {"pieces": len(rows)})
    return report, steps


def _safe_check(name: str, ctx: CheckContext) -> list[dict]:
    try:
        return run_check(name, ctx)
    except RenormLabError as e:
        logger.warning("check %s raised %s", name, e)
        return [{"check": name, "label": f"error: {e}", "value": None, "threshold": None, "status": "fail"}]


def run_verify(cfg: schemas.RunConfig, out: Optional[Path] = None) -> tuple[schemas.VerifyReport, Steps]:
    steps: Steps = []
    c, _ = build_cascade(cfg, steps)
    names = cfg.checks or list(CHECKS)
    for name in names:
        if name not in CHECKS:
            raise ValueError(f"Unknown check: {name}")
    ctx = CheckContext(c, points=cfg.points, seed=cfg.seed, lattice=cfg.lattice, thresholds=cfg.tolerances.model_dump(), workers=cfg.workers)
    # shared lazy data is filled before the fan-out
    ctx.tips
    if c.depth >= 1:
        ctx.frames
    results = fan_out(lambda name: _safe_check(name, ctx), names, cfg.workers)
    records = [schemas.CheckRecord(**row) for name in names for row in results[name]]
    failed = sorted({r.check for r in records if r.status == "fail"})
    for r in records:
        _step(steps, r.check, {"label": r.label}, {"value": r.value, "status": r.status})
    report = schemas.VerifyReport(
        family=cfg.family, depth=cfg.depth, seed=cfg.seed, points=cfg.points, checks=records, failed=failed, passed=not failed
    )
    if out is not None:
        write_json(out / "verify.json", report)
    if failed:
        logger.warning("verification failed: %s", ", ".join(failed))
    return report, steps


def run_universal(cfg: schemas.RunConfig, out: Optional[Path] = None) -> tuple[schemas.UniversalReport, Steps]:
    steps: Steps = []
    c, _ = build_cascade(cfg, steps)
    nmax = cfg.universal_depth
    nums, b2, b1 = universal_numbers(c, nmax)
    planar = planar_average_jacobian(c, nmax) if cfg.family == "trivial-extension" else None
    report = schemas.UniversalReport(
        family=cfg.family,
        depth=cfg.depth,
        nmax=nmax,
        b2=nums.b2,
        b1=nums.b1,
        bF=nums.bF,
        product_residual=nums.b1 * nums.b2 - nums.bF,
        rho_fit=_finite(nums.rho_fit),
        b2_averaged=b2.averaged,
        b2_pointwise=b2.pointwise,
        b1_expression_logs=b1.expression_logs,
        b1_slope=_finite(b1.slope),
        b1_spread=b1.spread,
        planar_bF=planar,
        birkhoff_log_bF=birkhoff_log_average(c, nmax),
        a_samples=nums.a_samples,
        a_spread=_finite(nums.a_spread),
    )
    _step(steps, "universal", {"nmax": nmax}, {"b2": nums.b2, "b1": nums.b1, "bF": nums.bF})
    if out is not None:
        write_json(out / "universal.json", report)
    return report, steps


def run_geometry(cfg: schemas.RunConfig, out: Optional[Path] = None) -> tuple[schemas.GeometrySummary, Steps]:
    """Geometry scan with frames; b1-dependent columns stay empty for degenerate maps."""
    steps: Steps = []
    c, _ = build_cascade(cfg, steps)
    tips = compute_tips(c)
    frames = all_frames(c, tips, cfg.workers)
    b1: Optional[float] = None
    try:
        b1 = estimate_b1(c, cfg.universal_depth).b1
    except DegenerateMapError as e:
        logger.warning("geometry without b1: %s", e)
    report = geometry_scan(c, tips, frames, min(cfg.kmax, max(c.depth - 1, 0)), b1=b1, lattice=cfg.lattice + 1, workers=cfg.workers)
    trend = ratio_trend(report)
    summary = schemas.GeometrySummary(
        family=cfg.family,
        depth=cfg.depth,
        kmax=cfg.kmax,
        sigma=report.sigma,
        b1=b1,
        rows=len(report.rows),
        min_ratio_by_k={str(k): v for k, v in sorted(report.ratios_by_k().items())},
        ratio_slope=_finite(trend.slope),
        ratio_monotone=trend.monotone,
        ratio_consistent=trend.consistent,
    )
    if b1 is not None and report.rows:
        fit = diameter_bounds_check(report, b1)
        summary.diameter_fit = {
            "c_upper": fit.c_upper,
            "c_lower": fit.c_lower,
            "ratio": fit.ratio,
            "violations": float(fit.violations),
            "fitted": float(fit.fitted),
            "held_out": float(fit.held_out),
            "shear": fit.shear,
            "dominated": float(fit.dominated),
            "dominance_spread": fit.dominance_spread,
        }
        if fit.violations:
            logger.warning("%d held-out diameters outside the fitted bounds", fit.violations)
        summary.t_vs_b1_stalled = t_vs_b1(frames, b1)[1]
        if 0 < b1 < 1 and -1 < report.sigma < 0:
            summary.criterion = [schemas.CriterionRow(k=k, n=n, gap=g) for k, n, g in unbounded_geometry_criterion(b1, report.sigma, cfg.kmax)]
    _step(steps, "geometry", {"kmax": cfg.kmax, "lattice": cfg.lattice + 1}, {"rows": len(report.rows), "b1": b1})
    if out is not None:
        rows = [schemas.GeometryRow(**vars(r)) for r in sorted(report.rows, key=lambda r: (r.k, r.n))]
        write_csv(out / "geometry.csv", rows, GEOMETRY_COLUMNS)
        write_csv(out / "frames.csv", [fr.to_row() for _, fr in sorted(frames.items())], FRAME_COLUMNS)
        write_json(out / "summary.json", summary)
    return summary, steps


def with_param(cfg: schemas.RunConfig, name: str, value: float) -> schemas.RunConfig:
    """Copy of cfg with one map parameter replaced, validated against the budget."""
    if name not in schemas.MapParams.model_fields:
        raise ValueError(f"Unknown map parameter: {name}")
    params = schemas.MapParams(**{**cfg.params.model_dump(), name: value})
    return cfg.model_copy(update={"params": params})


def run_overlap_tuning(
    cfg: schemas.RunConfig, k: int, n: int, lo: float, hi: float, param: str = "eps_amplitude"
) -> tuple[schemas.OverlapTuningReport, schemas.RunConfig, Steps]:
    """Bisect one map parameter until the scan pieces at (k, n) just overlap horizontally."""
    if not 0 <= k < n < cfg.depth:
        raise ValueError(f"overlap tuning needs 0 <= k < n < depth = {cfg.depth}, got k={k}, n={n}")
    steps: Steps = []
    lattice = cfg.lattice + 1

    def width_at(value: float) -> float:
        c, _ = build_cascade(with_param(cfg, param, value), [])
        return scan_overlap(c, k, n, lattice)

    tuned = tune_overlap(width_at, lo, hi)
    tuned_cfg = with_param(cfg, param, tuned.param)
    c, _ = build_cascade(tuned_cfg, steps)
    report = schemas.OverlapTuningReport(k=k, n=n, param_name=param, param=tuned.param, width=tuned.width, iterations=tuned.iterations)
    try:
        b1 = estimate_b1(c, cfg.universal_depth).b1
    except DegenerateMapError as e:
        logger.warning("overlap tuning without b1: %s", e)
    else:
        report.b1 = b1
        report.gap = abs(2**k * math.log(b1) - (n - k) * math.log(abs(fixed_point_sigma(c))))
    _step(steps, "geometry", {"k": k, "n": n, "param": param, "lo": lo, "hi": hi}, report.model_dump())
    return report, tuned_cfg, steps


def run_holder(b1: float, b1_tilde: float) -> tuple[float, Steps]:
    value = holder_bound(b1, b1_tilde)
    steps: Steps = []
    _step(steps, "geometry", {"b1": b1, "b1_tilde": b1_tilde}, {"holder": value})
    return value, steps


def run_criterion(b1: float, sigma: float, kmax: int) -> tuple[list[schemas.CriterionRow], Steps]:
    rows = [schemas.CriterionRow(k=k, n=n, gap=g) for k, n, g in unbounded_geometry_criterion(b1, sigma, kmax)]
    steps: Steps = []
    _step(steps, "geometry", {"b1": b1, "sigma": sigma, "kmax": kmax}, {"rows": len(rows)})
    return rows, steps
