"""Box geometry: diameters, gaps between adjacent pieces, horizontal overlap and the non-rigidity bound."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from renormlab import config
from renormlab.analysis.cantor import PieceSample, TipData, compute_tips
from renormlab.analysis.tipframe import Frames
from renormlab.analysis.universal import log_slope
from renormlab.errors import AdequacyError, HypothesisError
from renormlab.maps.families import fixed_point
from renormlab.parallel import fan_out
from renormlab.renorm.cascade import RenormCascade
from renormlab.words import C, V, Word, scan_word

logger = logging.getLogger(__name__)


def signed_overlap(a: PieceSample, b: PieceSample) -> float:
    """Intersection length of the x-projections of two hulls; negative by the gap when they are apart."""
    return float(min(a.upper[0], b.upper[0]) - max(a.lower[0], b.lower[0]))


def horizontal_overlap(a: PieceSample, b: PieceSample) -> tuple[bool, float]:
    """Length of the intersection of the x-projections of two hulls."""
    width = signed_overlap(a, b)
    return bool(width > 0), float(max(width, 0.0))


def a_threshold(b1: float, eps_bar: float = config.EPS_BUDGET, c1: float = 1.0) -> float:
    """Level offset A after which t_{n,k} tracks b1^(2^k): 0 when b1 >= eps^2."""
    if b1 >= eps_bar**2:
        return 0.0
    return c1 * math.log2(math.log(b1) / math.log(eps_bar) - 1.0)


@dataclass
class TvsB1Row:
    k: int
    n: int
    log_t_scaled: float
    deviation: float
    admissible: bool


def t_vs_b1(frames: Frames, b1: float, eps_bar: float = config.EPS_BUDGET) -> tuple[list[TvsB1Row], bool]:
    """log|t_{n,k}|/2^k - log b1 per frame; the flag is True when the per-k spread fails to shrink."""
    A = a_threshold(b1, eps_bar)
    rows = []
    for (k, n), fr in sorted(frames.items()):
        if fr.t == 0:
            continue
        scaled = math.log(abs(fr.t)) / 2**k
        rows.append(TvsB1Row(k=k, n=n, log_t_scaled=scaled, deviation=scaled - math.log(b1), admissible=n >= k + A))
    spreads = []
    for k in sorted({r.k for r in rows}):
        devs = [abs(r.deviation) for r in rows if r.k == k and r.admissible]
        if devs:
            spreads.append(max(devs))
    stalled = len(spreads) >= 2 and not spreads[-1] < spreads[0]
    return rows, stalled


def unbounded_geometry_criterion(b1: float, sigma: float, kmax: int) -> list[tuple[int, int, float]]:
    """For each k, the n minimizing |2^k log b1 - (n-k) log|sigma||, with that gap."""
    if not 0 < b1 < 1:
        raise HypothesisError(f"b1 must lie in (0, 1), got {b1}")
    if not -1 < sigma < 0:
        raise HypothesisError(f"sigma must lie in (-1, 0), got {sigma}")
    ls = math.log(abs(sigma))
    out = []
    for k in range(kmax + 1):
        target = 2**k * math.log(b1)
        m = max(1, round(target / ls))
        out.append((k, k + m, abs(target - m * ls)))
    return out


def holder_bound(b1: float, b1_tilde: float) -> float:
    """1/2 (1 + log b1 / log b1~), an upper bound for the Holder exponent of the conjugacy."""
    if not 0 < b1_tilde < b1 < 1:
        raise HypothesisError(f"need 0 < b1~ < b1 < 1, got b1={b1}, b1~={b1_tilde}")
    return 0.5 * (1.0 + math.log(b1) / math.log(b1_tilde))


# scan


def _min_distance(pa: np.ndarray, pb: np.ndarray) -> tuple[float, int, int]:
    d = cdist(pa, pb)
    i, j = np.unravel_index(int(np.argmin(d)), d.shape)
    return float(d[i, j]), int(i), int(j)


def _refine_around(c: RenormCascade, word: Word, src: np.ndarray, spacing: np.ndarray, count: int = 5) -> np.ndarray:
    lo = np.maximum(src - spacing, c.box.lower)
    hi = np.minimum(src + spacing, c.box.upper)
    axes = [np.linspace(lo[a], hi[a], count) for a in range(3)]
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    return c.psi_word_eval(0, word, grid)[0]


@dataclass
class GeometryRow:
    k: int
    n: int
    word: str
    diam_v: float
    diam_c: float
    dist_min: float
    ratio: float
    overlap: bool
    overlap_width: float
    log_sigma_k: float
    t_nk: Optional[float] = None
    log_b1_2k: Optional[float] = None


@dataclass
class GeometryReport:
    rows: list[GeometryRow] = field(default_factory=list)
    sigma: float = float("nan")
    b1: Optional[float] = None

    def ratios_by_k(self) -> dict[int, float]:
        """Smallest dist/diam per k."""
        out: dict[int, float] = {}
        for r in self.rows:
            out[r.k] = min(out.get(r.k, math.inf), r.ratio)
        return out


def _scan_pieces(c: RenormCascade, k: int, n: int, lattice: int) -> tuple[Word, dict[int, Word], dict[int, PieceSample]]:
    w = scan_word(k, n)
    src = c.box.lattice(lattice)
    words = {V: w + Word((V,)), C: w + Word((C,))}
    samples = {nu: PieceSample.from_points(wd, c.psi_word_eval(0, wd, src)[0]) for nu, wd in words.items()}
    return w, words, samples


def _scan_pair(c: RenormCascade, k: int, n: int, lattice: int, log_sigma: float) -> GeometryRow:
    w, words, samples = _scan_pieces(c, k, n, lattice)
    src = c.box.lattice(lattice)
    spacing = (c.box.upper - c.box.lower) / (lattice - 1)
    for nu, wd in words.items():
        fine = c.psi_word_eval(0, wd, c.box.lattice(2 * lattice - 1))[0]
        fd = float(np.max(pdist(fine)))
        if fd > 0 and abs(fd - samples[nu].diameter) / fd > config.ADEQUACY_TOL:
            raise AdequacyError(f"piece {wd}: refinement changed diameter by more than 10%")
    dist, i, j = _min_distance(samples[V].points, samples[C].points)
    # one local refinement pass around the closest pair
    ra = _refine_around(c, words[V], src[i], spacing)
    rb = _refine_around(c, words[C], src[j], spacing)
    dist = min(dist, _min_distance(ra, rb)[0])
    overlap, width = horizontal_overlap(samples[V], samples[C])
    diam_v = samples[V].diameter
    return GeometryRow(
        k=k,
        n=n,
        word=str(w),
        diam_v=diam_v,
        diam_c=samples[C].diameter,
        dist_min=dist,
        ratio=dist / diam_v if diam_v > 0 else math.inf,
        overlap=overlap,
        overlap_width=width,
        log_sigma_k=k * log_sigma,
    )


def fixed_point_sigma(c: RenormCascade) -> float:
    """sigma of the unimodal fixed point at the cascade's truncation degree."""
    return fixed_point(max(c.levels[0].f.degree, config.FIXED_POINT_DEGREE)).sigma


def geometry_scan(
    c: RenormCascade,
    tips: Optional[TipData] = None,
    frames: Optional[Frames] = None,
    kmax: int = 2,
    *,
    b1: Optional[float] = None,
    sigma: Optional[float] = None,
    lattice: int = 5,
    workers: Optional[int] = None,
) -> GeometryReport:
    """Pieces B_{wv}, B_{wc} for w = v^k c v^(n-k-1), k <= kmax and k < n <= depth.

    sigma defaults to the fixed-point value; log_sigma_k is k log|sigma| with it.
    """
    tips = tips or compute_tips(c)
    sigma = fixed_point_sigma(c) if sigma is None else sigma
    log_sigma = math.log(abs(sigma))
    pairs = [(k, n) for k in range(kmax + 1) for n in range(k + 1, c.depth + 1)]
    rows = fan_out(lambda kn: _scan_pair(c, kn[0], kn[1], lattice, log_sigma), pairs, workers)
    report = GeometryReport(sigma=sigma, b1=b1)
    for (k, n), row in rows.items():
        if frames is not None and (k, n) in frames:
            row.t_nk = frames[(k, n)].t
        if b1 is not None:
            row.log_b1_2k = 2**k * math.log(b1)
        report.rows.append(row)
    logger.info("geometry scan: %d pairs, min ratio %.3g", len(report.rows), min((r.ratio for r in report.rows), default=math.nan))
    return report


@dataclass
class RatioTrend:
    ks: list[int]
    ratios: list[float]
    monotone: bool
    slope: float
    log_sigma: float

    @property
    def consistent(self) -> bool:
        """Monotone decrease with a fitted slope within 50% of log|sigma|."""
        if not (self.monotone and math.isfinite(self.slope)):
            return False
        return abs(self.slope - self.log_sigma) <= 0.5 * abs(self.log_sigma)


def ratio_trend(report: GeometryReport, ks: Optional[list[int]] = None) -> RatioTrend:
    """Smallest dist/diam per k against k: monotone flag and log-slope."""
    by_k = report.ratios_by_k()
    ks = sorted(k for k in (by_k if ks is None else ks) if k in by_k and 0 < by_k[k] < math.inf)
    ratios = [by_k[k] for k in ks]
    monotone = len(ratios) >= 2 and all(b < a for a, b in zip(ratios, ratios[1:]))
    return RatioTrend(ks=ks, ratios=ratios, monotone=monotone, slope=log_slope(ratios, ks), log_sigma=math.log(abs(report.sigma)))


# overlap tuning


def scan_overlap(c: RenormCascade, k: int, n: int, lattice: int = 5) -> float:
    """Signed horizontal overlap of B_{wv} and B_{wc} for the scan word w = v^k c v^(n-k-1)."""
    _, _, samples = _scan_pieces(c, k, n, lattice)
    return signed_overlap(samples[V], samples[C])


@dataclass
class OverlapTuning:
    param: float
    width: float
    lo: float
    hi: float
    iterations: int


def tune_overlap(
    width_at: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    tol: float = config.OVERLAP_TUNE_TOL,
    max_iters: int = config.OVERLAP_TUNE_MAX_ITERS,
) -> OverlapTuning:
    """Bisect a map parameter on the sign of the horizontal overlap.

    Returns the endpoint on the overlapping side once the bracket is below tol
    (relative to the parameter size).
    """
    g_lo, g_hi = width_at(lo), width_at(hi)
    if (g_lo > 0) == (g_hi > 0):
        raise HypothesisError(f"overlap does not change sign on [{lo:g}, {hi:g}]: widths {g_lo:.3e}, {g_hi:.3e}")
    it = 0
    while abs(hi - lo) > tol * max(1.0, abs(lo), abs(hi)) and it < max_iters:
        it += 1
        mid = 0.5 * (lo + hi)
        g = width_at(mid)
        logger.debug("overlap tuning step %d: param %.8g width %.3e", it, mid, g)
        if (g > 0) == (g_lo > 0):
            lo, g_lo = mid, g
        else:
            hi, g_hi = mid, g
    param, width = (lo, g_lo) if g_lo > 0 else (hi, g_hi)
    logger.info("overlap tuned to %.8g (width %.3e) in %d steps", param, width, it)
    return OverlapTuning(param=param, width=width, lo=lo, hi=hi, iterations=it)


def point_pair_distances(c: RenormCascade, k: int, n: int, tips: Optional[TipData] = None) -> dict:
    """Images under Psi_{v^k c v^(n-k-1)} of one orbit point in each of B1_v(F_n) and B1_c(F_n)."""
    if not 0 <= k < n < c.depth:
        raise ValueError(f"need 0 <= k < n < {c.depth}")
    tips = tips or compute_tips(c)
    base = tips.tau[n + 1]
    w1 = c.psi(n + 1, V, base)[0]
    w2 = c.psi(n + 1, C, base)[0]
    word = scan_word(k, n)
    p1 = c.psi_word_eval(0, word, w1)[0][0]
    p2 = c.psi_word_eval(0, word, w2)[0][0]
    return {"k": k, "n": n, "x_separation": float(abs(w1[0, 0] - w2[0, 0])), "distance": float(np.linalg.norm(p1 - p2))}


# diameter bounds


@dataclass
class DiameterFit:
    """Constants fitted on the lower levels and checked on the held-out upper ones.

    Upper: diam <= C_upper (a + b); lower: diam >= C_lower |a - shear b|, with
    a = s^k s^(2(n-k)) and b = s^k s^(n-k) b1^(2^k).
    """

    c_upper: float
    c_lower: float
    ratio: float
    violations: int
    fitted: int = 0
    held_out: int = 0
    shear: float = 0.0
    dominated: int = 0
    # exp of the largest log-deviation of diam / b from its geometric mean over b-dominated rows
    dominance_spread: float = float("nan")

    @property
    def dominance_ok(self) -> bool:
        return self.dominated == 0 or self.dominance_spread <= config.DOMINANCE_FACTOR


def _terms(s: float, b1: float, k: int, n: int) -> tuple[float, float]:
    a = math.exp(k * math.log(s) + 2 * (n - k) * math.log(s))
    b = math.exp(k * math.log(s) + (n - k) * math.log(s) + 2**k * math.log(b1))
    return a, b


def _split(rows: list[GeometryRow]) -> tuple[list[GeometryRow], list[GeometryRow]]:
    ks = sorted({r.k for r in rows})
    if len(ks) >= 2:
        cut = ks[(len(ks) - 1) // 2]
        return [r for r in rows if r.k <= cut], [r for r in rows if r.k > cut]
    ns = sorted({r.n for r in rows})
    if len(ns) >= 2:
        cut = ns[(len(ns) - 1) // 2]
        return [r for r in rows if r.n <= cut], [r for r in rows if r.n > cut]
    return rows, []


def _geo_mean(values: list[float]) -> float:
    return math.exp(float(np.mean(np.log(values)))) if values else math.nan


def diameter_bounds_check(report: GeometryReport, b1: float, band: float = config.DIAMETER_BAND) -> DiameterFit:
    """Fit C_upper, C_lower on the lower half of the scanned k (or n) and count held-out rows outside band times the bounds."""
    s = abs(report.sigma)
    rows = [r for r in report.rows if 0 < r.diam_v < math.inf]
    if not rows:
        return DiameterFit(c_upper=math.nan, c_lower=math.nan, ratio=math.nan, violations=0)
    terms = {(r.k, r.n): _terms(s, b1, r.k, r.n) for r in rows}
    fit_rows, held = _split(rows)

    c_a = _geo_mean([r.diam_v / terms[(r.k, r.n)][0] for r in fit_rows if terms[(r.k, r.n)][0] >= terms[(r.k, r.n)][1]])
    c_b = _geo_mean([r.diam_v / terms[(r.k, r.n)][1] for r in fit_rows if terms[(r.k, r.n)][1] > terms[(r.k, r.n)][0]])
    shear = c_b / c_a if math.isfinite(c_a) and math.isfinite(c_b) else 0.0

    def upper(r: GeometryRow) -> float:
        a, b = terms[(r.k, r.n)]
        return a + b

    def lower(r: GeometryRow) -> float:
        a, b = terms[(r.k, r.n)]
        return abs(a - shear * b)

    c_upper = max(r.diam_v / upper(r) for r in fit_rows)
    c_lower = min((r.diam_v / lower(r) for r in fit_rows if lower(r) > 0), default=math.nan)
    violations = 0
    for r in held:
        if r.diam_v > band * c_upper * upper(r) or (math.isfinite(c_lower) and r.diam_v * band < c_lower * lower(r)):
            violations += 1
            logger.debug("diameter bound violated at k=%d n=%d: diam %.3e", r.k, r.n, r.diam_v)

    # b1-term dominance: a << b
    dominated = [r.diam_v / terms[(r.k, r.n)][1] for r in rows if terms[(r.k, r.n)][0] * band <= terms[(r.k, r.n)][1]]
    spread = math.nan
    if dominated:
        logs = np.log(dominated)
        spread = math.exp(float(np.max(np.abs(logs - np.mean(logs)))))
    return DiameterFit(
        c_upper=c_upper,
        c_lower=c_lower,
        ratio=c_upper / c_lower if math.isfinite(c_lower) and c_lower > 0 else math.nan,
        violations=violations,
        fitted=len(fit_rows),
        held_out=len(held),
        shear=shear,
        dominated=len(dominated),
        dominance_spread=spread,
    )
