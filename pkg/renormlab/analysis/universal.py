"""Universal numbers b2, b1, the function a(x) and numerical checks of the delta recursions."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import linregress

from renormlab import config
from renormlab.analysis.cantor import (
    cantor_log_average,
    cantor_points,
    compute_tips,
    log_average_jacobian,
    sample_box,
)
from renormlab.errors import DegenerateMapError
from renormlab.maps.hmap3 import class_n_residual
from renormlab.renorm.cascade import RenormCascade
from renormlab.words import C, V, Word

logger = logging.getLogger(__name__)


def rel_error(lhs: np.ndarray, rhs: np.ndarray, *terms: np.ndarray) -> float:
    """max |lhs - rhs| / max |term| over the batch; 0/0 counts as 0."""
    lhs, rhs = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    for t in terms:
        scale = np.maximum(scale, np.abs(np.asarray(t, dtype=float)))
    diff = np.abs(lhs - rhs)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
    return float(np.max(rel, initial=0.0))


def fit_rate(values: list[float]) -> float:
    """exp of the fitted slope of log|v_{n+1} - v_n|; nan when there is no rate to fit, including a constant sequence."""
    diffs = np.abs(np.diff(np.asarray(values, dtype=float)))
    nonzero = diffs > 1e-300
    if len(diffs) == 0 or not nonzero.any() or np.max(diffs) < 1e-14:
        return float("nan")
    idx = np.flatnonzero(nonzero)
    if len(idx) < 2:
        return float("nan")
    fit = linregress(idx.astype(float), np.log(diffs[idx]))
    return float(np.exp(fit.slope))


def log_slope(values, offsets=None, floor: float = 0.0) -> float:
    """Fitted slope of log|v| against offsets over entries above floor; nan with fewer than two."""
    v = np.abs(np.asarray(values, dtype=float))
    x = np.arange(1, len(v) + 1, dtype=float) if offsets is None else np.asarray(offsets, dtype=float)
    keep = np.isfinite(v) & (v > max(floor, 1e-300))
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(linregress(x[keep], np.log(v[keep])).slope)


def rate_ratio(slope: float, log_sigma: float) -> float:
    """log|sigma| / slope: 1 for decay at the sigma rate, below 1 for faster decay, inf when nothing decays."""
    if not (np.isfinite(slope) and np.isfinite(log_sigma)):
        return float("nan")
    if slope >= 0:
        return float("inf")
    return float(log_sigma / slope)


def q_function(c: RenormCascade, k: int, y):
    """q_k(y) = d/dy delta_k(y, f_k^-1(y), 0)."""
    _, q = c.links[k].shear(y)
    return float(q[0]) if np.ndim(y) == 0 else q


# class N


def check_class_n(c: RenormCascade, points: int = 50, seed: int = config.SEED) -> list[float]:
    """Worst class-N residual of each F_k on samples of psi^{k+1}_v(B) and psi^{k+1}_c(B)."""
    base = sample_box(c, points, seed)
    out = []
    for k, F in enumerate(c.levels):
        region = np.concatenate([c.psi(k + 1, V, base)[0], c.psi(k + 1, C, base)[0]])
        res = class_n_residual(F, region, check_domain=False)
        out.append(float(np.max(np.abs(res))))
        logger.debug("class-N residual at level %d: %.3e", k, out[-1])
    return out


# derivative recursions


@dataclass
class DdeltaCheck:
    level: int
    dx: float
    dy: float
    dz: float
    bracket: float
    dz_product: float

    @property
    def worst(self) -> float:
        return max(self.dx, self.dy, self.dz)


def check_ddelta_recursion(c: RenormCascade, k: int, points: int = 100, seed: int = config.SEED) -> DdeltaCheck:
    """D delta_k from psi^k_v, psi^k_c, the straightening and q_{k-1}, against jets of delta_k.

    With B = delta_y(psi_c) + delta_z(psi_c) delta_x(psi_v) and X the x-coordinate of psi_v:
      d_x delta_k = delta_x(psi_c) + B X_x / s - q(s x)
      d_y delta_k = B X_y / s + delta_z(psi_c) (delta_y(psi_v) + delta_z(psi_v) q(s y))
      d_z delta_k = B X_z / s + delta_z(psi_c) delta_z(psi_v)
    """
    if k < 1:
        raise ValueError("delta recursion needs k >= 1")
    link = c.links[k - 1]
    s = link.sigma
    w = sample_box(c, points, seed)
    uv, Dv, uc, _ = link.psi_pair(w, np.broadcast_to(np.eye(3), (len(w), 3, 3)).copy())
    _, Jv = link.F.evaluate_jac(uv)
    _, Jc = link.F.evaluate_jac(uc)
    _, qy = link.shear(s * w[:, 1])
    _, qx = link.shear(s * w[:, 0])
    dv, dc = Jv[:, 2, :], Jc[:, 2, :]
    X = Dv[:, 0, :]
    B = dc[:, 1] + dc[:, 2] * dv[:, 0]
    rx = [dc[:, 0], B * X[:, 0] / s, -qx]
    ry = [B * X[:, 1] / s, dc[:, 2] * dv[:, 1], dc[:, 2] * dv[:, 2] * qy]
    rz = [B * X[:, 2] / s, dc[:, 2] * dv[:, 2]]
    _, Jk = c.levels[k].evaluate_jac(w)
    dk = Jk[:, 2, :]
    return DdeltaCheck(
        level=k,
        dx=rel_error(dk[:, 0], sum(rx), *rx),
        dy=rel_error(dk[:, 1], sum(ry), *ry),
        dz=rel_error(dk[:, 2], sum(rz), *rz),
        bracket=float(np.max(np.abs(B))),
        dz_product=rel_error(dk[:, 2], rz[1]),
    )


@dataclass
class DxSumCheck:
    k: int
    n: int
    residual: float
    tail: float
    partial_sums: list[float] = field(default_factory=list)


def check_dx_delta_sum(c: RenormCascade, k: int, n: int, points: int = 50, seed: int = config.SEED) -> DxSumCheck:
    """d_x delta_n(w) = d_x delta_k(Psi^n_{k,c} w) - sum_{i=k}^{n-1} q_i(pi_x Psi^n_{i,c} w) for class-N maps.

    The same identity at the critical points telescopes to d_x delta_n(c_n); its size is the tail.
    """
    if not 0 <= k < n <= c.depth:
        raise ValueError(f"need 0 <= k < n <= {c.depth}")
    w = sample_box(c, points, seed)
    pts = w
    qsum = np.zeros(len(w))
    terms = []
    for i in range(n - 1, k - 1, -1):
        pts = c.psi(i + 1, C, pts)[0]
        qi = q_function(c, i, pts[:, 0])
        qsum = qsum + qi
        terms.append(qi)
    lhs = c.levels[n].evaluate_jac(w)[1][:, 2, 0]
    head = c.levels[k].evaluate_jac(pts)[1][:, 2, 0]
    residual = rel_error(lhs, head - qsum, head, *terms)

    tips = compute_tips(c)
    crit = tips.crit
    qs = [q_function(c, i, crit[i, 0]) for i in range(k, c.depth)]
    partial = list(np.cumsum(qs)) if qs else []
    tail = abs(float(c.levels[c.depth].evaluate_jac(crit[c.depth])[1][0, 2, 0]))
    return DxSumCheck(k=k, n=n, residual=residual, tail=tail, partial_sums=[float(v) for v in partial])


def check_jac_recursion(c: RenormCascade, n: int, points: int = 100, seed: int = config.SEED) -> float:
    """det DF_n(w) = [a_x(F psi_c) / a_x(psi_v)] Jac F_{n-1}(psi_c) Jac F_{n-1}(psi_v), a_x = d_x pi_x F_{n-1}."""
    if n < 1:
        raise ValueError("Jacobian recursion needs n >= 1")
    link = c.links[n - 1]
    F = link.F
    w = sample_box(c, points, seed)
    uv, _, uc, _ = link.psi_pair(w)
    _, Jv = F.evaluate_jac(uv)
    Fc, Jc = F.evaluate_jac(uc)
    _, Jq = F.evaluate_jac(Fc)

    def det(J):
        return J[:, 0, 2] * J[:, 2, 1] - J[:, 0, 1] * J[:, 2, 2]

    rhs = Jq[:, 0, 0] / Jv[:, 0, 0] * det(Jc) * det(Jv)
    lhs = det(c.levels[n].evaluate_jac(w)[1])
    return rel_error(lhs, rhs)


@dataclass
class DyRelationCheck:
    k: int
    n: int
    residual: float
    brackets: list[float] = field(default_factory=list)
    slope: float = float("nan")
    log_sigma: float = float("nan")

    @property
    def rate_ratio(self) -> float:
        return rate_ratio(self.slope, self.log_sigma)


def _dy_ratio_chain(c: RenormCascade, k: int, n: int, w: np.ndarray):
    pts = w
    qsum = np.zeros(len(w))
    terms = []
    for i in range(n - 1, k - 1, -1):
        pts = c.psi(i + 1, V, pts)[0]
        qi = q_function(c, i, pts[:, 1])
        qsum = qsum + qi
        terms.append(qi)
    Jk = c.levels[k].evaluate_jac(pts)[1]
    return Jk[:, 2, 1] / Jk[:, 2, 2], qsum, terms


def check_dy_delta_relation(c: RenormCascade, k: int, n: int, points: int = 50, seed: int = config.SEED) -> DyRelationCheck:
    """delta_y/delta_z of F_n equals (delta_y/delta_z of F_k) o Psi^n_{k,v} + sum q_i(pi_y Psi^n_{i,v}).

    The bracket is measured at the level-m tips for m = k+1..n and its log is regressed on m-k.
    """
    if not 0 <= k < n <= c.depth:
        raise ValueError(f"need 0 <= k < n <= {c.depth}")
    if c.degenerate:
        raise DegenerateMapError("d_z delta vanishes for a degenerate map")
    w = sample_box(c, points, seed)
    head, qsum, terms = _dy_ratio_chain(c, k, n, w)
    Jn = c.levels[n].evaluate_jac(w)[1]
    residual = rel_error(Jn[:, 2, 1] / Jn[:, 2, 2], head + qsum, head, *terms)

    tau = compute_tips(c).tau
    brackets = []
    for m in range(k + 1, n + 1):
        h, q, _ = _dy_ratio_chain(c, k, m, tau[m][None])
        brackets.append(float(abs(h[0] + q[0])))
    slope = log_slope(brackets, floor=config.BRACKET_FLOOR)
    log_sigma = float(np.mean(np.log(np.abs(c.sigmas[k:n])))) if n > k else float("nan")
    return DyRelationCheck(k=k, n=n, residual=residual, brackets=brackets, slope=slope, log_sigma=log_sigma)


def check_conjugacy(c: RenormCascade, n: int, points: int = 20, seed: int = config.SEED) -> float:
    """max |Psi^n_{0,v}(F_n(w)) - F^(2^n)(Psi^n_{0,v}(w))| over samples."""
    w = sample_box(c, points, seed, shrink=0.9)
    word = Word((V,) * n)
    left = c.psi_word_eval(0, word, c.levels[n].evaluate(w))[0]
    right = c.psi_word_eval(0, word, w)[0]
    F = c.levels[0]
    for _ in range(2**n):
        right = F.evaluate(right)
    return float(np.max(np.abs(left - right)))


def check_psi_identities(c: RenormCascade, n: int, points: int = 20, seed: int = config.SEED) -> float:
    """max |Psi^n_{k,v} o F_n - F_k o Psi^n_{k,c}| over k < n and samples."""
    w = sample_box(c, points, seed, shrink=0.9)
    Fw = c.levels[n].evaluate(w)
    worst = 0.0
    for k in range(n):
        left = c.psi_word_eval(k, Word((V,) * (n - k)), Fw)[0]
        right = c.levels[k].evaluate(c.psi_word_eval(k, Word((C,) * (n - k)), w)[0])
        worst = max(worst, float(np.max(np.abs(left - right))))
    return worst


# universal numbers


@dataclass
class B2Estimate:
    b2: float
    averaged: list[float]
    pointwise: list[float]
    product_errors: list[float]
    rho_fit: float


def estimate_b2(c: RenormCascade, nmax: int) -> B2Estimate:
    """b2 from the Cantor average of log|d_z delta| and from |d_z delta_n(tau_n)|^(1/2^n)."""
    if c.degenerate:
        raise DegenerateMapError("d_z delta vanishes for a degenerate map")
    F = c.levels[0]
    tau = compute_tips(c).tau
    logs, pointwise, errors = [], [], []
    for n in range(0, nmax + 1):
        pts = cantor_points(c, n)
        dz = F.evaluate_jac(pts)[1][:, 2, 2]
        if np.any(dz == 0):
            raise DegenerateMapError(f"d_z delta vanishes on a level-{n} piece")
        if np.any(np.sign(dz) != np.sign(dz[0])):
            raise DegenerateMapError(f"d_z delta changes sign across level-{n} pieces")
        total = float(np.sum(np.log(np.abs(dz))))
        logs.append(total / 2**n)
        direct = c.levels[n].evaluate_jac(tau[n])[1][0, 2, 2]
        log_direct = float(np.log(abs(direct)))
        pointwise.append(float(np.exp(log_direct / 2**n)))
        errors.append(float(abs(np.expm1(log_direct - total))))
    averaged = [float(np.exp(v)) for v in logs]
    rho = fit_rate(logs)
    logger.info("b2 estimate %.12g (pointwise %.12g), rate %.3g", averaged[-1], pointwise[-1], rho)
    return B2Estimate(b2=averaged[-1], averaged=averaged, pointwise=pointwise, product_errors=errors, rho_fit=rho)


@dataclass
class B1Estimate:
    b1: float
    bF: float
    b2: float
    expression_logs: list[float]
    slope: float
    spread: float


def b1_expression(c: RenormCascade, k: int, pts: np.ndarray) -> np.ndarray:
    """d_y eps_k - d_z eps_k d_y delta_k / d_z delta_k, which equals Jac F_k / d_z delta_k."""
    J = c.levels[k].evaluate_jac(pts)[1]
    return -J[:, 0, 1] + J[:, 0, 2] * J[:, 2, 1] / J[:, 2, 2]


def estimate_b1(c: RenormCascade, nmax: int, b2: Optional[B2Estimate] = None, samples: int = 10, seed: int = config.SEED) -> B1Estimate:
    """b1 = bF / b2, with the b1 expression at tips and random Cantor points as a log-slope check."""
    b2 = b2 or estimate_b2(c, nmax)
    if b2.b2 == 0:
        raise DegenerateMapError("b2 = 0")
    log_bF = log_average_jacobian(c, nmax)
    log_b1 = log_bF - np.log(b2.b2)
    tau = compute_tips(c).tau
    exprs = []
    spread = 0.0
    rng = np.random.default_rng(seed)
    for k in range(1, nmax + 1):
        e_tip = b1_expression(c, k, tau[k][None])[0]
        exprs.append(float(np.log(abs(e_tip)) / 2**k))
        # random Cantor points of level k are images of tau_N under random words
        words = [Word.from_index(int(i), c.depth - k) for i in rng.integers(0, 2 ** (c.depth - k), samples)]
        pts = np.array([c.psi_word_eval(k, wd, tau[c.depth])[0][0] for wd in words])
        logs = np.log(np.abs(b1_expression(c, k, pts))) / 2**k
        spread = max(spread, float(np.ptp(logs)))
    slope = float("nan")
    if len(exprs) >= 2:
        scaled = np.array(exprs) * 2.0 ** np.arange(1, nmax + 1)
        slope = float(linregress(2.0 ** np.arange(1, nmax + 1), scaled).slope)
    return B1Estimate(b1=float(np.exp(log_b1)), bF=float(np.exp(log_bF)), b2=b2.b2, expression_logs=exprs, slope=slope, spread=spread)


def universal_a(c: RenormCascade, x, n: int, log_bF: Optional[float] = None) -> np.ndarray:
    """a(x) ~ exp(log|Jac F_n(x, y0, z0)| - 2^n log bF) on the tip's (y0, z0) slice."""
    if n < 2:
        raise ValueError("universal_a needs n >= 2")
    if c.degenerate:
        raise DegenerateMapError("bF is undefined for a degenerate map")
    if log_bF is None:
        log_bF = log_average_jacobian(c, min(n, c.depth))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    tau = compute_tips(c).tau[n]
    pts = np.stack([x, np.full_like(x, tau[1]), np.full_like(x, tau[2])], axis=1)
    J = c.levels[n].evaluate_jac(pts)[1]
    det = J[:, 0, 2] * J[:, 2, 1] - J[:, 0, 1] * J[:, 2, 2]
    return np.exp(np.log(np.abs(det)) - 2**n * log_bF)


def a_spread(c: RenormCascade, x, n: int, log_bF: Optional[float] = None) -> float:
    """Cross-level spread max |a_n(x) - a_{n+1}(x)| / |a_{n+1}(x)| of the a(x) estimate."""
    if n + 1 > c.depth:
        raise ValueError(f"a(x) spread at n = {n} needs depth >= {n + 1}, cascade has {c.depth}")
    if log_bF is None:
        log_bF = log_average_jacobian(c, n + 1)
    lo = universal_a(c, x, n, log_bF)
    hi = universal_a(c, x, n + 1, log_bF)
    return float(np.max(np.abs(lo - hi) / np.abs(hi)))


@dataclass
class UniversalNumbers:
    b2: float
    b1: float
    bF: float
    rho_fit: float
    a_samples: list[tuple[float, float]] = field(default_factory=list)
    # relative disagreement of a(x) between levels nmax - 1 and nmax; nan below nmax = 3
    a_spread: float = float("nan")


def universal_numbers(c: RenormCascade, nmax: int, a_grid: Optional[np.ndarray] = None) -> tuple[UniversalNumbers, B2Estimate, B1Estimate]:
    b2 = estimate_b2(c, nmax)
    b1 = estimate_b1(c, nmax, b2)
    samples: list[tuple[float, float]] = []
    spread = float("nan")
    if nmax >= 2:
        xs = np.linspace(-0.9, 0.9, 7) if a_grid is None else np.asarray(a_grid, dtype=float)
        log_bF = float(np.log(b1.bF))
        vals = universal_a(c, xs, nmax, log_bF=log_bF)
        samples = [(float(x), float(a)) for x, a in zip(xs, vals)]
        if nmax >= 3:
            spread = a_spread(c, xs, nmax - 1, log_bF=log_bF)
            logger.info("a(x) spread between levels %d and %d: %.3e", nmax - 1, nmax, spread)
    nums = UniversalNumbers(b2=b2.b2, b1=b1.b1, bF=b1.bF, rho_fit=b2.rho_fit, a_samples=samples, a_spread=spread)
    return nums, b2, b1
