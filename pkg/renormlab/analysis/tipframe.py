"""Tip-centred frames of Psi^n_k: linear part (alpha, sigma, t, u, d) and nonlinear parts S, R.

In tip-translated coordinates
    Psi^n_k(tau_n + w) - tau_k = U . diag(alpha, s, s) . (x + S(w), y, z + R(y)),
    U = [[1, t, u], [0, 1, 0], [0, d, 1]],
so D = D Psi^n_k(tau_n) = [[alpha, t s, u s], [0, s, 0], [0, d s, s]].
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from renormlab import config
from renormlab.analysis.cantor import TipData, compute_tips
from renormlab.analysis.universal import log_slope, q_function, rate_ratio, rel_error
from renormlab.errors import RenormLabError
from renormlab.parallel import fan_out
from renormlab.renorm.cascade import RenormCascade, WordMap
from renormlab.words import V, Word

logger = logging.getLogger(__name__)

Y_GRID = 64


@dataclass
class FrameDecomposition:
    k: int
    n: int
    alpha: float
    sigma_nk: float
    t: float
    u: float
    d: float
    D: np.ndarray
    tau_n: np.ndarray
    tau_k: np.ndarray
    structural: float
    psi: WordMap = field(repr=False)

    def y_range(self) -> tuple[float, float]:
        box = self.psi.cascade.box
        return box.y[0] - self.tau_n[1], box.y[1] - self.tau_n[1]

    def y_grid(self, count: int = Y_GRID) -> np.ndarray:
        lo, hi = self.y_range()
        return np.linspace(lo, hi, count)

    def _along_y(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return self.tau_n + np.stack([np.zeros_like(y), y, np.zeros_like(y)], axis=1)

    def R(self, y) -> np.ndarray:
        z = self.psi.evaluate(self._along_y(y))[:, 2] - self.tau_k[2]
        return z / self.sigma_nk - self.d * np.atleast_1d(y)

    def R_noise(self, y=None) -> float:
        """Round-off floor of R: z-coordinates carry absolute error of order eps, amplified by 1/|s|."""
        y = self.y_grid() if y is None else np.atleast_1d(np.asarray(y, dtype=float))
        eps = np.finfo(float).eps
        scale = (1.0 + abs(self.tau_k[2])) / abs(self.sigma_nk) + abs(self.d) * float(np.max(np.abs(y)))
        return config.R_ULPS * eps * scale

    def R_prime(self, y) -> np.ndarray:
        J = self.psi.evaluate_jac(self._along_y(y))[1]
        return J[:, 2, 1] / self.sigma_nk - self.d

    def S(self, w) -> np.ndarray:
        """Nonlinear x-part at tip-translated points w (shape (m, 3))."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        img = self.psi.evaluate(self.tau_n + w) - self.tau_k
        r = self.R(w[:, 1])
        s = self.sigma_nk
        return (img[:, 0] - s * self.t * w[:, 1] - s * self.u * (w[:, 2] + r)) / self.alpha - w[:, 0]

    def reassemble(self, w) -> np.ndarray:
        """Frame formula for Psi^n_k(tau_n + w) - tau_k."""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        inner = np.stack([w[:, 0] + self.S(w), w[:, 1], w[:, 2] + self.R(w[:, 1])], axis=1)
        U = np.array([[1.0, self.t, self.u], [0.0, 1.0, 0.0], [0.0, self.d, 1.0]])
        L = U @ np.diag([self.alpha, self.sigma_nk, self.sigma_nk])
        return inner @ L.T

    def to_row(self) -> dict:
        grid = self.y_grid()
        return {
            "k": self.k,
            "n": self.n,
            "alpha": self.alpha,
            "sigma_nk": self.sigma_nk,
            "t": self.t,
            "u": self.u,
            "d": self.d,
            "R_norm": float(np.max(np.abs(self.R(grid)))),
            "R_prime_norm": float(np.max(np.abs(self.R_prime(grid)))),
        }


def decompose(c: RenormCascade, tips: Optional[TipData], k: int, n: int) -> FrameDecomposition:
    if not 0 <= k < n <= c.depth:
        raise ValueError(f"need 0 <= k < n <= {c.depth}, got k={k}, n={n}")
    tips = tips or compute_tips(c)
    psi = WordMap(c, k, Word((V,) * (n - k)))
    _, J = psi.evaluate_jac(tips.tau[n])
    D = J[0]
    s = D[1, 1]
    if abs(s) < config.SIGMA_UNDERFLOW:
        raise RenormLabError(f"sigma_{n},{k} = {s:.3e} underflows; frame depth exhausted")
    structural = float(max(abs(D[1, 0]), abs(D[1, 2]), abs(D[2, 0]), abs(D[2, 2] - s) / abs(s)))
    return FrameDecomposition(
        k=k,
        n=n,
        alpha=float(D[0, 0]),
        sigma_nk=float(s),
        t=float(D[0, 1] / s),
        u=float(D[0, 2] / s),
        d=float(D[2, 1] / s),
        D=D,
        tau_n=tips.tau[n],
        tau_k=tips.tau[k],
        structural=structural,
        psi=psi,
    )


Frames = dict[tuple[int, int], FrameDecomposition]


def all_frames(c: RenormCascade, tips: Optional[TipData] = None, workers: Optional[int] = None) -> Frames:
    tips = tips or compute_tips(c)
    pairs = [(k, n) for n in range(1, c.depth + 1) for k in range(n)]
    return fan_out(lambda kn: decompose(c, tips, *kn), pairs, workers)


def reassembly_error(frame: FrameDecomposition, lattice: int = 4) -> float:
    box = frame.psi.cascade.box
    w = box.lattice(lattice) - frame.tau_n
    direct = frame.psi.evaluate(frame.tau_n + w) - frame.tau_k
    return float(np.max(np.abs(direct - frame.reassemble(w))))


def check_cocycle(frames: Frames) -> float:
    """max over k < m < n of |D^n_k - D^m_k D^n_m| relative to the largest entry of D^n_k."""
    worst = 0.0
    for (k, n), fr in frames.items():
        for m in range(k + 1, n):
            prod = frames[(k, m)].D @ frames[(m, n)].D
            scale = max(np.max(np.abs(fr.D)), 1e-300)
            worst = max(worst, float(np.max(np.abs(fr.D - prod)) / scale))
    return worst


@dataclass
class DutRow:
    k: int
    n: int
    d: float
    u: float
    t: float
    t_minus_ud: float


def _weight(frames: Frames, k: int, i: int) -> float:
    w = 1.0
    for j in range(k, i):
        step = frames[(j, j + 1)]
        w *= step.alpha / step.sigma_nk
    return w


def check_dut_recursions(frames: Frames) -> list[DutRow]:
    """Relative residuals of the d, u, t and t - u d sums built from single-step frames.

    With W(k, i) = prod_{j=k}^{i-1} alpha_{j+1,j} / sigma_{j+1,j}:
      d_{n,k} = sum d_{i+1,i}
      u_{n,k} = sum W(k,i) u_{i+1,i}
      t_{n,k} = sum W(k,i) (t_{i+1,i} + u_{i+1,i} d_{n,i+1})
      t_{n,k} - u_{n,k} d_{n,k} = sum W(k,i) (t_{i+1,i} - u_{i+1,i} d_{i+1,k})
    """
    rows = []
    for (k, n), fr in sorted(frames.items()):
        steps = [frames[(i, i + 1)] for i in range(k, n)]
        W = [_weight(frames, k, i) for i in range(k, n)]
        d_terms = [s.d for s in steps]
        u_terms = [w * s.u for w, s in zip(W, steps)]
        d_next = [frames[(i + 1, n)].d if i + 1 < n else 0.0 for i in range(k, n)]
        d_upto = [frames[(k, i + 1)].d for i in range(k, n)]
        t_terms = [w * (s.t + s.u * dn) for w, s, dn in zip(W, steps, d_next)]
        tud_terms = [w * (s.t - s.u * du) for w, s, du in zip(W, steps, d_upto)]
        rows.append(
            DutRow(
                k=k,
                n=n,
                d=rel_error(fr.d, sum(d_terms), *d_terms),
                u=rel_error(fr.u, sum(u_terms), *u_terms),
                t=rel_error(fr.t, sum(t_terms), *t_terms),
                t_minus_ud=rel_error(fr.t - fr.u * fr.d, sum(tud_terms), *tud_terms),
            )
        )
    return rows


@dataclass
class RDecay:
    k: int
    norms: list[float]
    prime_norms: list[float]
    recursion_residual: float
    slope: float
    log_sigma: float
    quadratic: list[float] = field(default_factory=list)
    resolved: list[bool] = field(default_factory=list)

    @property
    def rate_ratio(self) -> float:
        return rate_ratio(self.slope, self.log_sigma)


def r_quadratic_fit(frame: FrameDecomposition) -> float:
    """Least-squares a in R(y) ~ a y^2."""
    y = frame.y_grid()
    coef, *_ = np.linalg.lstsq((y**2)[:, None], frame.R(y), rcond=None)
    return float(coef[0])


def check_R_recursion(c: RenormCascade, frames: Frames, k: int) -> RDecay:
    """Norms of R^n_k for n > k and the pointwise recursion R^n_k(y) = R^n_{n-1}(y) + R^{n-1}_k(s y)/s, s = sigma_{n,n-1}.

    The recursion residual is the sup-norm mismatch left after subtracting the
    round-off floor of the three terms, relative to the largest of their norms.
    Levels whose R is within R_RESOLVED times its floor are marked unresolved and
    left out of the decay fit.
    """
    norms, primes, quad, resolved = [], [], [], []
    worst = 0.0
    for n in range(k + 1, c.depth + 1):
        fr = frames[(k, n)]
        y = fr.y_grid()
        R = fr.R(y)
        noise = fr.R_noise(y)
        norms.append(float(np.max(np.abs(R))))
        resolved.append(norms[-1] > config.R_RESOLVED * noise)
        primes.append(float(np.max(np.abs(fr.R_prime(y)))))
        quad.append(r_quadratic_fit(fr))
        if n - k >= 2:
            last = frames[(n - 1, n)]
            prev = frames[(k, n - 1)]
            s = last.sigma_nk
            first = last.R(y)
            rest = prev.R(s * y) / s
            allowance = noise + last.R_noise(y) + prev.R_noise(s * y) / abs(s)
            scale = max(norms[-1], float(np.max(np.abs(first))), float(np.max(np.abs(rest))))
            excess = max(float(np.max(np.abs(R - first - rest))) - allowance, 0.0)
            if scale > 0:
                worst = max(worst, excess / scale)
    offsets = [n - k for n, ok in zip(range(k + 1, c.depth + 1), resolved) if ok]
    slope = log_slope([v for v, ok in zip(norms, resolved) if ok], offsets)
    log_sigma = float(np.mean(np.log(np.abs(c.sigmas[k:])))) if c.depth > k else float("nan")
    if not all(resolved):
        logger.debug("R^n_%d below resolution at n = %s", k, [n for n, ok in zip(range(k + 1, c.depth + 1), resolved) if not ok])
    return RDecay(
        k=k,
        norms=norms,
        prime_norms=primes,
        recursion_residual=worst,
        slope=slope,
        log_sigma=log_sigma,
        quadratic=quad,
        resolved=resolved,
    )


@dataclass
class ZDifference:
    k: int
    n: int
    difference: float
    corollary: float
    d_sequence: list[float] = field(default_factory=list)


def check_z_difference(c: RenormCascade, frames: Frames, k: int, n: int, pairs: int = 20, seed: int = config.SEED) -> ZDifference:
    """z-differences of Psi^n_k against s (dz + d dy + R(y1) - R(y2)), and the identity
    sum_{i=k}^{n-1} q_i(pi_y Psi^n_{i,v}(w)) = d + R'(pi_y(w))."""
    fr = frames[(k, n)]
    rng = np.random.default_rng(seed)
    w1 = c.box.sample(rng, pairs)
    w2 = c.box.sample(rng, pairs)
    z1 = fr.psi.evaluate(w1)[:, 2]
    z2 = fr.psi.evaluate(w2)[:, 2]
    s = fr.sigma_nk
    y1, y2 = w1[:, 1] - fr.tau_n[1], w2[:, 1] - fr.tau_n[1]
    terms = [s * (w1[:, 2] - w2[:, 2]), s * fr.d * (y1 - y2), s * fr.R(y1), -s * fr.R(y2)]
    difference = rel_error(z1 - z2, sum(terms), *terms)

    pts = w1
    qsum = np.zeros(len(w1))
    for i in range(n - 1, k - 1, -1):
        pts = c.psi(i + 1, V, pts)[0]
        qsum = qsum + q_function(c, i, pts[:, 1])
    rhs = fr.d + fr.R_prime(y1)
    corollary = rel_error(qsum, rhs, fr.d)

    # at the tip R'(0) = 0, so the q-sums reduce to d_{m,k}; their convergence in m is the tail
    sums = [frames[(k, m)].d for m in range(k + 1, c.depth + 1)]
    return ZDifference(k=k, n=n, difference=difference, corollary=corollary, d_sequence=sums)
