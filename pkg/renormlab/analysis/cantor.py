"""Pieces of the boxing, tips, critical points and Cantor-measure averages."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist

from renormlab import config
from renormlab.errors import AdequacyError, DegenerateMapError, TipDepthError, TipDriftError
from renormlab.jets import as_points
from renormlab.maps.fields import ScalarField3
from renormlab.renorm.cascade import RenormCascade
from renormlab.words import C, V, Word, word_successor

logger = logging.getLogger(__name__)

__all__ = [
    "BoxingReport",
    "PieceSample",
    "TipData",
    "Word",
    "average_jacobian",
    "birkhoff_log_average",
    "cantor_points",
    "boxing_check",
    "cantor_log_average",
    "critical_point",
    "compute_tips",
    "dynamics_check",
    "log_average_jacobian",
    "piece",
    "pieces",
    "planar_average_jacobian",
    "sample_box",
    "tip",
    "word_successor",
]

FieldLike = Union[ScalarField3, Callable[[np.ndarray], np.ndarray]]


def sample_box(c: RenormCascade, count: int, seed: int = config.SEED, shrink: float = 1.0) -> np.ndarray:
    """Seeded uniform points in the cascade's box."""
    return c.box.sample(np.random.default_rng(seed), count, shrink)


def _diameter(points: np.ndarray) -> float:
    return float(np.max(pdist(points), initial=0.0)) if len(points) > 1 else 0.0


@dataclass
class PieceSample:
    word: Word
    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    diameter: float

    @classmethod
    def from_points(cls, word: Word, points: np.ndarray) -> "PieceSample":
        return cls(word=word, points=points, lower=points.min(axis=0), upper=points.max(axis=0), diameter=_diameter(points))

    def contains(self, pts: np.ndarray, pad: float = config.HULL_INFLATE) -> np.ndarray:
        return np.all((pts >= self.lower - pad) & (pts <= self.upper + pad), axis=1)

    def excursion(self, pts: np.ndarray) -> float:
        """Largest distance by which pts leave the hull along any axis."""
        out = np.maximum(pts - self.upper, self.lower - pts)
        return float(max(np.max(out, initial=0.0), 0.0))

    def to_row(self) -> dict:
        return {
            "word": str(self.word),
            "level": len(self.word),
            "x_min": float(self.lower[0]),
            "x_max": float(self.upper[0]),
            "y_min": float(self.lower[1]),
            "y_max": float(self.upper[1]),
            "z_min": float(self.lower[2]),
            "z_max": float(self.upper[2]),
            "diameter": self.diameter,
        }


def piece(c: RenormCascade, w: Word, lattice: int = 5, *, check: bool = True) -> PieceSample:
    """B^n_w = Psi^n_w(B) sampled on a lattice; refinement to 2L-1 must move the diameter < 10%."""
    pts = c.psi_word_eval(0, w, c.box.lattice(lattice))[0]
    sample = PieceSample.from_points(w, pts)
    if check and sample.diameter > 0:
        fine = _diameter(c.psi_word_eval(0, w, c.box.lattice(2 * lattice - 1))[0])
        change = abs(fine - sample.diameter) / fine
        if change > config.ADEQUACY_TOL:
            raise AdequacyError(f"piece {w}: refinement changed diameter by {change:.1%}")
    return sample


def pieces(c: RenormCascade, n: int, lattice: int = 4) -> list[PieceSample]:
    """All 2^n pieces of level n, ordered by word index."""
    vals, _ = c.psi_words(0, n, c.box.lattice(lattice))
    return [PieceSample.from_points(Word.from_index(i, n), vals[i]) for i in range(len(vals))]


def dynamics_check(c: RenormCascade, n: int, lattice: int = 4) -> float:
    """Worst excursion of F(B^n_w) outside the hull of B^n_{w+1} (inflated by 1e-6)."""
    level = pieces(c, n, lattice)
    F = c.levels[0]
    worst = 0.0
    for p in level:
        image = F.evaluate(p.points)
        succ = level[word_successor(p.word).index]
        worst = max(worst, max(succ.excursion(image) - config.HULL_INFLATE, 0.0))
    logger.debug("dynamics check at level %d: %.3e", n, worst)
    return worst


def _separation(a: PieceSample, b: PieceSample) -> float:
    gaps = np.maximum(a.lower - b.upper, b.lower - a.upper)
    best = float(np.max(gaps))
    if best > 0:
        return best
    return float(np.min(cdist(a.points, b.points)))


@dataclass
class BoxingReport:
    level: int
    min_separation: float
    disjoint: bool
    nesting_violation: float
    dynamics_violation: float

    @property
    def ok(self) -> bool:
        return self.disjoint and self.nesting_violation <= 1e-8 and self.dynamics_violation <= 1e-8


def boxing_check(c: RenormCascade, n: int, lattice: int = 4) -> BoxingReport:
    """Disjointness, nesting into level n-1 and the adding-machine dynamics at level n."""
    level = pieces(c, n, lattice)
    sep = min((_separation(a, b) for i, a in enumerate(level) for b in level[i + 1 :]), default=float("inf"))
    nest = 0.0
    if n >= 1:
        parents = pieces(c, n - 1, lattice)
        for p in level:
            parent = parents[Word(p.word.bits[:-1]).index]
            nest = max(nest, max(parent.excursion(p.points) - config.HULL_INFLATE, 0.0))
    dyn = dynamics_check(c, n, lattice)
    return BoxingReport(level=n, min_separation=sep, disjoint=sep > 0, nesting_violation=nest, dynamics_violation=dyn)


# tips and critical points


@dataclass
class TipData:
    tau: np.ndarray
    crit: np.ndarray
    radius: np.ndarray
    drift: np.ndarray

    def rows(self) -> list[dict]:
        return [
            {
                "level": k,
                "tau_x": float(self.tau[k, 0]),
                "tau_y": float(self.tau[k, 1]),
                "tau_z": float(self.tau[k, 2]),
                "c_x": float(self.crit[k, 0]),
                "c_y": float(self.crit[k, 1]),
                "c_z": float(self.crit[k, 2]),
                "radius": float(self.radius[k]),
                "drift": float(self.drift[k]),
            }
            for k in range(len(self.tau))
        ]


def _link_fixed_point(c: RenormCascade, level: int, letter: int) -> np.ndarray:
    """Fixed point of psi^level_letter by Newton on psi(w) - w."""
    w = c.psi(level, letter, c.box.center)[0]
    for _ in range(config.TIP_NEWTON_ITERS):
        val, J = c.psi(level, letter, w, np.eye(3)[None])
        step = np.linalg.solve(J[0] - np.eye(3), val[0] - w[0])
        w = w - step[None]
        if np.max(np.abs(step)) <= 1e-15:
            break
    return w[0]


def compute_tips(c: RenormCascade) -> TipData:
    """tau_k = Psi^N_{k,v}(tau_N) and c_k = Psi^N_{k,c}(c_N) for every level k.

    tau_N and c_N are the fixed points of psi^{N+1}_v and psi^{N+1}_c; the radius of
    level k compares against the same construction one level shallower.
    """
    if "tips" in c.cache:
        return c.cache["tips"]
    N = c.depth
    tops = {letter: _link_fixed_point(c, N + 1, letter) for letter in (V, C)}
    prev = {letter: _link_fixed_point(c, N, letter) for letter in (V, C)} if N >= 1 else None
    out = {}
    radii = {}
    for letter in (V, C):
        pts = np.zeros((N + 1, 3))
        rad = np.full(N + 1, np.inf)
        for k in range(N + 1):
            pts[k] = c.psi_word_eval(k, Word((letter,) * (N - k)), tops[letter])[0][0]
            if prev is not None:
                if k < N:
                    alt = c.psi_word_eval(k, Word((letter,) * (N - 1 - k)), prev[letter])[0][0]
                else:
                    alt = prev[letter]
                rad[k] = float(np.max(np.abs(pts[k] - alt)))
        out[letter], radii[letter] = pts, rad
    drift = np.array([float(np.max(np.abs(F.evaluate(out[C][k])[0] - out[V][k]))) for k, F in enumerate(c.levels)])
    tips = TipData(tau=out[V], crit=out[C], radius=np.maximum(radii[V], radii[C]), drift=drift)
    c.cache["tips"] = tips
    return tips


def tip(c: RenormCascade, k: int, tol: float = config.TIP_TOL) -> np.ndarray:
    tips = compute_tips(c)
    if tips.radius[k] > tol:
        raise TipDepthError(k, tips.radius[k], tol)
    return tips.tau[k]


def critical_point(c: RenormCascade, k: int, tol: float = config.TIP_TOL) -> np.ndarray:
    """Limit of Psi^n_{k,c}; checked against F_k(c) = tau_k, whose y-coordinate forces pi_x(c) = pi_y(tau)."""
    tips = compute_tips(c)
    if tips.radius[k] > tol:
        raise TipDepthError(k, tips.radius[k], tol)
    if tips.drift[k] > config.DRIFT_TOL:
        raise TipDriftError(f"level {k}: |F_k(c_k) - tau_k| = {tips.drift[k]:.3e}")
    return tips.crit[k]


# Cantor-measure averages


def _field_values(field: FieldLike, pts: np.ndarray) -> np.ndarray:
    if isinstance(field, ScalarField3):
        return field.values(pts)
    return np.broadcast_to(np.asarray(field(pts), dtype=float), (len(pts),))


def cantor_points(c: RenormCascade, n: int, base=None) -> np.ndarray:
    """Psi^n_w(base) for every word of length n, base defaulting to the level-n tip."""
    if base is None:
        base = compute_tips(c).tau[n]
    vals, _ = c.psi_words(0, n, as_points(base))
    return vals[:, 0, :]


def cantor_log_average(c: RenormCascade, field: FieldLike, n: int, base=None) -> float:
    """(1/2^n) sum over words of log|field(Psi^n_w(base))|."""
    pts = cantor_points(c, n, base)
    vals = _field_values(field, pts)
    zero = np.flatnonzero(vals == 0.0)
    if zero.size:
        raise DegenerateMapError(f"field vanishes on piece {Word.from_index(int(zero[0]), n)}")
    return float(np.mean(np.log(np.abs(vals))))


def _dets(c: RenormCascade, pts: np.ndarray) -> np.ndarray:
    _, J = c.levels[0].evaluate_jac(pts)
    return J[:, 0, 2] * J[:, 2, 1] - J[:, 0, 1] * J[:, 2, 2]


def log_average_jacobian(c: RenormCascade, n: int, base=None) -> float:
    if c.degenerate:
        raise DegenerateMapError("average Jacobian is undefined for a degenerate map")
    return cantor_log_average(c, lambda pts: _dets(c, pts), n, base)


def average_jacobian(c: RenormCascade, n: int, base=None) -> float:
    """b_F = exp of the mean of log|det DF| with weight 2^-n per piece."""
    return float(np.exp(log_average_jacobian(c, n, base)))


def planar_average_jacobian(c: RenormCascade, n: int, base=None) -> float:
    """exp of the mean of log|d eps / dy|, the average Jacobian of the xy-projection when eps ignores z."""
    F = c.levels[0]
    return float(np.exp(cantor_log_average(c, lambda pts: F.evaluate_jac(pts)[1][:, 0, 1], n, base)))


def birkhoff_log_average(c: RenormCascade, n: int) -> float:
    """Time average of log|det DF| along 2^n iterates of the tip."""
    if c.degenerate:
        raise DegenerateMapError("average Jacobian is undefined for a degenerate map")
    F = c.levels[0]
    w = compute_tips(c).tau[0][None]
    orbit = []
    for _ in range(2**n):
        orbit.append(w[0])
        w = F.evaluate(w)
    return float(np.mean(np.log(np.abs(_dets(c, np.array(orbit))))))
