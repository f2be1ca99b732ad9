"""Renormalization cascades F_0 ... F_N and the compositions Psi of their coordinate changes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from renormlab import config
from renormlab.errors import CascadeError, RenormLabError
from renormlab.jets import Point3, as_points
from renormlab.maps.fields import Box3
from renormlab.maps.hmap3 import HenonMap3
from renormlab.renorm.operator import Straightening, renormalize_step
from renormlab.words import Word

logger = logging.getLogger(__name__)


def _identity_jac(m: int) -> np.ndarray:
    return np.broadcast_to(np.eye(3), (m, 3, 3)).copy()


@dataclass
class RenormCascade:
    """Levels F_0..F_N; links[k] is the straightening of F_k, which defines psi^{k+1}."""

    levels: list[HenonMap3]
    links: list[Straightening]
    fit_residuals: list[float] = field(default_factory=list)
    degenerate: bool = False
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def box(self) -> Box3:
        return self.levels[0].box

    @property
    def sigmas(self) -> list[float]:
        """sigma_0 .. sigma_{N-1}."""
        return [link.sigma for link in self.links[: self.depth]]

    def sigma(self, k: int) -> float:
        return self.links[k].sigma

    def _check_range(self, k: int, n: int) -> None:
        if not 0 <= k <= n <= self.depth + 1:
            raise IndexError(f"need 0 <= k <= n <= {self.depth + 1}, got k={k}, n={n}")

    def psi(self, level: int, letter: int, w, jac_in: Optional[np.ndarray] = None):
        """psi^level_v (letter 0) or psi^level_c (letter 1): B(F_level) -> B(F_{level-1})."""
        self._check_range(level - 1, level)
        uv, Jv, uc, Jc = self.links[level - 1].psi_pair(as_points(w), jac_in)
        return (uc, Jc) if letter else (uv, Jv)

    def psi_word_eval(self, k: int, word: Word, w, *, jac: bool = False):
        """Psi^n_{k,word}(w) with n = k + len(word); letters applied from the deepest level up."""
        n = k + len(word)
        self._check_range(k, n)
        vals = as_points(w)
        J = _identity_jac(len(vals)) if jac else None
        for j in range(len(word), 0, -1):
            vals, J = self.psi(k + j, word.bits[j - 1], vals, J)
        return vals, J

    def psi_words(self, k: int, n: int, w, *, jac: bool = False):
        """Psi^n_{k,word}(w) for every word of length n-k at once.

        Returns values of shape (2^(n-k), m, 3), indexed by the little-endian word index,
        and Jacobians of shape (2^(n-k), m, 3, 3) when requested.
        """
        self._check_range(k, n)
        pts = as_points(w)
        m = len(pts)
        vals = pts[None]
        J = _identity_jac(m)[None] if jac else None
        for level in range(n, k, -1):
            B = vals.shape[0]
            flat_J = None if J is None else J.reshape(B * m, 3, 3)
            uv, Jv, uc, Jc = self.links[level - 1].psi_pair(vals.reshape(B * m, 3), flat_J)
            vals = np.stack([uv.reshape(B, m, 3), uc.reshape(B, m, 3)], axis=1).reshape(2 * B, m, 3)
            if J is not None:
                J = np.stack([Jv.reshape(B, m, 3, 3), Jc.reshape(B, m, 3, 3)], axis=1).reshape(2 * B, m, 3, 3)
        return vals, J

    def summary(self) -> list[dict]:
        """Per-level sigma, 1D coefficients and sampled perturbation norms."""
        grid = self.box.lattice(5)
        rows = []
        for k, F in enumerate(self.levels):
            vals = F.evaluate(grid)
            eps = F.f.raw(grid[:, 0]) - vals[:, 0]
            rows.append(
                {
                    "level": k,
                    "sigma": self.links[k].sigma if k < len(self.links) else None,
                    "f_coeffs": F.f.to_json(),
                    "eps_norm": float(np.max(np.abs(eps))),
                    "delta_norm": float(np.max(np.abs(vals[:, 2]))),
                    "fit_residual": self.fit_residuals[k] if k < len(self.fit_residuals) else None,
                }
            )
        return rows


class WordMap:
    """Psi^n_{k,w} as an evaluable map on jets."""

    def __init__(self, c: RenormCascade, k: int, word: Word):
        c._check_range(k, k + len(word))
        self.cascade = c
        self.k = k
        self.word = word

    def evaluate(self, w) -> np.ndarray:
        return self.cascade.psi_word_eval(self.k, self.word, w)[0]

    def evaluate_jac(self, w) -> tuple[np.ndarray, np.ndarray]:
        return self.cascade.psi_word_eval(self.k, self.word, w, jac=True)

    def apply(self, p: Point3) -> Point3:
        if not p.has_gradient:
            return Point3.constant(self.evaluate(p.values()))
        vals, J = self.evaluate_jac(p.values())
        return p.pushforward(vals, J)


def psi_word(c: RenormCascade, k: int, word: Word) -> WordMap:
    return WordMap(c, k, word)


def cascade(F: HenonMap3, N: int) -> RenormCascade:
    """Renormalize N times; a failure at any level is re-raised as CascadeError with that level."""
    if not 0 <= N <= config.DEPTH_BUDGET:
        raise ValueError(f"depth {N} outside 0..{config.DEPTH_BUDGET}")
    levels = [F]
    links: list[Straightening] = []
    residuals = [0.0]
    for k in range(N + 1):
        try:
            if k == N:
                links.append(Straightening(levels[-1]))
                break
            step = renormalize_step(levels[-1], name=f"F{k + 1}")
        except (RenormLabError, ValueError) as e:
            raise CascadeError(k, e) from e
        links.append(step.link)
        levels.append(step.renormalized)
        residuals.append(step.fit_residual)
        logger.info("cascade level %d: sigma=%.10f fit residual %.2e", k + 1, step.sigma, step.fit_residual)
    return RenormCascade(levels=levels, links=links, fit_residuals=residuals, degenerate=F.is_degenerate)
