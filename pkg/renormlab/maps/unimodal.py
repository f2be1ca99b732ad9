"""Even-polynomial unimodal maps, period-doubling renormalization and the fixed-point solver."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev
from numpy.polynomial import polynomial as npoly

from renormlab import config
from renormlab.errors import DomainError, FixedPointError, NoSolutionError, RefitError
from renormlab.jets import Jet

logger = logging.getLogger(__name__)


def chebyshev_nodes(count: int) -> np.ndarray:
    """Chebyshev points of the first kind mapped to (0, 1)."""
    return np.sort(0.5 * (chebyshev.chebpts1(count) + 1.0))


def even_basis(x: np.ndarray, degree: int) -> np.ndarray:
    """Columns x^2, x^4, ..., x^(2*degree)."""
    j = np.arange(1, degree + 1)
    return np.asarray(x, dtype=float)[:, None] ** (2 * j)


@dataclass(frozen=True)
class UnimodalMap:
    """x -> sum_j c_j x^(2j) on I = [-1, 1], normalized so that f(0) = 1."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if not c:
            raise ValueError("UnimodalMap needs at least one coefficient")
        if abs(c[0] - 1.0) > 1e-15:
            raise ValueError(f"UnimodalMap must satisfy f(0) = 1, got c0 = {c[0]!r}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def quadratic(cls, a: float) -> "UnimodalMap":
        return cls((1.0, -float(a)))

    @property
    def degree(self) -> int:
        """Index d of the leading term c_d x^(2d)."""
        return len(self.coeffs) - 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coeffs)

    @property
    def sigma0(self) -> float:
        """f(1): the scaling of the central interval, negative when renormalizable."""
        return float(np.sum(self.coeffs))

    def raw(self, x):
        """Evaluate without the domain check. Accepts arrays and jets."""
        if isinstance(x, Jet):
            u = x * x
            acc = Jet(self.coeffs[-1])
            for c in reversed(self.coeffs[:-1]):
                acc = acc * u + c
            return acc
        x = np.asarray(x, dtype=float)
        return npoly.polyval(x * x, self.array)

    def __call__(self, x):
        xv = x.val if isinstance(x, Jet) else np.asarray(x, dtype=float)
        if np.any(np.abs(xv) > 1.0 + config.DOMAIN_SLACK):
            raise DomainError(f"unimodal map evaluated outside I: max |x| = {np.max(np.abs(xv)):.12g}")
        return self.raw(x)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        dcoef = np.arange(1, len(self.coeffs)) * self.array[1:]
        if dcoef.size == 0:
            return np.zeros_like(x)
        return 2.0 * x * npoly.polyval(x * x, dcoef)

    def with_quadratic_shift(self, t: float) -> "UnimodalMap":
        c = list(self.coeffs) + ([0.0] if len(self.coeffs) == 1 else [])
        c[1] += t
        return UnimodalMap(tuple(c))

    def check_invariants(self) -> list[str]:
        """Return the list of violated invariants (empty when valid)."""
        issues = []
        grid = np.linspace(-1.0, 1.0, config.INVARIANT_GRID)
        vals = self.raw(grid)
        if np.any(np.abs(vals) > 1.0 + config.INVARIANT_TOL):
            issues.append(f"f(I) not inside I: max |f| = {np.max(np.abs(vals)):.15g}")
        d = self.derivative(grid)
        signs = np.sign(d[np.abs(d) > 0])
        changes = int(np.count_nonzero(np.diff(signs)))
        if changes != 1:
            issues.append(f"expected one critical point, derivative changes sign {changes} times")
        return issues

    def to_json(self) -> list[float]:
        return [float(c) for c in self.coeffs]


def evaluate(f: UnimodalMap, x):
    """f(x) with the domain check |x| <= 1 + 1e-9."""
    return f(x)


def inverse_branch(f: UnimodalMap, y, branch: int = 1, *, extrapolate: bool = False):
    """Solve f(x) = y on the monotone branch sign(x) = branch by bisection then Newton.

    With extrapolate=True values slightly below f(1) are continued past x = 1 by
    Newton on the polynomial; used internally by compositions near the box edge.
    """
    if branch not in (1, -1):
        raise ValueError(f"branch must be +1 or -1, got {branch}")
    yv = np.asarray(y, dtype=float)
    scalar = yv.ndim == 0
    yv = np.atleast_1d(yv)
    lo, hi = f.sigma0, 1.0
    tol = config.INVERSE_TOL
    outside = (yv < lo - tol) | (yv > hi + tol)
    if outside.any() and not extrapolate:
        bad = yv[outside][0]
        raise NoSolutionError(f"y = {bad:.15g} outside branch range [{lo:.15g}, {hi:.15g}]")
    yc = np.clip(yv, lo, hi)
    a = np.zeros_like(yc)
    b = np.ones_like(yc)
    for _ in range(64):
        mid = 0.5 * (a + b)
        right = f.raw(mid) > yc
        a = np.where(right, mid, a)
        b = np.where(right, b, mid)
    x = 0.5 * (a + b)
    target = np.minimum(yv, hi) if extrapolate else yc
    bound = config.INVERSE_ULPS * np.finfo(float).eps * (1.0 + np.abs(target))
    for _ in range(config.INVERSE_MAX_ITERS):
        r = f.raw(x) - target
        d = f.derivative(x)
        # flat points next to the critical point are already resolved by bisection
        live = (np.abs(r) > bound) & (np.abs(d) > 1e-8)
        if not live.any():
            break
        x = x - np.where(live, r / np.where(live, d, 1.0), 0.0)
    x = branch * x
    return float(x[0]) if scalar else x


class Renormalizability(NamedTuple):
    ok: bool
    interval: Optional[tuple[float, float]]


def renormalizable(f: UnimodalMap) -> Renormalizability:
    """Period-doubling test from the critical orbit: J = [-|f(1)|, |f(1)|]."""
    s = f.sigma0
    if not -1.0 < s < 0.0:
        return Renormalizability(False, None)
    a = abs(s)
    fa = float(f.raw(a))
    if fa <= a:
        return Renormalizability(False, None)
    if float(f.raw(fa)) > a + 1e-9:
        return Renormalizability(False, None)
    return Renormalizability(True, (-a, a))


def fit_even(x: np.ndarray, g: np.ndarray, degree: int) -> UnimodalMap:
    """Least-squares even polynomial with c0 = 1 fixed."""
    coef, *_ = np.linalg.lstsq(even_basis(x, degree), np.asarray(g) - 1.0, rcond=None)
    return UnimodalMap((1.0,) + tuple(coef))


def renormalize1d(f: UnimodalMap) -> tuple[UnimodalMap, float]:
    """Rf(x) = f(f(s x)) / s with s = f(1), refit on 4*degree Chebyshev nodes."""
    if not renormalizable(f).ok:
        raise ValueError("map is not period-doubling renormalizable")
    s = f.sigma0
    degree = max(f.degree, config.REFIT_MIN_DEGREE)
    nodes = chebyshev_nodes(4 * degree)
    rf = fit_even(nodes, f.raw(f.raw(s * nodes)) / s, degree)
    grid = np.linspace(0.0, 1.0, config.CHECK_GRID)
    err = float(np.max(np.abs(rf.raw(grid) - f.raw(f.raw(s * grid)) / s)))
    if err > config.REFIT_TOL:
        raise RefitError(f"refit residual {err:.3e} above {config.REFIT_TOL:.0e} at degree {degree}")
    return rf, s


def fixed_point_residual(f: UnimodalMap, grid: Optional[np.ndarray] = None) -> float:
    """sup |f - Rf| on a grid (without refitting Rf)."""
    x = np.linspace(0.0, 1.0, config.CHECK_GRID) if grid is None else grid
    s = f.sigma0
    return float(np.max(np.abs(f.raw(x) - f.raw(f.raw(s * x)) / s)))


@dataclass(frozen=True)
class FixedPointResult:
    fstar: UnimodalMap
    sigma: float
    residual: float
    iterations: int

    @property
    def scaling(self) -> float:
        """1/|sigma|, the linear rescaling factor of the fixed point."""
        return 1.0 / abs(self.sigma)


def _functional_residual(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    f = UnimodalMap((1.0,) + tuple(c))
    s = f.sigma0
    return f.raw(x) - f.raw(f.raw(s * x)) / s


def _functional_jacobian(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    # d/dc_j of f(x) - f(f(s x))/s with s = f(1) = 1 + sum c_j
    f = UnimodalMap((1.0,) + tuple(c))
    s = f.sigma0
    u = s * x
    v = f.raw(u)
    fv = f.raw(v)
    p = 2 * np.arange(1, len(c) + 1)
    inner = u[:, None] ** p + (f.derivative(u) * x)[:, None]
    outer = v[:, None] ** p + f.derivative(v)[:, None] * inner
    return x[:, None] ** p - outer / s + (fv / s**2)[:, None]


def solve_fixed_point(
    degree: int = config.FIXED_POINT_DEGREE,
    tol: float = config.FIXED_POINT_TOL,
    max_iters: int = config.FIXED_POINT_MAX_ITERS,
    guess: Sequence[float] = config.FIXED_POINT_GUESS,
) -> FixedPointResult:
    """Damped Gauss-Newton collocation of f(x) = f(f(s x))/s at 4*degree Chebyshev nodes."""
    if degree < config.FIXED_POINT_MIN_DEGREE:
        raise FixedPointError(f"degree {degree} below minimum {config.FIXED_POINT_MIN_DEGREE}")
    c = np.zeros(degree)
    g = list(guess)[1:]
    c[: len(g)] = g[:degree]
    nodes = chebyshev_nodes(4 * degree)
    grid = np.linspace(0.0, 1.0, config.CHECK_GRID)
    for it in range(max_iters + 1):
        sup = float(np.max(np.abs(_functional_residual(c, grid))))
        logger.debug("fixed point iteration %d: residual %.3e", it, sup)
        if sup <= tol:
            f = UnimodalMap((1.0,) + tuple(c))
            logger.info("fixed point converged in %d steps: sigma=%.12f residual=%.3e", it, f.sigma0, sup)
            return FixedPointResult(fstar=f, sigma=f.sigma0, residual=sup, iterations=it)
        if it == max_iters:
            break
        r = _functional_residual(c, nodes)
        step, *_ = np.linalg.lstsq(_functional_jacobian(c, nodes), -r, rcond=None)
        base = float(np.linalg.norm(r))
        lam = 1.0
        while lam > 1e-4:
            trial = c + lam * step
            if float(np.linalg.norm(_functional_residual(trial, nodes))) < base:
                break
            lam *= 0.5
        else:
            raise FixedPointError(f"Newton stalled at residual {sup:.3e} (degree {degree}, tol {tol:.0e})")
        c = trial
    raise FixedPointError(f"no convergence after {max_iters} iterations (residual {sup:.3e})")
