"""Horizontal-like straightening H, pre-renormalization and the renormalization step for Henon-like maps."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from renormlab import config
from renormlab.errors import DomainError, RenormLabError, StraighteningError
from renormlab.jets import Jet, Point3, as_points
from renormlab.maps.fields import ScalarField3
from renormlab.maps.hmap3 import HenonMap3
from renormlab.maps.unimodal import UnimodalMap, chebyshev_nodes, fit_even, inverse_branch, renormalizable

logger = logging.getLogger(__name__)


def _rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched matrix product (m,i,j) x (m,j,k)."""
    return np.einsum("mij,mjk->mik", a, b)


@dataclass
class InverseSolve:
    """H^-1 at a batch v: the preimage u, F(u) and derivatives when requested."""

    u: np.ndarray
    Fu: np.ndarray
    DFu: Optional[np.ndarray]
    DHinv: Optional[np.ndarray]
    iterations: int
    residual: float


class Straightening:
    """H(u) = (pi_x F(u), u_y, u_z - p(u_y)) with p(y) = delta(y, f^-1(y), 0) for one level F."""

    def __init__(self, F: HenonMap3):
        if not renormalizable(F.f).ok:
            raise ValueError(f"{F.name}: 1D part is not period-doubling renormalizable (f(1) = {F.f.sigma0:.6g})")
        self.F = F
        self.f: UnimodalMap = F.f
        self.sigma: float = F.f.sigma0
        self.escape_box = F.box.inflate(config.ESCAPE_MARGIN)
        self.tol = config.STRAIGHTEN_TOL
        self.max_iters = config.STRAIGHTEN_MAX_ITERS

    def shear(self, y, *, slope: bool = True) -> tuple[np.ndarray, Optional[np.ndarray]]:
        """p(y) and q(y) = p'(y) = delta_x + delta_y * (f^-1)'(y) along the branch."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        x = inverse_branch(self.f, y, extrapolate=True)
        pts = np.stack([y, x, np.zeros_like(y)], axis=1)
        if not slope:
            return self.F.evaluate(pts)[:, 2], None
        vals, J = self.F.evaluate_jac(pts)
        return vals[:, 2], J[:, 2, 0] + J[:, 2, 1] / self.f.derivative(x)

    def h(self, w) -> np.ndarray:
        w = as_points(w)
        p, _ = self.shear(w[:, 1], slope=False)
        return np.stack([self.F.evaluate(w)[:, 0], w[:, 1], w[:, 2] - p], axis=1)

    def _solution(self, v, u, Fu, DFu, q, jac: bool, it: int, err: float) -> InverseSolve:
        DHinv = None
        if jac:
            a = DFu[:, 0, :]
            DHinv = np.zeros((len(v), 3, 3))
            DHinv[:, 0, 0] = 1.0 / a[:, 0]
            DHinv[:, 0, 1] = -(a[:, 1] + a[:, 2] * q) / a[:, 0]
            DHinv[:, 0, 2] = -a[:, 2] / a[:, 0]
            DHinv[:, 1, 1] = 1.0
            DHinv[:, 2, 1] = q
            DHinv[:, 2, 2] = 1.0
        return InverseSolve(u=u, Fu=Fu, DFu=DFu, DHinv=DHinv, iterations=it, residual=err)

    def noise_floor(self, vx: np.ndarray, Fx: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Round-off in X_next = f^-1(vx + f(X) - Fx): ulps of the argument over |f'(X)|."""
        scale = 1.0 + np.abs(vx) + np.abs(Fx)
        slope = np.maximum(np.abs(self.f.derivative(X)), 1e-300)
        return config.STRAIGHTEN_ULPS * np.finfo(float).eps * scale / slope

    def invert(self, v: np.ndarray, p: np.ndarray, q: Optional[np.ndarray] = None, *, jac: bool = False) -> InverseSolve:
        """Solve pi_x F(X, v_y, v_z + p) = v_x by X <- f^-1(v_x + eps(X, ...)).

        Fixed-point sweeps first, Newton on pi_x F after STRAIGHTEN_FIXED_STEPS.
        Converged when every step is below max(tol, round-off floor). A run of
        non-decreasing steps within STRAIGHTEN_PLATEAU times that bound is a
        round-off plateau and is accepted too. The iterate that was last
        evaluated is returned, so Fu is exactly F(u).
        """
        vx, vy = v[:, 0], v[:, 1]
        zz = v[:, 2] + p
        X = inverse_branch(self.f, vx, extrapolate=True)
        err = best = np.inf
        stall = 0
        for it in range(1, self.max_iters + 1):
            u = np.stack([X, vy, zz], axis=1)
            if not self.escape_box.contains(u).all():
                bad = u[~self.escape_box.contains(u)][0]
                raise DomainError(f"{self.F.name}: H^-1 left the box at {np.array2string(bad, precision=6)}")
            newton = it > config.STRAIGHTEN_FIXED_STEPS
            if jac or newton:
                Fu, DFu = self.F.evaluate_jac(u)
            else:
                Fu, DFu = self.F.evaluate(u), None
            if newton:
                X_next = X - (Fu[:, 0] - vx) / DFu[:, 0, 0]
            else:
                X_next = inverse_branch(self.f, vx + self.f.raw(X) - Fu[:, 0], extrapolate=True)
            step = np.abs(X_next - X)
            err = float(np.max(step, initial=0.0))
            bound = np.maximum(self.tol, self.noise_floor(vx, Fu[:, 0], X_next))
            if np.all(step <= bound):
                return self._solution(v, u, Fu, DFu, q, jac, it, err)
            if err < best:
                best, stall = err, 0
            else:
                stall += 1
            if stall >= config.STRAIGHTEN_STALL and np.all(step <= config.STRAIGHTEN_PLATEAU * bound):
                logger.debug("%s: straightening plateau at %.3e after %d steps", self.F.name, err, it)
                return self._solution(v, u, Fu, DFu, q, jac, it, err)
            X = X_next
        raise StraighteningError(f"{self.F.name}: straightening did not contract in {self.max_iters} steps", residual=err)

    def h_inverse(self, v) -> np.ndarray:
        v = as_points(v)
        p, _ = self.shear(v[:, 1], slope=False)
        return self.invert(v, p).u

    def psi_pair(self, w: np.ndarray, jac_in: Optional[np.ndarray] = None):
        """psi_v(w) = H^-1(sigma w) and psi_c = F o psi_v, with Jacobians chained onto jac_in."""
        s = self.sigma
        v = s * w
        need = jac_in is not None
        p, q = self.shear(v[:, 1], slope=need)
        sol = self.invert(v, p, q, jac=need)
        if not need:
            return sol.u, None, sol.Fu, None
        Dv = s * sol.DHinv
        Dc = _rows(sol.DFu, Dv)
        return sol.u, _rows(Dv, jac_in), sol.Fu, _rows(Dc, jac_in)

    def prerenormalized(self, v: np.ndarray, *, jac: bool = False) -> tuple[np.ndarray, Optional[np.ndarray]]:
        """PRF(v) = H o F^2 o H^-1 (v) and its Jacobian in v."""
        m = len(v)
        ps, qs = self.shear(np.concatenate([v[:, 1], v[:, 0]]), slope=jac)
        sol = self.invert(v, ps[:m], None if qs is None else qs[:m], jac=jac)
        if jac:
            G, DG = self.F.evaluate_jac(sol.Fu)
            G2, DG2 = self.F.evaluate_jac(G)
        else:
            G, DG = self.F.evaluate(sol.Fu), None
            G2, DG2 = self.F.evaluate(G), None
        vals = np.stack([G2[:, 0], v[:, 0], G[:, 2] - ps[m:]], axis=1)
        if not jac:
            return vals, None
        inner = _rows(sol.DFu, sol.DHinv)
        J = np.zeros((m, 3, 3))
        J[:, 0, :] = np.einsum("mi,mij,mjk->mk", DG2[:, 0, :], DG, inner)
        J[:, 1, 0] = 1.0
        J[:, 2, :] = np.einsum("mj,mjk->mk", DG[:, 2, :], inner)
        J[:, 2, 0] -= qs[m:]
        return vals, J


class PreRenormalized:
    """H o F^2 o H^-1 as an evaluable map on jets."""

    def __init__(self, link: Straightening):
        self.link = link

    def apply(self, p: Point3) -> Point3:
        v = p.values()
        vals, J = self.link.prerenormalized(v, jac=p.has_gradient)
        vals[:, 1] = v[:, 0]
        return p.pushforward(vals, J)


class Renormalized:
    """RF(w) = PRF(sigma w) / sigma; the y-coordinate is set to x exactly."""

    def __init__(self, link: Straightening):
        self.link = link

    def apply(self, p: Point3) -> Point3:
        s = self.link.sigma
        w = p.values()
        vals, J = self.link.prerenormalized(s * w, jac=p.has_gradient)
        vals = vals / s
        vals[:, 1] = w[:, 0]
        return p.pushforward(vals, J)


def hmap(F: HenonMap3) -> Straightening:
    return Straightening(F)


def prerenormalize(F: HenonMap3) -> PreRenormalized:
    return PreRenormalized(Straightening(F))


def fit_slice(F: HenonMap3, degree: int) -> tuple[UnimodalMap, float]:
    """Even fit with c0 = 1 of x -> pi_x F(x, 0, 0) on symmetric Chebyshev nodes; returns the sup residual."""
    nodes = chebyshev_nodes(4 * degree)
    x = np.concatenate([-nodes, nodes])
    pts = np.stack([x, np.zeros_like(x), np.zeros_like(x)], axis=1)
    vals = F.evaluate(pts)
    if np.any(vals[:, 1] != x):
        raise RenormLabError(f"{F.name}: Henon form lost, pi_y F(w) != x")
    fitted = fit_even(x, vals[:, 0], degree)
    grid = np.linspace(-1.0, 1.0, config.CHECK_GRID)
    check = np.stack([grid, np.zeros_like(grid), np.zeros_like(grid)], axis=1)
    residual = float(np.max(np.abs(fitted.raw(grid) - F.evaluate(check)[:, 0])))
    return fitted, residual


@dataclass
class Renormalization:
    """One renormalization step: the link that defines psi^{k+1} and the renormalized map."""

    link: Straightening
    renormalized: HenonMap3
    sigma: float
    fit_residual: float


def renormalize_step(F: HenonMap3, name: str = "RF") -> Renormalization:
    link = Straightening(F)
    composite = Renormalized(link)
    sliced = HenonMap3(f=F.f, eps=ScalarField3.zero(), delta=ScalarField3.zero(), box=F.box, name=name, composite=composite)
    f_next, residual = fit_slice(sliced, max(F.f.degree, config.REFIT_MIN_DEGREE))
    logger.debug("%s: sigma=%.12f slice fit residual %.3e", name, link.sigma, residual)

    def eps_rule(p: Point3) -> Jet:
        return f_next.raw(p.x) - composite.apply(p).x

    def delta_rule(p: Point3) -> Jet:
        return composite.apply(p).z

    RF = HenonMap3(
        f=f_next,
        eps=ScalarField3(eps_rule, name=f"eps[{name}]"),
        delta=ScalarField3(delta_rule, name=f"delta[{name}]"),
        box=F.box,
        name=name,
        composite=composite,
    )
    return Renormalization(link=link, renormalized=RF, sigma=link.sigma, fit_residual=residual)


def renormalize(F: HenonMap3) -> tuple[HenonMap3, float]:
    """RF = Lambda o H o F^2 o H^-1 o Lambda^-1 wrapped as a Henon-like map, with sigma0 = f(1)."""
    step = renormalize_step(F)
    return step.renormalized, step.sigma
