"""Three-dimensional Henon-like maps F(x,y,z) = (f(x) - eps(w), x, delta(w)) and their conjugations."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from renormlab import config
from renormlab.errors import BudgetError, ConjugationError
from renormlab.jets import Jet, Point3, as_points
from renormlab.maps.fields import Box3, ScalarField1, ScalarField2, ScalarField3
from renormlab.maps.unimodal import UnimodalMap

logger = logging.getLogger(__name__)


class Composite(Protocol):
    """Evaluation rule for maps defined by composition rather than by (f, eps, delta) formulas."""

    def apply(self, p: Point3) -> Point3: ...


@dataclass(frozen=True)
class HenonMap3:
    f: UnimodalMap
    eps: ScalarField3
    delta: ScalarField3
    box: Box3
    name: str = "F"
    composite: Optional[Composite] = None

    def apply(self, p: Point3) -> Point3:
        """Unchecked evaluation on jets."""
        if self.composite is not None:
            return self.composite.apply(p)
        return Point3(self.f.raw(p.x) - self.eps(p), p.x, self.delta(p))

    def evaluate(self, w) -> np.ndarray:
        return self.apply(Point3.constant(as_points(w))).values()

    def evaluate_jac(self, w) -> tuple[np.ndarray, np.ndarray]:
        out = self.apply(Point3.seed(as_points(w)))
        return out.values(), out.jacobian()

    @property
    def is_degenerate(self) -> bool:
        """True for eps = delta = 0 base maps, which are not diffeomorphisms."""
        return self.composite is None and self.eps.is_zero and self.delta.is_zero

    def check_invariant_box(self, lattice: int = 5) -> float:
        """Worst excursion of F(lattice) outside B; logs a warning instead of failing."""
        pts = self.box.lattice(lattice)
        vals = self.evaluate(pts)
        excess = np.maximum(vals - self.box.upper, self.box.lower - vals).max(initial=0.0)
        if excess > config.DOMAIN_SLACK:
            logger.warning("%s: sampled F(B) leaves B by %.3e", self.name, excess)
        return float(max(excess, 0.0))


def eval_map(F: HenonMap3, w) -> np.ndarray:
    """F(w) for w in B (tolerance 1e-9). Returns shape (3,) for a single point."""
    pts = as_points(w)
    F.box.require(pts)
    out = F.evaluate(pts)
    return out[0] if np.ndim(w) == 1 else out


def jacobian(F: HenonMap3, w) -> tuple[np.ndarray, np.ndarray]:
    """DF(w) and det DF = eps_y * delta_z - eps_z * delta_y (row two of DF is (1, 0, 0))."""
    pts = as_points(w)
    F.box.require(pts)
    _, J = F.evaluate_jac(pts)
    det = J[:, 0, 2] * J[:, 2, 1] - J[:, 0, 1] * J[:, 2, 2]
    if np.ndim(w) == 1:
        return J[0], float(det[0])
    return J, det


def class_n_residual(F: HenonMap3, w, *, check_domain: bool = True) -> np.ndarray:
    """delta_y(F(w)) + delta_z(F(w)) * delta_x(w)."""
    pts = as_points(w)
    vals, J = F.evaluate_jac(pts)
    if check_domain:
        F.box.require(vals, "F(w)")
    _, J_next = F.evaluate_jac(vals)
    res = J_next[:, 2, 1] + J_next[:, 2, 2] * J[:, 2, 0]
    return float(res[0]) if np.ndim(w) == 1 else res


def make_example_N(
    eta: ScalarField1,
    C: float,
    f: UnimodalMap,
    eps: Optional[ScalarField3] = None,
    *,
    budget: float = config.EPS_BUDGET,
    box: Optional[Box3] = None,
    seed: int = config.SEED,
) -> HenonMap3:
    """Class-N map with delta(x, y, z) = eta(C y - z) + C x."""
    span = abs(C) + config.MIN_BOX_HALF_HEIGHT
    size = max(eta.sup_norm(-span, span), abs(C))
    if size > budget + 1e-12:
        raise BudgetError(f"max(|eta|, |C|) = {size:.6g} exceeds budget {budget:g}")
    C = float(C)
    delta = ScalarField3(lambda p: eta(C * p.y - p.z) + C * p.x, name=f"eta(C*y-z)+C*x, eta={eta.describe()}, C={C:g}")
    eps = eps or ScalarField3.zero()
    F = HenonMap3(f=f, eps=eps, delta=delta, box=box or Box3.for_delta(delta), name="example-N")
    pts = F.box.sample(np.random.default_rng(seed), 100)
    inside = F.box.contains(F.evaluate(pts))
    worst = float(np.max(np.abs(class_n_residual(F, pts[inside], check_domain=False)), initial=0.0))
    logger.debug("example-N residual on %d samples: %.3e", int(inside.sum()), worst)
    if worst > 1e-10:
        raise ValueError(f"example-N construction has class-N residual {worst:.3e}")
    return F


class ConjugatedMap:
    """Phi o F o Phi^-1 with Phi(x, y, z) = (x, y, phi(y, z))."""

    def __init__(self, base: HenonMap3, phi: ScalarField2):
        self.base = base
        self.phi = phi

    def unphi(self, y: Jet, zeta: Jet) -> Jet:
        """Solve phi(y, z) = zeta for z by Newton; jets by implicit differentiation."""
        yv = np.broadcast_to(y.val, np.shape(zeta.val)).astype(float)
        zv = np.array(zeta.val, dtype=float, copy=True)
        for _ in range(config.CONJUGATION_MAX_ITERS):
            dz = self.phi.partial_z(yv, zv)
            if np.any(np.abs(dz) < config.CONJUGATION_MIN_DZ):
                raise ConjugationError(f"|d phi/dz| below {config.CONJUGATION_MIN_DZ:g}")
            step = (self.phi(yv, zv) - zeta.val) / dz
            zv = zv - step
            if np.max(np.abs(step), initial=0.0) <= 1e-15 * (1.0 + np.max(np.abs(zv), initial=0.0)):
                break
        else:
            raise ConjugationError(f"Newton for phi^-1 did not converge in {config.CONJUGATION_MAX_ITERS} steps")
        if y.grad is None and zeta.grad is None:
            return Jet(zv)
        pz = self.phi.partial_z(yv, zv)
        py = self.phi.partial_y(yv, zv)
        grad = np.zeros(zv.shape + (3,))
        if zeta.grad is not None:
            grad = grad + zeta.grad
        if y.grad is not None:
            grad = grad - py[:, None] * y.grad
        return Jet(zv, grad / pz[:, None])

    def apply(self, p: Point3) -> Point3:
        z = self.unphi(p.y, p.z)
        out = self.base.apply(Point3(p.x, p.y, z))
        return Point3(out.x, out.y, self.phi(out.y, out.z))


def conjugate(F: HenonMap3, phi: ScalarField2) -> HenonMap3:
    """F~ = Phi o F o Phi^-1; the result keeps the Henon form in its first two coordinates."""
    pts = F.box.lattice(17)
    dz = phi.partial_z(pts[:, 1], pts[:, 2])
    if np.min(np.abs(dz)) < config.CONJUGATION_MIN_DZ:
        raise ConjugationError("phi is not invertible in z on the box")
    zeta = phi(pts[:, 1], pts[:, 2])
    lo, hi = float(np.min(zeta)), float(np.max(zeta))
    pad = 0.01 * (hi - lo)
    box = Box3(F.box.x, F.box.y, (lo - pad, hi + pad))
    conj = ConjugatedMap(F, phi)
    f = F.f

    def eps_rule(p: Point3) -> Jet:
        return f.raw(p.x) - conj.apply(p).x

    def delta_rule(p: Point3) -> Jet:
        return conj.apply(p).z

    return HenonMap3(
        f=f,
        eps=ScalarField3(eps_rule, name=f"{F.eps.name} o Phi^-1"),
        delta=ScalarField3(delta_rule, name=f"phi(x, {F.delta.name} o Phi^-1)"),
        box=box,
        name=f"Phi {F.name} Phi^-1",
        composite=conj,
    )
