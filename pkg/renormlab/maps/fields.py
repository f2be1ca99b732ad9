"""Boxes and scalar fields evaluated on jets."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from renormlab import config
from renormlab.errors import DomainError
from renormlab.jets import Jet, Point3, as_points, sin

logger = logging.getLogger(__name__)

Interval = tuple[float, float]


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box x-interval x y-interval x z-interval."""

    x: Interval = (-1.0, 1.0)
    y: Interval = (-1.0, 1.0)
    z: Interval = (-config.MIN_BOX_HALF_HEIGHT, config.MIN_BOX_HALF_HEIGHT)

    def __post_init__(self):
        for name in ("x", "y", "z"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"Box3 {name}-interval must be nonempty, got ({lo}, {hi})")

    @classmethod
    def default(cls, h: float = config.MIN_BOX_HALF_HEIGHT) -> "Box3":
        if h <= 0:
            raise ValueError(f"box half-height must be positive, got {h}")
        return cls(z=(-h, h))

    @classmethod
    def for_delta(cls, delta: "ScalarField3") -> "Box3":
        """[-1,1]^2 x [-h,h] with h = max(4 |delta|, 0.05), the norm sampled on the thinnest slab."""
        norm = delta.sup_norm(cls.default())
        return cls.default(max(config.BOX_HEIGHT_FACTOR * norm, config.MIN_BOX_HALF_HEIGHT))

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.x[0], self.y[0], self.z[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.x[1], self.y[1], self.z[1]])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, w, tol: float = config.DOMAIN_SLACK) -> np.ndarray:
        pts = as_points(w)
        return np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)

    def require(self, w, what: str = "point") -> None:
        inside = self.contains(w)
        if not inside.all():
            bad = as_points(w)[~inside][0]
            raise DomainError(f"{what} {np.array2string(bad, precision=6)} outside box {self.to_json()}")

    def inflate(self, fraction: float) -> "Box3":
        pad = fraction * 0.5 * (self.upper - self.lower)
        lo, hi = self.lower - pad, self.upper + pad
        return Box3((lo[0], hi[0]), (lo[1], hi[1]), (lo[2], hi[2]))

    def lattice(self, n: int) -> np.ndarray:
        """n^3 evenly spaced points including the faces, shape (n^3, 3)."""
        axes = [np.linspace(lo, hi, n) for lo, hi in (self.x, self.y, self.z)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def sample(self, rng: np.random.Generator, count: int, shrink: float = 1.0) -> np.ndarray:
        c = self.center
        half = 0.5 * shrink * (self.upper - self.lower)
        return c + rng.uniform(-1.0, 1.0, size=(count, 3)) * half

    def to_json(self) -> dict:
        return {"x": list(self.x), "y": list(self.y), "z": list(self.z)}


JetRule = Callable[[Point3], Jet]


def _monomial(p: Point3, i: int, j: int, k: int) -> Jet:
    out = Jet(1.0)
    for base, power in ((p.x, i), (p.y, j), (p.z, k)):
        if power:
            out = out * base**power
    return out


@dataclass(frozen=True)
class ScalarField3:
    """A real function of w = (x, y, z) evaluated on jets, so values and gradients come together."""

    rule: JetRule
    name: str = "field"
    terms: Optional[Mapping[tuple[int, int, int], float]] = field(default=None, compare=False)

    def __call__(self, p: Point3) -> Jet:
        out = self.rule(p)
        if not isinstance(out, Jet):
            out = Jet(out)
        return out

    def values(self, w) -> np.ndarray:
        pts = as_points(w)
        return np.broadcast_to(self(Point3.constant(pts)).val, (len(pts),)).copy()

    def gradient(self, w) -> np.ndarray:
        pts = as_points(w)
        out = self(Point3.seed(pts))
        if out.grad is None:
            return np.zeros((len(pts), 3))
        return np.broadcast_to(out.grad, (len(pts), 3)).copy()

    def sup_norm(self, box: Box3, lattice: int = 9) -> float:
        return float(np.max(np.abs(self.values(box.lattice(lattice)))))

    def __add__(self, other: "ScalarField3") -> "ScalarField3":
        return ScalarField3(lambda p: self(p) + other(p), name=f"{self.name}+{other.name}")

    @property
    def is_zero(self) -> bool:
        return self.terms is not None and not any(self.terms.values())

    @classmethod
    def zero(cls) -> "ScalarField3":
        return cls(lambda p: Jet(0.0), name="0", terms={})

    @classmethod
    def polynomial(cls, terms: Mapping[tuple[int, int, int], float], name: str = "poly") -> "ScalarField3":
        """sum of c * x^i y^j z^k over terms {(i, j, k): c}."""
        items = tuple((tuple(int(e) for e in key), float(c)) for key, c in terms.items() if c)

        def rule(p: Point3) -> Jet:
            out = Jet(0.0)
            for (i, j, k), c in items:
                out = out + c * _monomial(p, i, j, k)
            return out

        return cls(rule, name=name, terms=dict(items))

    @classmethod
    def linear_z(cls, b: float) -> "ScalarField3":
        return cls.polynomial({(0, 0, 1): b}, name=f"{b:g}*z")


@dataclass(frozen=True)
class ScalarField1:
    """Real function of one variable: a polynomial or an amplitude times sine."""

    kind: str = "poly"
    coeffs: tuple[float, ...] = (0.0,)
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("poly", "sin"):
            raise ValueError(f"Unknown ScalarField1 kind: {self.kind}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @classmethod
    def sine(cls, amplitude: float) -> "ScalarField1":
        return cls(kind="sin", amplitude=float(amplitude))

    def __call__(self, t):
        if self.kind == "sin":
            return self.amplitude * sin(t)
        acc = Jet(self.coeffs[-1]) if isinstance(t, Jet) else np.full(np.shape(t), self.coeffs[-1])
        for c in reversed(self.coeffs[:-1]):
            acc = acc * t + c
        return acc

    def sup_norm(self, lo: float, hi: float, points: int = 513) -> float:
        return float(np.max(np.abs(self(np.linspace(lo, hi, points)))))

    def describe(self) -> str:
        if self.kind == "sin":
            return f"{self.amplitude:g}*sin(t)"
        return "+".join(f"{c:g}*t^{i}" for i, c in enumerate(self.coeffs) if c) or "0"


@dataclass(frozen=True)
class ScalarField2:
    """Polynomial phi(y, z) = sum of c * y^j z^k over terms {(j, k): c}."""

    terms: Mapping[tuple[int, int], float]

    def __post_init__(self):
        object.__setattr__(self, "terms", {(int(j), int(k)): float(c) for (j, k), c in dict(self.terms).items() if c})

    @classmethod
    def identity(cls) -> "ScalarField2":
        return cls({(0, 1): 1.0})

    def __call__(self, y, z):
        out = Jet(0.0) if isinstance(y, Jet) or isinstance(z, Jet) else 0.0
        for (j, k), c in self.terms.items():
            out = out + c * (y**j if j else 1.0) * (z**k if k else 1.0)
        return out

    def partial_y(self, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        y, z = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
        out = np.zeros(np.broadcast(y, z).shape)
        for (j, k), c in self.terms.items():
            if j:
                out = out + c * j * y ** (j - 1) * z**k
        return out

    def partial_z(self, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        y, z = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
        out = np.zeros(np.broadcast(y, z).shape)
        for (j, k), c in self.terms.items():
            if k:
                out = out + c * k * y**j * z ** (k - 1)
        return out
