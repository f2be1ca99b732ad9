"""First-order forward-mode jets over numpy point batches.

A Jet carries values of shape (m,) and, optionally, gradients of shape (m, 3)
with respect to the three coordinates of the point batch it was seeded from.
A Jet without gradient is a constant and skips derivative work entirely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

Number = Union[float, int, np.ndarray]


def _as_jet(other) -> "Jet":
    return other if isinstance(other, Jet) else Jet(other)


def _scale(grad: Optional[np.ndarray], factor: np.ndarray) -> Optional[np.ndarray]:
    if grad is None:
        return None
    return grad * np.asarray(factor)[..., None]


def _add(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is None:
        return b
    if b is None:
        return a
    return a + b


class Jet:
    """Value and first derivatives of a scalar quantity over a batch of points."""

    __slots__ = ("val", "grad")
    # let numpy arrays defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, val: Number, grad: Optional[np.ndarray] = None):
        self.val = np.asarray(val, dtype=float)
        self.grad = None if grad is None else np.asarray(grad, dtype=float)

    @classmethod
    def variable(cls, val: Number, axis: int) -> "Jet":
        v = np.asarray(val, dtype=float)
        grad = np.zeros(v.shape + (3,))
        grad[..., axis] = 1.0
        return cls(v, grad)

    @property
    def is_constant(self) -> bool:
        return self.grad is None

    def _chain(self, value: np.ndarray, deriv: np.ndarray) -> "Jet":
        return Jet(value, _scale(self.grad, deriv))

    # arithmetic

    def __neg__(self) -> "Jet":
        return Jet(-self.val, None if self.grad is None else -self.grad)

    def __add__(self, other) -> "Jet":
        o = _as_jet(other)
        return Jet(self.val + o.val, _add(self.grad, o.grad))

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-_as_jet(other))

    def __rsub__(self, other) -> "Jet":
        return _as_jet(other) + (-self)

    def __mul__(self, other) -> "Jet":
        o = _as_jet(other)
        grad = _add(_scale(self.grad, o.val), _scale(o.grad, self.val))
        return Jet(self.val * o.val, grad)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        inv = 1.0 / self.val
        return self._chain(inv, -inv * inv)

    def __truediv__(self, other) -> "Jet":
        return self * _as_jet(other).reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return _as_jet(other) * self.reciprocal()

    def __pow__(self, exponent: float) -> "Jet":
        if exponent == 0:
            return Jet(np.ones_like(self.val))
        return self._chain(self.val ** exponent, exponent * self.val ** (exponent - 1))

    # elementary functions

    def sin(self) -> "Jet":
        return self._chain(np.sin(self.val), np.cos(self.val))

    def cos(self) -> "Jet":
        return self._chain(np.cos(self.val), -np.sin(self.val))

    def exp(self) -> "Jet":
        e = np.exp(self.val)
        return self._chain(e, e)

    def log(self) -> "Jet":
        return self._chain(np.log(self.val), 1.0 / self.val)

    def sqrt(self) -> "Jet":
        r = np.sqrt(self.val)
        return self._chain(r, 0.5 / r)

    def __repr__(self) -> str:
        return f"Jet(val={self.val!r}, grad={self.grad!r})"


def sin(x):
    return x.sin() if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Jet) else np.cos(x)


def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Jet) else np.log(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Jet) else np.sqrt(x)


def as_points(w) -> np.ndarray:
    """Coerce a point or batch of points to a float array of shape (m, 3)."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected points of shape (m, 3), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class Point3:
    """Three jets forming a batch of points in R^3."""

    x: Jet
    y: Jet
    z: Jet

    @classmethod
    def seed(cls, w) -> "Point3":
        """Identity-seeded jets: the gradient of each coordinate is a unit vector."""
        pts = as_points(w)
        return cls(Jet.variable(pts[:, 0], 0), Jet.variable(pts[:, 1], 1), Jet.variable(pts[:, 2], 2))

    @classmethod
    def constant(cls, w) -> "Point3":
        pts = as_points(w)
        return cls(Jet(pts[:, 0]), Jet(pts[:, 1]), Jet(pts[:, 2]))

    @classmethod
    def from_linear(cls, values: np.ndarray, jac: Optional[np.ndarray]) -> "Point3":
        """Build jets from values (m, 3) and gradients (m, 3, 3), row i for coordinate i."""
        if jac is None:
            return cls.constant(values)
        return cls(Jet(values[:, 0], jac[:, 0, :]), Jet(values[:, 1], jac[:, 1, :]), Jet(values[:, 2], jac[:, 2, :]))

    @property
    def size(self) -> int:
        return int(max(np.size(self.x.val), np.size(self.y.val), np.size(self.z.val)))

    @property
    def has_gradient(self) -> bool:
        return not (self.x.is_constant and self.y.is_constant and self.z.is_constant)

    def values(self) -> np.ndarray:
        m = self.size
        return np.stack([np.broadcast_to(c.val, (m,)) for c in (self.x, self.y, self.z)], axis=1).astype(float)

    def jacobian(self) -> np.ndarray:
        m = self.size
        rows = []
        for c in (self.x, self.y, self.z):
            rows.append(np.zeros((m, 3)) if c.grad is None else np.broadcast_to(c.grad, (m, 3)))
        return np.stack(rows, axis=1).astype(float)

    def pushforward(self, values: np.ndarray, local_jac: Optional[np.ndarray]) -> "Point3":
        """Jets of g(self) given g's values and Jacobian at self.values()."""
        if not self.has_gradient or local_jac is None:
            return Point3.constant(values)
        return Point3.from_linear(values, np.einsum("mij,mjk->mik", local_jac, self.jacobian()))
