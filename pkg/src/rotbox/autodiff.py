"""Forward-mode dual numbers for algorithmic differentiation of the loss kernels.

The loss math is written against the generic helpers below (``sqrt``,
``log`` ...), so the same code path produces values on floats and exact
gradients on :class:`Dual` inputs. Central finite differences
(:func:`rotbox.losses.numeric_gradient`) stay the independent cross-check.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence, Union

import numpy as np

Scalar = Union[float, "Dual"]


class Dual:
    """Value plus partial derivatives w.r.t. a fixed seed vector."""

    __slots__ = ("val", "grad")

    def __init__(self, val: float, grad: np.ndarray):
        self.val = float(val)
        self.grad = np.asarray(grad, dtype=np.float64)

    def __repr__(self):
        return f"Dual({self.val}, grad={self.grad})"

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.grad + other.grad)
        return Dual(self.val + other, self.grad)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, -self.grad)

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.grad - other.grad)
        return Dual(self.val - other, self.grad)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.grad)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.val * other.grad + other.val * self.grad)
        return Dual(self.val * other, self.grad * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv, (self.grad - self.val * inv * other.grad) * inv)
        return Dual(self.val / other, self.grad / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        return Dual(other * inv, -other * inv * inv * self.grad)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("Dual powers support numeric exponents only")
        return Dual(self.val**p, p * self.val ** (p - 1) * self.grad)

    def __abs__(self):
        return Dual(abs(self.val), self.grad if self.val >= 0.0 else -self.grad)

    # -- comparisons (by value; branch points are measure-zero) --------------
    def __lt__(self, other):
        return self.val < _value(other)

    def __le__(self, other):
        return self.val <= _value(other)

    def __gt__(self, other):
        return self.val > _value(other)

    def __ge__(self, other):
        return self.val >= _value(other)


def _value(x: Scalar) -> float:
    return x.val if isinstance(x, Dual) else float(x)


def value(x: Scalar) -> float:
    """Underlying float of a Dual, or the float itself."""
    return _value(x)


def seed(values: Sequence[float]) -> list[Dual]:
    """Duals carrying identity partials, one per input component."""
    n = len(values)
    eye = np.eye(n)
    return [Dual(v, eye[i]) for i, v in enumerate(values)]


def gradient(f: Callable[..., Scalar], at: Sequence[float]) -> np.ndarray:
    """Gradient of ``f`` at ``at`` via one forward-mode sweep."""
    out = f(*seed(at))
    if isinstance(out, Dual):
        return out.grad.copy()
    return np.zeros(len(at), dtype=np.float64)


# -- elementary functions dispatching on float | Dual ------------------------

def sqrt(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        r = math.sqrt(x.val)
        return Dual(r, x.grad / (2.0 * r))
    return math.sqrt(x)


def log(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return Dual(math.log(x.val), x.grad / x.val)
    return math.log(x)


def log1p(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return Dual(math.log1p(x.val), x.grad / (1.0 + x.val))
    return math.log1p(x)


def sin(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return Dual(math.sin(x.val), math.cos(x.val) * x.grad)
    return math.sin(x)


def cos(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return Dual(math.cos(x.val), -math.sin(x.val) * x.grad)
    return math.cos(x)


def maximum(x: Scalar, y: Scalar) -> Scalar:
    return x if _value(x) >= _value(y) else y


def minimum(x: Scalar, y: Scalar) -> Scalar:
    return x if _value(x) <= _value(y) else y
