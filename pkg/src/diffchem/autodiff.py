"""Forward-mode automatic differentiation over a generic scalar.

A :class:`Dual` carries a primal value and a vector of directional
derivatives.  The value may itself be a :class:`Dual`, in which case the
tangent vector is an object array of Duals; nesting two levels gives exact
second derivatives (forward over forward).

Every numeric kernel in the package is written against plain arithmetic
plus the elementary functions below, so passing Duals in place of floats
differentiates the kernel.  Branches are decided on primal values only.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InputError, NonFiniteError, UnsupportedPrimitiveError

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def _objwrap(x):
    box = np.empty((), dtype=object)
    box[()] = x
    return box


class Dual:
    """Scalar ``value + sum_k tangents[k] * eps_k`` with ``eps_j * eps_k = 0``."""

    __slots__ = ("value", "tangents")
    # keeps numpy from swallowing Duals into elementwise loops of its own
    __array_ufunc__ = None

    def __init__(self, value, tangents):
        self.value = value
        self.tangents = tangents

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.tangents + other.tangents)
        if isinstance(other, numbers.Number):
            return Dual(self.value + other, self.tangents)
        if isinstance(other, np.ndarray):
            return other + _objwrap(self)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.tangents - other.tangents)
        if isinstance(other, numbers.Number):
            return Dual(self.value - other, self.tangents)
        if isinstance(other, np.ndarray):
            return _objwrap(self) - other
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Number):
            return Dual(other - self.value, -self.tangents)
        if isinstance(other, np.ndarray):
            return other - _objwrap(self)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.tangents * other.value + other.tangents * self.value,
            )
        if isinstance(other, numbers.Number):
            return Dual(self.value * other, self.tangents * other)
        if isinstance(other, np.ndarray):
            return other * _objwrap(self)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.value
            value = self.value * inv
            return Dual(value, (self.tangents - other.tangents * value) * inv)
        if isinstance(other, numbers.Number):
            inv = 1.0 / other
            return Dual(self.value * inv, self.tangents * inv)
        if isinstance(other, np.ndarray):
            return _objwrap(self) / other
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Number):
            inv = 1.0 / self.value
            return Dual(other * inv, self.tangents * (-other * inv * inv))
        if isinstance(other, np.ndarray):
            return other / _objwrap(self)
        return NotImplemented

    def __pow__(self, other):
        if isinstance(other, Dual):
            return exp(other * log(self))
        if isinstance(other, numbers.Real):
            if other == 0:
                return 1.0
            if other == 1:
                return self
            if other == 2:
                return self * self
            p = self.value ** (other - 1)
            return Dual(p * self.value, self.tangents * (other * p))
        return NotImplemented

    def __rpow__(self, other):
        if isinstance(other, numbers.Real):
            if other <= 0:
                raise DomainError("base of a differentiable power must be positive")
            return exp(self * math.log(other))
        return NotImplemented

    def __neg__(self):
        return Dual(-self.value, -self.tangents)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if primal(self) < 0 else self

    # -- comparisons act on primal values ----------------------------------
    def __lt__(self, other):
        return primal(self) < primal(other)

    def __le__(self, other):
        return primal(self) <= primal(other)

    def __gt__(self, other):
        return primal(self) > primal(other)

    def __ge__(self, other):
        return primal(self) >= primal(other)

    def __eq__(self, other):
        return primal(self) == primal(other)

    def __ne__(self, other):
        return primal(self) != primal(other)

    __hash__ = None

    def __float__(self):
        raise UnsupportedPrimitiveError(
            "implicit float conversion of a Dual would drop its derivatives; "
            "use the diffchem.autodiff elementary functions instead"
        )

    def __complex__(self):
        self.__float__()

    def __repr__(self):
        return f"Dual({self.value!r}, {self.tangents!r})"


# -- elementary functions ------------------------------------------------

def exp(x):
    if isinstance(x, Dual):
        e = exp(x.value)
        return Dual(e, x.tangents * e)
    return math.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(log(x.value), x.tangents * (1.0 / x.value))
    if x <= 0:
        raise DomainError(f"log of non-positive value {x}")
    return math.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        r = sqrt(x.value)
        return Dual(r, x.tangents * (0.5 / r))
    if x < 0:
        raise DomainError(f"sqrt of negative value {x}")
    return math.sqrt(x)


def erf(x):
    if isinstance(x, Dual):
        return Dual(erf(x.value), x.tangents * (_TWO_OVER_SQRT_PI * exp(-x.value * x.value)))
    return math.erf(x)


# -- inspection helpers --------------------------------------------------

def is_dual(x) -> bool:
    return isinstance(x, Dual)


def primal(x) -> float:
    """Innermost float value of a (possibly nested) Dual."""
    while isinstance(x, Dual):
        x = x.value
    return x


def magnitude(x) -> float:
    """Largest absolute value among the primal and every tangent component."""
    if isinstance(x, Dual):
        m = magnitude(x.value)
        t = x.tangents
        if t.dtype == object:
            for item in t:
                m = max(m, magnitude(item))
        elif t.size:
            m = max(m, float(np.max(np.abs(t))))
        return m
    return abs(x)


def tangent_vector(x, n: int) -> np.ndarray:
    """First-level tangents of ``x`` as floats; constants give zeros."""
    if isinstance(x, Dual):
        return np.array([primal(t) for t in x.tangents], dtype=float)
    return np.zeros(n)


def primal_array(a) -> np.ndarray:
    a = np.asarray(a, dtype=object) if not isinstance(a, np.ndarray) else a
    if a.dtype != object:
        return a.astype(float)
    return np.vectorize(primal, otypes=[float])(a) if a.size else a.astype(float)


# -- seeding and drivers -------------------------------------------------

@dataclass(frozen=True)
class DiffConfig:
    n_directions: int
    mode: str = "gradient"

    def __post_init__(self):
        if self.n_directions < 1:
            raise InputError("n_directions must be at least 1")
        if self.mode not in ("gradient", "jacobian", "hessian"):
            raise InputError(f"unknown differentiation mode {self.mode!r}")


def seed(x0: Sequence[float], config: DiffConfig | None = None) -> list[Dual]:
    """Lift a float vector to Duals with one unit tangent per entry."""
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    config = config or DiffConfig(max(n, 1))
    eye = np.eye(n)
    if config.mode != "hessian":
        return [Dual(float(x0[i]), eye[i].copy()) for i in range(n)]
    zero = np.zeros(n)
    out = []
    for i in range(n):
        inner = Dual(float(x0[i]), eye[i].copy())
        outer_t = np.empty(n, dtype=object)
        for j in range(n):
            outer_t[j] = Dual(eye[i, j], zero.copy())
        out.append(Dual(inner, outer_t))
    return out


def _check_finite(y):
    if not math.isfinite(primal(y)):
        raise NonFiniteError(f"function evaluated to non-finite value {primal(y)}", primal(y))
    if not math.isfinite(magnitude(y)):
        raise NonFiniteError("non-finite derivative encountered", primal(y))


def value_and_grad(f: Callable, x0: Sequence[float]) -> tuple[float, np.ndarray]:
    x0 = np.asarray(x0, dtype=float)
    y = f(seed(x0))
    _check_finite(y)
    return primal(y), tangent_vector(y, x0.size)


def grad(f: Callable, x0: Sequence[float]) -> np.ndarray:
    """Gradient of a scalar function, exact to roundoff."""
    return value_and_grad(f, x0)[1]


def jacobian(f: Callable, x0: Sequence[float]) -> np.ndarray:
    """Jacobian with one row per output component."""
    x0 = np.asarray(x0, dtype=float)
    ys = list(f(seed(x0)))
    rows = []
    for y in ys:
        _check_finite(y)
        rows.append(tangent_vector(y, x0.size))
    return np.array(rows).reshape(len(ys), x0.size)


def hessian(f: Callable, x0: Sequence[float], symmetrize: bool = True) -> np.ndarray:
    """Second partials by nesting forward mode inside forward mode.

    With ``symmetrize=False`` the raw nested result is returned, whose
    asymmetry measures roundoff in the mixed partials.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    y = f(seed(x0, DiffConfig(n, "hessian")))
    _check_finite(y)
    h = np.zeros((n, n))
    if isinstance(y, Dual):
        for j, t in enumerate(y.tangents):
            if isinstance(t, Dual):
                h[j] = tangent_vector(t, n)
    if symmetrize:
        h = 0.5 * (h + h.T)
    return h
