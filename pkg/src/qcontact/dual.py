"""Hyper-dual numbers and the elementary functions that act on them.

A hyper-dual number ``x = v + a*e1 + b*e2 + ab*e1*e2`` with ``e1**2 = e2**2 = 0``
carries a value, two directional first derivatives and the mixed second
derivative. Parts may themselves be hyper-dual numbers of a lower *tag*, which
is how derivatives of derivatives are taken without perturbation confusion:
objects of a lower tag are treated as constants by higher-tag arithmetic.
"""

from __future__ import annotations

import math
from numbers import Real

_FAST = (float, int)


def _is_real(x) -> bool:
    return type(x) in _FAST or (not isinstance(x, HyperDual) and isinstance(x, Real))


class HyperDual:
    __slots__ = ("value", "d_a", "d_b", "d_ab", "tag")

    def __init__(self, value, d_a=0.0, d_b=0.0, d_ab=0.0, tag=1):
        self.value = value
        self.d_a = d_a
        self.d_b = d_b
        self.d_ab = d_ab
        self.tag = tag

    def __repr__(self):
        return (f"HyperDual({self.value!r}, {self.d_a!r}, {self.d_b!r}, "
                f"{self.d_ab!r}, tag={self.tag})")

    def _same(self, other):
        """Return ``other`` as a same-tag operand, or None if it outranks self."""
        if isinstance(other, HyperDual):
            if other.tag == self.tag:
                return other
            if other.tag > self.tag:
                return None
        return HyperDual(other, 0.0, 0.0, 0.0, self.tag)

    def __add__(self, other):
        if _is_real(other):
            return HyperDual(self.value + other, self.d_a, self.d_b, self.d_ab, self.tag)
        o = self._same(other)
        if o is None:
            return NotImplemented
        return HyperDual(self.value + o.value, self.d_a + o.d_a,
                         self.d_b + o.d_b, self.d_ab + o.d_ab, self.tag)

    __radd__ = __add__

    def __neg__(self):
        return HyperDual(-self.value, -self.d_a, -self.d_b, -self.d_ab, self.tag)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if _is_real(other):
            return HyperDual(self.value - other, self.d_a, self.d_b, self.d_ab, self.tag)
        o = self._same(other)
        if o is None:
            return NotImplemented
        return HyperDual(self.value - o.value, self.d_a - o.d_a,
                         self.d_b - o.d_b, self.d_ab - o.d_ab, self.tag)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if _is_real(other):
            return HyperDual(self.value * other, self.d_a * other,
                             self.d_b * other, self.d_ab * other, self.tag)
        o = self._same(other)
        if o is None:
            return NotImplemented
        return HyperDual(
            self.value * o.value,
            self.value * o.d_a + self.d_a * o.value,
            self.value * o.d_b + self.d_b * o.value,
            self.value * o.d_ab + self.d_a * o.d_b + self.d_b * o.d_a + self.d_ab * o.value,
            self.tag,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if _is_real(other):
            if other == 0:
                raise ZeroDivisionError("hyper-dual division by zero")
            return self * (1.0 / other)
        o = self._same(other)
        if o is None:
            return NotImplemented
        return self * reciprocal(o)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, exponent):
        return power(self, exponent)

    def __rpow__(self, base):
        return power(base, self)


def tag_of(x) -> int:
    return x.tag if isinstance(x, HyperDual) else 0


def real_part(x) -> float:
    """Innermost floating-point value of a (possibly nested) hyper-dual."""
    while isinstance(x, HyperDual):
        x = x.value
    return float(x)


def parts(x, tag):
    """Split ``x`` into its four parts at ``tag``; lower-tag objects are constants."""
    if isinstance(x, HyperDual) and x.tag == tag:
        return x.value, x.d_a, x.d_b, x.d_ab
    return x, 0.0, 0.0, 0.0


def _chain(x: HyperDual, f0, f1, f2):
    # f0, f1, f2 are f, f', f'' evaluated at x.value
    return HyperDual(
        f0,
        f1 * x.d_a,
        f1 * x.d_b,
        f1 * x.d_ab + f2 * x.d_a * x.d_b,
        x.tag,
    )


def reciprocal(x):
    if isinstance(x, HyperDual):
        inv = reciprocal(x.value)
        inv2 = inv * inv
        return _chain(x, inv, -inv2, 2.0 * inv2 * inv)
    if x == 0:
        raise ZeroDivisionError("division by zero")
    return 1.0 / x


def sin(x):
    if isinstance(x, HyperDual):
        s, c = sin(x.value), cos(x.value)
        return _chain(x, s, c, -s)
    return math.sin(x)


def cos(x):
    if isinstance(x, HyperDual):
        s, c = sin(x.value), cos(x.value)
        return _chain(x, c, -s, -c)
    return math.cos(x)


def exp(x):
    if isinstance(x, HyperDual):
        e = exp(x.value)
        return _chain(x, e, e, e)
    return math.exp(x)


def log(x):
    if isinstance(x, HyperDual):
        inv = reciprocal(x.value)
        return _chain(x, log(x.value), inv, -(inv * inv))
    if x <= 0:
        raise ValueError(f"log of non-positive value {x!r}")
    return math.log(x)


def sqrt(x):
    if isinstance(x, HyperDual):
        s = sqrt(x.value)
        if real_part(s) == 0.0:
            raise ValueError("derivative of sqrt at 0")
        half_inv = 0.5 * reciprocal(s)
        return _chain(x, s, half_inv, -0.5 * half_inv * reciprocal(x.value))
    if x < 0:
        raise ValueError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def tanh(x):
    if isinstance(x, HyperDual):
        t = tanh(x.value)
        sech2 = 1.0 - t * t
        return _chain(x, t, sech2, -2.0 * t * sech2)
    return math.tanh(x)


def absolute(x):
    # derivative at 0 taken from the right
    return -x if real_part(x) < 0 else x


def _int_power(x, k: int):
    result = 1.0
    base = x
    while k:
        if k & 1:
            result = base * result
        k >>= 1
        if k:
            base = base * base
    return result


def power(x, y):
    """``x ** y`` for any mix of floats and hyper-duals."""
    if not isinstance(y, HyperDual):
        yf = float(y)
        if yf.is_integer() and abs(yf) <= 1024:
            k = int(yf)
            if k >= 0:
                return _int_power(x, k)
            return reciprocal(_int_power(x, -k))
        if isinstance(x, HyperDual):
            return _chain(x, power(x.value, yf), yf * power(x.value, yf - 1.0),
                          yf * (yf - 1.0) * power(x.value, yf - 2.0))
        return math.pow(x, yf)
    return exp(y * log(x))
