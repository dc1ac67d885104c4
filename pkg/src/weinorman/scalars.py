"""Exact numbers of the form ``rat + surd*sqrt(2)`` with rational parts."""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

__all__ = ["Scalar", "as_scalar", "ZERO", "ONE", "SQRT2"]


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    # gmpy2.mpq and friends expose numerator/denominator
    num = getattr(x, "numerator", None)
    den = getattr(x, "denominator", None)
    if num is not None and den is not None and not isinstance(x, float):
        return Fraction(int(num), int(den))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


class Scalar:
    """Element of the field Q(sqrt 2).

    Both parts are kept as reduced :class:`fractions.Fraction` objects, so
    every field operation is exact.

    Parameters
    ----------
    rat : rational-like
        Rational part.
    surd : rational-like
        Coefficient multiplying ``sqrt(2)``.

    Examples
    --------
    >>> (Scalar(1, 1) * Scalar(1, -1))
    Scalar(-1)
    >>> Scalar(0, 1) ** 2
    Scalar(2)
    """

    __slots__ = ("rat", "surd")

    def __init__(self, rat=0, surd=0):
        object.__setattr__(self, "rat", _frac(rat))
        object.__setattr__(self, "surd", _frac(surd))

    def __setattr__(self, name, value):
        raise AttributeError("Scalar is immutable")

    # -- predicates ---------------------------------------------------------

    def is_zero(self) -> bool:
        return self.rat == 0 and self.surd == 0

    def is_rational(self) -> bool:
        return self.surd == 0

    def __bool__(self) -> bool:
        return not self.is_zero()

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return Scalar(self.rat + other.rat, self.surd + other.surd)

    __radd__ = __add__

    def __neg__(self):
        return Scalar(-self.rat, -self.surd)

    def __pos__(self):
        return self

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return Scalar(self.rat - other.rat, self.surd - other.surd)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        a, b, c, d = self.rat, self.surd, other.rat, other.surd
        return Scalar(a * c + 2 * b * d, a * d + b * c)

    __rmul__ = __mul__

    def conjugate(self) -> "Scalar":
        """Galois conjugate ``rat - surd*sqrt(2)``."""
        return Scalar(self.rat, -self.surd)

    def norm(self) -> Fraction:
        """Field norm ``rat**2 - 2*surd**2`` (zero only for zero)."""
        return self.rat * self.rat - 2 * self.surd * self.surd

    def inverse(self) -> "Scalar":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("Scalar division by zero")
        return Scalar(self.rat / n, -self.surd / n)

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return other
        return other * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        result, base = ONE, self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- comparison / hashing -----------------------------------------------

    def __eq__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return False
        return self.rat == other.rat and self.surd == other.surd

    def __hash__(self):
        if self.surd == 0:
            return hash(self.rat)
        return hash((self.rat, self.surd))

    def __float__(self) -> float:
        return float(self.rat) + float(self.surd) * math.sqrt(2.0)

    def __repr__(self):
        if self.surd == 0:
            return f"Scalar({self.rat})"
        return f"Scalar({self.rat}, {self.surd})"

    def __str__(self):
        if self.surd == 0:
            return str(self.rat)
        surd = f"{self.surd}*sqrt(2)" if self.surd != 1 else "sqrt(2)"
        if self.rat == 0:
            return surd if self.surd != -1 else "-sqrt(2)"
        sign = "+" if self.surd > 0 else "-"
        mag = abs(self.surd)
        surd = "sqrt(2)" if mag == 1 else f"{mag}*sqrt(2)"
        return f"{self.rat} {sign} {surd}"


def _coerce(x):
    if isinstance(x, Scalar):
        return x
    if isinstance(x, float):
        return NotImplemented
    try:
        return Scalar(_frac(x))
    except TypeError:
        return NotImplemented


def as_scalar(x) -> Scalar:
    """Convert ints, fractions and Scalars to :class:`Scalar`."""
    s = _coerce(x)
    if s is NotImplemented:
        raise TypeError(f"cannot convert {x!r} to Scalar")
    return s


ZERO = Scalar(0)
ONE = Scalar(1)
SQRT2 = Scalar(0, 1)
