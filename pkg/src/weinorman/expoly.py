"""Sparse polynomials in ``u``/``a`` variables times exponentials of linear forms.

An :class:`ExpPoly` is a finite sum of terms

    c * sqrt(2)^s * prod(u_i^e_i) * prod(a_j^f_j) * exp(sum(l_k * u_k))

with exact rational ``c``.  The exponential's linear form may only involve
the variables the :class:`PolyRing` declares as exponential (the Cartan
block in a Wei-Norman system).  ``a`` variables carry the time-dependent
coefficients; in Wei-Norman right-hand sides they enter linearly.

Monomials are packed into a single Python integer, one fixed-width field per
variable; multiplying two monomials is one integer addition.  Exponents of
ordinary variables must stay below ``2**(FIELD_BITS-1)`` and exponential
coefficients must stay inside ``(-2**(FIELD_BITS-1), 2**(FIELD_BITS-1))``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import gmpy2
from gmpy2 import mpq

from .scalars import Scalar, as_scalar

__all__ = ["PolyRing", "ExpPoly", "Decoded"]

FIELD_BITS = 16
_MASK = (1 << FIELD_BITS) - 1
_BIAS = 1 << (FIELD_BITS - 1)

# (u exponents, a exponents, sqrt2 power, exponential linear form)
Decoded = Tuple[Tuple[int, ...], Tuple[int, ...], int, Tuple[int, ...]]


def _to_mpq(c) -> mpq:
    if isinstance(c, type(mpq())):
        return c
    if isinstance(c, Fraction):
        return mpq(c.numerator, c.denominator)
    if isinstance(c, int):
        return mpq(c)
    if isinstance(c, str):
        return mpq(Fraction(c))
    raise TypeError(f"cannot use {c!r} as an exact coefficient")


class PolyRing:
    """Variable layout shared by a family of :class:`ExpPoly` values.

    Parameters
    ----------
    n_u : int
        Number of ``u`` variables (``u1..un``).
    n_a : int
        Number of formal coefficient variables (``a1..an``).
    exp_vars : sequence of int
        0-based ``u`` indices allowed inside exponentials.
    """

    def __init__(self, n_u: int, n_a: int = 0, exp_vars: Sequence[int] = ()):
        self.n_u = int(n_u)
        self.n_a = int(n_a)
        self.exp_vars = tuple(int(i) for i in exp_vars)
        if any(i < 0 or i >= self.n_u for i in self.exp_vars):
            raise ValueError("exponential variables must be u indices")
        self._exp_pos = {v: k for k, v in enumerate(self.exp_vars)}
        self.s_field = self.n_u + self.n_a
        self.s_shift = self.s_field * FIELD_BITS
        self._exp_base = self.s_field + 1
        zero = 0
        for k in range(len(self.exp_vars)):
            zero |= _BIAS << ((self._exp_base + k) * FIELD_BITS)
        self.zero_key = zero
        self._decode_cache: Dict[int, Decoded] = {}

    # -- identity -----------------------------------------------------------

    def signature(self):
        return (self.n_u, self.n_a, self.exp_vars)

    def __eq__(self, other):
        return isinstance(other, PolyRing) and self.signature() == other.signature()

    def __hash__(self):
        return hash(self.signature())

    def __repr__(self):
        return f"PolyRing(n_u={self.n_u}, n_a={self.n_a}, exp_vars={self.exp_vars})"

    # -- keys ---------------------------------------------------------------

    def key(self, u: Mapping[int, int] = None, a: Mapping[int, int] = None,
            s: int = 0, form: Mapping[int, int] = None) -> int:
        """Pack a monomial given sparse exponent maps (0-based indices)."""
        k = self.zero_key
        for i, e in (u or {}).items():
            if not 0 <= i < self.n_u:
                raise IndexError(f"u index {i} out of range")
            if e < 0:
                raise ValueError("negative polynomial exponent")
            k += e << (i * FIELD_BITS)
        for j, e in (a or {}).items():
            if not 0 <= j < self.n_a:
                raise IndexError(f"a index {j} out of range")
            if e < 0:
                raise ValueError("negative polynomial exponent")
            k += e << ((self.n_u + j) * FIELD_BITS)
        if s:
            k += s << self.s_shift
        for i, c in (form or {}).items():
            if i not in self._exp_pos:
                raise ValueError(f"u{i + 1} is not an exponential variable of this ring")
            k += c << ((self._exp_base + self._exp_pos[i]) * FIELD_BITS)
        return k

    def decode(self, key: int) -> Decoded:
        d = self._decode_cache.get(key)
        if d is not None:
            return d
        u = tuple((key >> (i * FIELD_BITS)) & _MASK for i in range(self.n_u))
        a = tuple((key >> ((self.n_u + j) * FIELD_BITS)) & _MASK for j in range(self.n_a))
        s = (key >> self.s_shift) & _MASK
        form = tuple(((key >> ((self._exp_base + k) * FIELD_BITS)) & _MASK) - _BIAS
                     for k in range(len(self.exp_vars)))
        d = (u, a, s, form)
        self._decode_cache[key] = d
        return d

    def form_dict(self, form: Tuple[int, ...]) -> Dict[int, int]:
        return {self.exp_vars[k]: c for k, c in enumerate(form) if c}

    # -- constructors -------------------------------------------------------

    def zero(self) -> "ExpPoly":
        return ExpPoly(self, {})

    def one(self) -> "ExpPoly":
        return ExpPoly(self, {self.zero_key: mpq(1)})

    def const(self, c) -> "ExpPoly":
        """Constant polynomial from an int, Fraction or :class:`Scalar`."""
        if isinstance(c, Scalar):
            terms = {}
            if c.rat:
                terms[self.zero_key] = _to_mpq(c.rat)
            if c.surd:
                terms[self.zero_key + (1 << self.s_shift)] = _to_mpq(c.surd)
            return ExpPoly(self, terms)
        q = _to_mpq(c)
        return ExpPoly(self, {self.zero_key: q} if q else {})

    def u(self, i: int) -> "ExpPoly":
        """Variable ``u_{i+1}`` (0-based index)."""
        return ExpPoly(self, {self.key(u={i: 1}): mpq(1)})

    def a(self, j: int) -> "ExpPoly":
        """Coefficient symbol ``a_{j+1}`` (0-based index)."""
        return ExpPoly(self, {self.key(a={j: 1}): mpq(1)})

    def exp(self, form: Mapping[int, int]) -> "ExpPoly":
        """``exp(sum c_i u_i)`` for the integer linear form ``{i: c_i}``."""
        return ExpPoly(self, {self.key(form=form): mpq(1)})

    def monomial(self, coef=1, u=None, a=None, s=0, form=None) -> "ExpPoly":
        q = _to_mpq(coef)
        if not q:
            return self.zero()
        return ExpPoly(self, {self.key(u=u, a=a, s=s, form=form): q})


class ExpPoly:
    """Immutable sparse exponential polynomial over a :class:`PolyRing`."""

    __slots__ = ("ring", "terms")

    def __init__(self, ring: PolyRing, terms: Dict[int, mpq]):
        self.ring = ring
        self.terms = terms

    # -- basic predicates ---------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def _check(self, other: "ExpPoly"):
        if other.ring is not self.ring and other.ring != self.ring:
            raise ValueError("ExpPoly values from different rings")

    def _lift(self, other) -> "ExpPoly":
        if isinstance(other, ExpPoly):
            self._check(other)
            return other
        if isinstance(other, float):
            raise TypeError("floats are not exact coefficients")
        return self.ring.const(other)

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        other = self._lift(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        t = dict(self.terms)
        for k, c in other.terms.items():
            v = t.get(k)
            if v is None:
                t[k] = c
            else:
                v = v + c
                if v:
                    t[k] = v
                else:
                    del t[k]
        return ExpPoly(self.ring, t)

    __radd__ = __add__

    def __neg__(self):
        return ExpPoly(self.ring, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, ExpPoly):
            if isinstance(other, float):
                raise TypeError("floats are not exact coefficients")
            if isinstance(other, Scalar) and other.surd:
                other = self.ring.const(other)
            else:
                q = _to_mpq(other.rat if isinstance(other, Scalar) else other)
                if not q:
                    return self.ring.zero()
                return ExpPoly(self.ring, {k: c * q for k, c in self.terms.items()})
        self._check(other)
        a, b = self.terms, other.terms
        if not a or not b:
            return self.ring.zero()
        if len(a) < len(b):
            a, b = b, a
        z = self.ring.zero_key
        s_shift = self.ring.s_shift
        out: Dict[int, mpq] = {}
        get = out.get
        check_s = any((k >> s_shift) & _MASK for k in a) and any((k >> s_shift) & _MASK for k in b)
        for k2, c2 in b.items():
            off = k2 - z
            for k1, c1 in a.items():
                k = k1 + off
                c = c1 * c2
                if check_s and ((k >> s_shift) & _MASK) >= 2:
                    k -= 2 << s_shift
                    c = c * 2
                v = get(k)
                if v is None:
                    out[k] = c
                else:
                    out[k] = v + c
        return ExpPoly(self.ring, {k: c for k, c in out.items() if c})

    __rmul__ = __mul__

    def mul_term(self, key: int, coef: mpq) -> "ExpPoly":
        """Multiply by a single packed term (fast path for sparse products)."""
        if not coef or not self.terms:
            return self.ring.zero()
        off = key - self.ring.zero_key
        s_shift = self.ring.s_shift
        if (key >> s_shift) & _MASK:
            out = {}
            for k, c in self.terms.items():
                k2, c2 = k + off, c * coef
                if ((k2 >> s_shift) & _MASK) >= 2:
                    k2 -= 2 << s_shift
                    c2 = c2 * 2
                out[k2] = out.get(k2, 0) + c2
            return ExpPoly(self.ring, {k: c for k, c in out.items() if c})
        return ExpPoly(self.ring, {k + off: c * coef for k, c in self.terms.items()})

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("ExpPoly powers must be non-negative integers")
        result, base = self.ring.one(), self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __truediv__(self, other):
        if isinstance(other, ExpPoly):
            c = other.constant_value()
            if c is None:
                raise ValueError("division only by constants")
            other = c
        other = as_scalar(other)
        return self * other.inverse()

    # -- equality -----------------------------------------------------------

    def __eq__(self, other):
        if isinstance(other, ExpPoly):
            return self.ring == other.ring and self.terms == other.terms
        if isinstance(other, (int, Fraction, Scalar)):
            return self == self.ring.const(other)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # -- inspection ---------------------------------------------------------

    def decoded_terms(self) -> Iterable[Tuple[Decoded, mpq]]:
        dec = self.ring.decode
        for k, c in self.terms.items():
            yield dec(k), c

    def sorted_terms(self):
        """Terms in canonical order: graded-lex on u, then a, then the form."""
        items = [(self.ring.decode(k), c) for k, c in self.terms.items()]
        items.sort(key=lambda dc: _order_key(dc[0]))
        return items

    def constant_value(self) -> Optional[Scalar]:
        if not self.terms:
            return Scalar(0)
        rat = surd = Fraction(0)
        for (u, a, s, form), c in self.decoded_terms():
            if any(u) or any(a) or any(form):
                return None
            if s:
                surd += Fraction(int(c.numerator), int(c.denominator))
            else:
                rat += Fraction(int(c.numerator), int(c.denominator))
        return Scalar(rat, surd)

    def coefficient(self, u=None, a=None, form=None) -> Scalar:
        """Exact coefficient of one monomial (sqrt(2) parts combined)."""
        k = self.ring.key(u=u, a=a, form=form)
        rat = self.terms.get(k, 0)
        surd = self.terms.get(k + (1 << self.ring.s_shift), 0)
        return Scalar(Fraction(int(gmpy2.numer(mpq(rat))), int(gmpy2.denom(mpq(rat)))),
                      Fraction(int(gmpy2.numer(mpq(surd))), int(gmpy2.denom(mpq(surd)))))

    def total_degree(self, variables: Optional[Iterable[int]] = None) -> int:
        """Maximal total u-degree (optionally restricted to some u indices)."""
        if not self.terms:
            return -1
        idx = None if variables is None else list(variables)
        best = 0
        for (u, _, _, _), _c in self.decoded_terms():
            d = sum(u) if idx is None else sum(u[i] for i in idx)
            best = max(best, d)
        return best

    def degree_in(self, i: int) -> int:
        if not self.terms:
            return -1
        return max(u[i] for (u, _, _, _), _ in self.decoded_terms())

    def a_degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(a) for (_, a, _, _), _ in self.decoded_terms())

    def u_support(self) -> set:
        """u indices occurring polynomially or inside an exponential."""
        out = set()
        ev = self.ring.exp_vars
        for (u, _, _, form), _ in self.decoded_terms():
            out.update(i for i, e in enumerate(u) if e)
            out.update(ev[k] for k, c in enumerate(form) if c)
        return out

    def a_support(self) -> set:
        out = set()
        for (_, a, _, _), _ in self.decoded_terms():
            out.update(j for j, e in enumerate(a) if e)
        return out

    def split_a(self) -> Dict[Optional[int], "ExpPoly"]:
        """Split a polynomial linear in ``a`` into ``{j: coefficient of a_j}``.

        The key ``None`` collects the a-free part.
        """
        ring = self.ring
        out: Dict[Optional[int], Dict[int, mpq]] = {}
        for k, c in self.terms.items():
            _, a, _, _ = ring.decode(k)
            nz = [j for j, e in enumerate(a) if e]
            if not nz:
                out.setdefault(None, {})[k] = c
                continue
            if len(nz) > 1 or a[nz[0]] != 1:
                raise ValueError("polynomial is not linear in the a variables")
            j = nz[0]
            out.setdefault(j, {})[k - (1 << ((ring.n_u + j) * FIELD_BITS))] = c
        return {j: ExpPoly(ring, t) for j, t in out.items()}

    # -- substitution / evaluation -----------------------------------------

    def substitute(self, values: Mapping[int, object]) -> "ExpPoly":
        """Replace ``u_i`` by exact numbers (0-based indices).

        Exponential variables may only be replaced by zero, otherwise the
        result would leave the exact ring.
        """
        ring = self.ring
        vals = {i: as_scalar(v) for i, v in values.items()}
        for i, v in vals.items():
            if i in ring._exp_pos and not v.is_zero():
                raise ValueError(f"u{i + 1} appears in exponentials; only 0 keeps the result exact")
        out = ring.zero()
        for k, c in self.terms.items():
            u, a, s, form = ring.decode(k)
            factor = Scalar(1)
            newu = {}
            for i, e in enumerate(u):
                if e and i in vals:
                    factor = factor * vals[i] ** e
                elif e:
                    newu[i] = e
            newform = ring.form_dict(form)
            for i in list(newform):
                if i in vals:
                    del newform[i]
            if factor.is_zero():
                continue
            base = ring.monomial(1, u=newu, a={j: e for j, e in enumerate(a) if e},
                                 s=s, form=newform)
            out = out + base * ring.const(factor) * ring.const(
                Fraction(int(c.numerator), int(c.denominator)))
        return out

    def evaluate(self, u: Sequence[float], a: Optional[Sequence[float]] = None) -> float:
        """Floating-point value at ``u`` (and ``a`` when a-symbols occur)."""
        ring = self.ring
        if len(u) != ring.n_u:
            raise ValueError(f"expected {ring.n_u} u values, got {len(u)}")
        if a is not None and len(a) != ring.n_a:
            raise ValueError(f"expected {ring.n_a} a values, got {len(a)}")
        ev = ring.exp_vars
        total = 0.0
        r2 = math.sqrt(2.0)
        for (ue, ae, s, form), c in self.decoded_terms():
            v = float(c)
            for i, e in enumerate(ue):
                if e:
                    v *= u[i] ** e
            if any(ae):
                if a is None:
                    raise ValueError("polynomial depends on a; values required")
                for j, e in enumerate(ae):
                    if e:
                        v *= a[j] ** e
            if s:
                v *= r2 ** s
            if any(form):
                v *= math.exp(sum(cf * u[ev[k]] for k, cf in enumerate(form)))
            total += v
        return total

    # -- display ------------------------------------------------------------

    def __repr__(self):
        return f"ExpPoly({self})"

    def __str__(self):
        from .emit import format_poly
        return format_poly(self)


def _order_key(d: Decoded):
    u, a, s, form = d
    return (-sum(u), tuple(-e for e in u), -sum(a), tuple(-e for e in a),
            tuple(-c for c in form), s)
