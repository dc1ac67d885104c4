"""A small expression language for coefficient functions ``a_k(t)``.

Grammar (whitespace is ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | "+" unary | power
    power   := atom ("^" unary)?          # right associative, integer exponent
    atom    := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

Functions: ``sin``, ``cos``, ``exp``, ``sqrt``.  By default the only variable
is ``t``; callers may allow others (the equation files use ``u1 .. un`` and
``a1 .. an``).  Exponents must evaluate to integer constants.

>>> eval_expr(parse_expr("sin(2*t)+0.5"), 0.0)
0.5
>>> to_text(parse_expr("-(t)^2 + 1/2*t"))
'-t^2 + 1/2*t'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union

import numpy as np

__all__ = [
    "ParseError",
    "EvalError",
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "parse_expr",
    "eval_expr",
    "compile_expr",
    "to_text",
    "to_expoly",
    "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "exp", "sqrt")


class ParseError(ValueError):
    """Syntax error or unknown identifier.

    Attributes
    ----------
    offset : int
        0-based character offset of the problem.
    column : int
        1-based column (``offset + 1``).
    """

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.column = offset + 1
        self.source = source
        super().__init__(f"{message} at column {self.column}")


class EvalError(ArithmeticError):
    """Numeric failure while evaluating an expression (carries ``t``)."""

    def __init__(self, message: str, t=None):
        self.t = t
        super().__init__(f"{message} at t={t}" if t is not None else message)


# -- tree ----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    text: str

    @property
    def value(self) -> float:
        return float(self.text)

    @property
    def exact(self) -> Fraction:
        return Fraction(self.text)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]

# -- lexer ---------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")


def _tokens(src: str):
    pos = 0
    out = []
    n = len(src)
    while pos < n:
        if src[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", pos, src)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str, variables):
        self.src = src
        self.toks = _tokens(src)
        self.i = 0
        self.variables = variables

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            what = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {op!r}, found {what}", pos, self.src)
        self.take()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos, self.src)
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                e = BinOp(val, e, self.term())
            else:
                return e

    def term(self):
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                e = BinOp(val, e, self.unary())
            else:
                return e

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.take()
            epos = self.peek()[2]
            ex = self.unary()
            k = _const_int(ex)
            if k is None:
                raise ParseError("exponent must be an integer constant", epos, self.src)
            return Pow(base, k)
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(val)
        if kind == "name":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", pos, self.src)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument", pos + len(val), self.src)
            if not self.variables(val):
                raise ParseError(f"unknown identifier {val!r}", pos, self.src)
            return Var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", pos, self.src)


def _const_int(e) -> Optional[int]:
    """Integer value of a constant exponent expression, else None."""
    if isinstance(e, Num):
        v = e.exact
        return int(v) if v.denominator == 1 else None
    if isinstance(e, Neg):
        v = _const_int(e.arg)
        return -v if v is not None else None
    if isinstance(e, Pow):
        b = _const_int(e.base)
        if b is None or e.exponent < 0:
            return None
        return b ** e.exponent
    return None


def _variable_predicate(variables):
    if variables is None:
        return lambda name: name == "t"
    if callable(variables):
        return variables
    allowed = set(variables)
    return lambda name: name in allowed


def parse_expr(src: str, variables: Union[None, Iterable[str], Callable[[str], bool]] = None) -> Expr:
    """Parse ``src`` into an expression tree.

    Parameters
    ----------
    variables
        Allowed variable names (iterable or predicate); default ``{"t"}``.

    Raises
    ------
    ParseError
        With ``offset`` pointing at the offending character.
    """
    if not isinstance(src, str):
        src = str(src)
    return _Parser(src, _variable_predicate(variables)).parse()


# -- evaluation ----------------------------------------------------------------


def eval_expr(e: Expr, t: float = 0.0, env: Optional[dict] = None) -> float:
    """Evaluate ``e`` in double precision.

    Raises
    ------
    EvalError
        On division by zero or a domain error; the message names ``t``.
    """
    env = env or {}

    def ev(n):
        if isinstance(n, Num):
            return n.value
        if isinstance(n, Var):
            if n.name == "t" and "t" not in env:
                return float(t)
            try:
                return float(env[n.name])
            except KeyError:
                raise EvalError(f"no value for {n.name!r}", t) from None
        if isinstance(n, Neg):
            return -ev(n.arg)
        if isinstance(n, BinOp):
            a, b = ev(n.left), ev(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            if b == 0:
                raise EvalError("division by zero", t)
            return a / b
        if isinstance(n, Pow):
            b = ev(n.base)
            if b == 0 and n.exponent < 0:
                raise EvalError("division by zero", t)
            return b ** n.exponent
        if isinstance(n, Call):
            x = ev(n.arg)
            try:
                return getattr(math, n.func)(x)
            except (ValueError, OverflowError) as exc:
                raise EvalError(f"{n.func}: {exc}", t) from None
        raise TypeError(f"not an expression node: {n!r}")

    return ev(e)


def compile_expr(e: Expr) -> Callable:
    """Closure ``f(t)`` accepting floats or numpy arrays.

    Division by zero raises :class:`EvalError` carrying the offending ``t``.
    """
    def build(n):
        if isinstance(n, Num):
            v = n.value
            return lambda t: v + 0.0 * t if isinstance(t, np.ndarray) else v
        if isinstance(n, Var):
            if n.name != "t":
                raise ValueError(f"compile_expr supports only t, found {n.name!r}")
            return lambda t: t
        if isinstance(n, Neg):
            f = build(n.arg)
            return lambda t: -f(t)
        if isinstance(n, BinOp):
            f, g = build(n.left), build(n.right)
            if n.op == "+":
                return lambda t: f(t) + g(t)
            if n.op == "-":
                return lambda t: f(t) - g(t)
            if n.op == "*":
                return lambda t: f(t) * g(t)

            def div(t):
                d = g(t)
                if np.any(np.asarray(d) == 0):
                    bad = t if np.ndim(d) == 0 else np.asarray(t)[np.asarray(d) == 0].flat[0]
                    raise EvalError("division by zero", float(bad))
                return f(t) / d
            return div
        if isinstance(n, Pow):
            f, k = build(n.base), n.exponent
            if k >= 0:
                return lambda t: f(t) ** k

            def inv_pow(t):
                b = f(t)
                if np.any(np.asarray(b) == 0):
                    raise EvalError("division by zero", float(np.asarray(t).flat[0]))
                return 1.0 / b ** (-k)
            return inv_pow
        if isinstance(n, Call):
            f = build(n.arg)
            fn = getattr(np, n.func)
            return lambda t: fn(f(t))
        raise TypeError(f"not an expression node: {n!r}")

    return build(e)


# -- printing ------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_text(e: Expr) -> str:
    """Canonical text with minimal parentheses; ``parse_expr`` inverts it."""
    return _fmt(e, 0)


def _fmt(n, ctx: int) -> str:
    # ctx: binding strength required by the parent
    # 0 top, 1 additive, 2 multiplicative, 3 unary operand, 4 power base
    if isinstance(n, Num):
        s = n.text
        return s
    if isinstance(n, Var):
        return n.name
    if isinstance(n, Call):
        return f"{n.func}({_fmt(n.arg, 0)})"
    if isinstance(n, Neg):
        s = "-" + _fmt(n.arg, 3)
        return f"({s})" if ctx >= 4 else s
    if isinstance(n, Pow):
        ex = str(n.exponent)
        s = f"{_fmt(n.base, 4)}^{ex}"
        return f"({s})" if ctx >= 4 else s
    if isinstance(n, BinOp):
        p = _PREC[n.op]
        left = _fmt(n.left, p)
        right = _fmt(n.right, p + 1)
        s = f"{left} {n.op} {right}" if p == 1 else f"{left}*{right}" if n.op == "*" else f"{left}/{right}"
        return f"({s})" if ctx > p else s
    raise TypeError(f"not an expression node: {n!r}")


# -- exact conversion ----------------------------------------------------------

_UVAR = re.compile(r"u(\d+)$")
_AVAR = re.compile(r"a(\d+)$")


def symbol_predicate(n: int) -> Callable[[str], bool]:
    """Accept ``u1..un`` and ``a1..an``."""
    def ok(name):
        m = _UVAR.match(name) or _AVAR.match(name)
        return bool(m) and 1 <= int(m.group(1)) <= n
    return ok


def to_expoly(e: Expr, ring):
    """Exact :class:`~weinorman.expoly.ExpPoly` for an expression in ``u``/``a``.

    Supported: rational literals, ``+ - * /`` (division by constants),
    non-negative integer powers, ``sqrt(2)`` and ``exp`` of integer linear
    forms in the ring's exponential variables.
    """
    from .scalars import Scalar

    def conv(n):
        if isinstance(n, Num):
            return ring.const(n.exact)
        if isinstance(n, Var):
            m = _UVAR.match(n.name)
            if m:
                return ring.u(int(m.group(1)) - 1)
            m = _AVAR.match(n.name)
            if m:
                return ring.a(int(m.group(1)) - 1)
            raise ValueError(f"symbol {n.name!r} has no exact meaning")
        if isinstance(n, Neg):
            return -conv(n.arg)
        if isinstance(n, BinOp):
            a, b = conv(n.left), conv(n.right)
            if n.op == "+":
                return a + b
            if n.op == "-":
                return a - b
            if n.op == "*":
                return a * b
            c = b.constant_value()
            if c is None:
                raise ValueError("division by a non-constant")
            if c.is_zero():
                raise ZeroDivisionError("division by zero")
            return a * ring.const(c.inverse())
        if isinstance(n, Pow):
            if n.exponent < 0:
                c = conv(n.base).constant_value()
                if c is None:
                    raise ValueError("negative powers need a constant base")
                return ring.const(c ** n.exponent)
            return conv(n.base) ** n.exponent
        if isinstance(n, Call):
            if n.func == "sqrt":
                c = conv(n.arg).constant_value()
                if c != Scalar(2):
                    raise ValueError("only sqrt(2) is exact")
                return ring.const(Scalar(0, 1))
            if n.func == "exp":
                arg = conv(n.arg)
                form = {}
                for (u, a, s, f), c in arg.decoded_terms():
                    deg = [i for i, x in enumerate(u) if x]
                    if any(a) or s or any(f) or len(deg) != 1 or u[deg[0]] != 1:
                        raise ValueError("exp needs an integer linear form in u")
                    if c.denominator != 1:
                        raise ValueError("exp needs integer coefficients")
                    form[deg[0]] = int(c)
                return ring.exp(form)
            raise ValueError(f"{n.func} has no exact meaning")
        raise TypeError(f"not an expression node: {n!r}")

    return conv(e)
