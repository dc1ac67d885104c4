"""Text renderings of :class:`~weinorman.expoly.ExpPoly` values.

Two styles are supported:

``plain``
    Expression syntax shared with :mod:`weinorman.exprdsl`
    (``-1/2*a10*u4^2*exp(2*u5 - 2*u6)``).  Output parses back exactly.
``latex``
    LaTeX-like text (``-\\frac{1}{2} a_{10} u_{4}^{2} e^{2 u_{5} - 2 u_{6}}``).
"""

from __future__ import annotations

from fractions import Fraction

__all__ = ["format_poly", "format_form"]


def _var(name: str, idx: int, style: str) -> str:
    if style == "latex":
        return f"{name}_{{{idx + 1}}}"
    return f"{name}{idx + 1}"


def _power(base: str, e: int, style: str) -> str:
    if e == 1:
        return base
    return f"{base}^{{{e}}}" if style == "latex" else f"{base}^{e}"


def format_form(ring, form, style: str = "plain") -> str:
    """Render the integer linear form of an exponential, e.g. ``2*u5 - 2*u6``."""
    parts = []
    for k, c in enumerate(form):
        if not c:
            continue
        v = _var("u", ring.exp_vars[k], style)
        mag = abs(c)
        if style == "latex":
            body = v if mag == 1 else f"{mag} {v}"
        else:
            body = v if mag == 1 else f"{mag}*{v}"
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    return " ".join(parts)


def _factors(ring, u, a, s, form, style):
    fs = []
    for j, e in enumerate(a):
        if e:
            fs.append(_power(_var("a", j, style), e, style))
    for i, e in enumerate(u):
        if e:
            fs.append(_power(_var("u", i, style), e, style))
    if any(form):
        lin = format_form(ring, form, style)
        fs.append(f"e^{{{lin}}}" if style == "latex" else f"exp({lin})")
    return fs


def _coef_text(c: Fraction, s: int, has_factors: bool, style: str) -> str:
    """Magnitude text of a coefficient (sign handled by the caller)."""
    c = abs(c)
    r2 = "\\sqrt{2}" if style == "latex" else "sqrt(2)"
    if style == "latex":
        if c.denominator == 1:
            num = "" if (c == 1 and (has_factors or s)) else str(c.numerator)
        else:
            num = f"\\frac{{{c.numerator}}}{{{c.denominator}}}"
        return " ".join(p for p in (num, r2 if s else "") if p)
    if c.denominator == 1:
        num = "" if (c == 1 and (has_factors or s)) else str(c.numerator)
    else:
        num = f"{c.numerator}/{c.denominator}"
    return "*".join(p for p in (num, r2 if s else "") if p)


def format_poly(p, style: str = "plain") -> str:
    """Render ``p`` with terms in canonical order."""
    if style not in ("plain", "latex"):
        raise ValueError(f"unknown style {style!r}")
    items = p.sorted_terms()
    if not items:
        return "0"
    out = []
    joiner = " " if style == "latex" else "*"
    for n, ((u, a, s, form), c) in enumerate(items):
        c = Fraction(int(c.numerator), int(c.denominator))
        fs = _factors(p.ring, u, a, s, form, style)
        head = _coef_text(c, s, bool(fs), style)
        body = joiner.join(x for x in [head] + fs if x)
        neg = c < 0
        if n == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(("- " if neg else "+ ") + body)
    return " ".join(out)
