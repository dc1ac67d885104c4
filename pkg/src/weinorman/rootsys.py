"""Root systems of the classical families and of G2.

Roots are stored twice: as coefficient vectors over the simple roots
(``Root.coeffs``) and as linear functionals on the diagonal Cartan
coordinates of the defining representation (``RootSystem.weight``).  The
second form is what :mod:`weinorman.liealg` uses to place root vectors in
matrices.

Cartan coordinates per family (``h_1 .. h_m`` below, 0-based in code):

* ``A_N``: the diagonal ``diag(h_1, ..., h_{N+1})`` (trace zero).
* ``B_N``: ``diag(0, h, -h)`` with ``h = (h_1, ..., h_N)``.
* ``C_N``, ``D_N``: ``diag(h, -h)``.
* ``G2``: the two parameters of the Cartan generators of the fixed 7x7
  representation.

The simple roots are numbered so that, for ``B_N`` and ``C_N``, ``alpha_1``
is the long end of the Dynkin diagram, and the highest root reads
``alpha_1 + 2 alpha_2 + ... + 2 alpha_N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

__all__ = [
    "ConfigurationError",
    "Root",
    "RootSystem",
    "build_root_system",
    "max_root",
    "partition_positive_roots",
    "dim_a1",
    "FAMILIES",
]

FAMILIES = ("A", "B", "C", "D", "G2")

Vec = Tuple[Fraction, ...]


class ConfigurationError(ValueError):
    """Unsupported family or rank."""


@dataclass(frozen=True, order=False)
class Root:
    """A root written over the simple roots."""

    coeffs: Tuple[int, ...]

    def __post_init__(self):
        c = self.coeffs
        if not any(c):
            raise ValueError("zero is not a root")
        if not (all(x >= 0 for x in c) or all(x <= 0 for x in c)):
            raise ValueError(f"mixed-sign coefficients {c}")

    @property
    def height(self) -> int:
        return sum(self.coeffs)

    @property
    def positive(self) -> bool:
        return self.coeffs[0] >= 0 and all(x >= 0 for x in self.coeffs)

    def __neg__(self) -> "Root":
        return Root(tuple(-x for x in self.coeffs))

    def __add__(self, other: "Root"):
        return tuple(a + b for a, b in zip(self.coeffs, other.coeffs))

    def leading_index(self) -> int:
        """0-based position of the first nonzero coefficient."""
        return next(i for i, x in enumerate(self.coeffs) if x)

    def __str__(self):
        return "(" + ",".join(str(x) for x in self.coeffs) + ")"


@dataclass(frozen=True)
class RootSystem:
    """Roots of one algebra together with the ``R_k`` partition.

    Attributes
    ----------
    family, rank
        Cartan type.
    simple_roots
        Simple roots as functionals on the Cartan coordinates.
    positive_roots
        Positive roots in basis order (``R_1`` first, then ``R_2``, ...).
    partition
        ``R_1, ..., R_N`` (for G2 a single block holding all of ``n+``).
    weight
        Map ``Root.coeffs -> functional`` for every root, both signs.
    leading_form_ok
        True when every positive root has leading coefficient 1.
    """

    family: str
    rank: int
    simple_roots: Tuple[Vec, ...]
    positive_roots: Tuple[Root, ...]
    partition: Tuple[Tuple[Root, ...], ...]
    weight: Dict[Tuple[int, ...], Vec] = field(repr=False)
    leading_form_ok: bool = True

    @property
    def roots(self) -> List[Root]:
        return list(self.positive_roots) + [-r for r in self.positive_roots]

    def cumulative(self, k: int) -> Tuple[Root, ...]:
        """``R~_k``: the union of ``R_l`` for ``l >= k`` (1-based ``k``)."""
        out = []
        for blk in self.partition[k - 1:]:
            out.extend(blk)
        return tuple(out)

    def is_root(self, coeffs) -> bool:
        """Whether ``coeffs`` (a :class:`Root` or coefficient tuple) is a root."""
        if isinstance(coeffs, Root):
            coeffs = coeffs.coeffs
        return tuple(coeffs) in self.weight

    def coroot(self, i: int) -> Vec:
        """Coroot of simple root ``i`` (0-based) in Cartan coordinates.

        Uses the standard Euclidean form on the coordinates, in which all
        classical models here are orthonormal.
        """
        a = self.simple_roots[i]
        nn = sum(x * x for x in a)
        return tuple(2 * x / nn for x in a)


# -- simple roots per family -----------------------------------------------


def _unit(dim: int, i: int, c=1) -> List[Fraction]:
    v = [Fraction(0)] * dim
    v[i] = Fraction(c)
    return v


def _vadd(*vs) -> Vec:
    return tuple(sum(x) for x in zip(*vs))


def _simple_roots(family: str, N: int) -> Tuple[Vec, ...]:
    if family == "A":
        d = N + 1
        return tuple(_vadd(_unit(d, k), _unit(d, k + 1, -1)) for k in range(N))
    if family == "B":
        # e_1 = h_1, e_j = -h_j (j >= 2); alpha_k = e_k - e_{k+1}, alpha_N = e_N
        e = [_unit(N, 0)] + [_unit(N, j, -1) for j in range(1, N)]
        out = [_vadd(e[k], [-x for x in e[k + 1]]) for k in range(N - 1)]
        out.append(tuple(e[N - 1]))
        return tuple(out)
    if family == "C":
        out = [tuple(_unit(N, 0, 2))]
        out += [_vadd(_unit(N, k), _unit(N, k - 1, -1)) for k in range(1, N)]
        return tuple(out)
    if family == "D":
        if N == 4:
            h = [_unit(4, i) for i in range(4)]
            neg = lambda v: [-x for x in v]  # noqa: E731
            return (_vadd(h[0], h[1]), _vadd(h[2], neg(h[1])),
                    _vadd(h[3], neg(h[2])), _vadd(h[1], neg(h[0])))
        out = [_vadd(_unit(N, N - k), _unit(N, N - k - 1, -1)) for k in range(1, N)]
        out.append(_vadd(_unit(N, 0), _unit(N, 1)))
        return tuple(out)
    raise ConfigurationError(f"unknown family {family!r}")


def _all_weights(family: str, N: int) -> List[Vec]:
    """Every root as a functional on the Cartan coordinates."""
    out = []
    if family == "A":
        d = N + 1
        for i in range(d):
            for j in range(d):
                if i != j:
                    out.append(_vadd(_unit(d, i), _unit(d, j, -1)))
        return out
    for i in range(N):
        for j in range(i + 1, N):
            for si in (1, -1):
                for sj in (1, -1):
                    out.append(_vadd(_unit(N, i, si), _unit(N, j, sj)))
    if family == "B":
        for i in range(N):
            out += [tuple(_unit(N, i, 1)), tuple(_unit(N, i, -1))]
    elif family == "C":
        for i in range(N):
            out += [tuple(_unit(N, i, 2)), tuple(_unit(N, i, -2))]
    return out


def _solve_coeffs(simple: Sequence[Vec], v: Vec) -> Tuple[int, ...]:
    """Exact coefficients of ``v`` over ``simple`` via the Gram system."""
    n = len(simple)
    G = [[sum(a * b for a, b in zip(simple[i], simple[j])) for j in range(n)] for i in range(n)]
    rhs = [sum(a * b for a, b in zip(simple[i], v)) for i in range(n)]
    M = [row[:] + [r] for row, r in zip(G, rhs)]
    for c in range(n):
        p = next(r for r in range(c, n) if M[r][c] != 0)
        M[c], M[p] = M[p], M[c]
        inv = 1 / M[c][c]
        M[c] = [x * inv for x in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    sol = [M[i][n] for i in range(n)]
    if any(x.denominator != 1 for x in sol):
        raise ArithmeticError(f"{v} is not an integral combination of simple roots")
    back = tuple(sum(Fraction(int(s)) * a[k] for s, a in zip(sol, simple)) for k in range(len(v)))
    if back != tuple(v):
        raise ArithmeticError(f"{v} is outside the span of the simple roots")
    return tuple(int(x) for x in sol)


# Within-height order used by the printed reference bases.  Listed roots come
# first in their height group, in the listed order; anything unlisted falls
# back to descending lexicographic order.
_TIE_ORDER: Dict[Tuple[str, int], Tuple[Tuple[int, ...], ...]] = {
    ("C", 3): ((1, 1, 1), (1, 2, 0)),
    ("C", 4): ((1, 2, 1, 1), (1, 2, 2, 0), (1, 2, 1, 0), (1, 1, 1, 1),
               (1, 1, 1, 0), (1, 2, 0, 0)),
    ("D", 4): ((1, 1, 0, 1), (1, 1, 1, 0), (0, 1, 0, 1), (0, 1, 1, 0)),
}


def _sort_block(family: str, N: int, roots: List[Root]) -> List[Root]:
    prefer = {c: i for i, c in enumerate(_TIE_ORDER.get((family, N), ()))}

    def key(r: Root):
        listed = prefer.get(r.coeffs)
        return (-r.height, 0 if listed is not None else 1,
                listed if listed is not None else 0, tuple(-x for x in r.coeffs))

    return sorted(roots, key=key)


def _check_rank(family: str, rank) -> int:
    if family not in FAMILIES:
        raise ConfigurationError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if family == "G2":
        if rank not in (None, 2):
            raise ConfigurationError("G2 has rank 2")
        return 2
    if rank is None:
        raise ConfigurationError(f"family {family} needs a rank")
    if isinstance(rank, bool) or (isinstance(rank, float) and not rank.is_integer()):
        raise ConfigurationError(f"invalid rank {rank!r}")
    try:
        N = int(rank)
    except (TypeError, ValueError):
        raise ConfigurationError(f"invalid rank {rank!r}") from None
    lo = {"A": 1, "B": 2, "C": 2, "D": 3}[family]
    if N < lo:
        raise ConfigurationError(f"{family}_N needs N >= {lo}, got {N}")
    return N


# G2: functionals on the parameters (c1, c2) of the two Cartan generators.
# Positive roots in (long, short) coordinates, listed in basis order X1..X6.
_G2_SIMPLE = ((Fraction(-1), Fraction(2)), (Fraction(1), Fraction(-1)))
_G2_POSITIVE = ((2, 3), (1, 0), (1, 1), (1, 3), (1, 2), (0, 1))


def _build_g2() -> RootSystem:
    weight = {}
    pos = []
    for c in _G2_POSITIVE:
        w = tuple(c[0] * _G2_SIMPLE[0][k] + c[1] * _G2_SIMPLE[1][k] for k in range(2))
        weight[c] = w
        weight[tuple(-x for x in c)] = tuple(-x for x in w)
        pos.append(Root(c))
    return RootSystem("G2", 2, _G2_SIMPLE, tuple(pos), (tuple(pos),), weight,
                      leading_form_ok=False)


def build_root_system(family: str, rank=None) -> RootSystem:
    """Root system of ``family`` (``"A"``, ``"B"``, ``"C"``, ``"D"``, ``"G2"``).

    Raises
    ------
    ConfigurationError
        For an unknown family or a rank below the family's minimum.
    """
    family = str(family).upper()
    N = _check_rank(family, rank)
    if family == "G2":
        return _build_g2()
    simple = _simple_roots(family, N)
    weight: Dict[Tuple[int, ...], Vec] = {}
    for w in _all_weights(family, N):
        weight[_solve_coeffs(simple, w)] = w
    positive = [Root(c) for c in weight if all(x >= 0 for x in c)]
    blocks: List[List[Root]] = [[] for _ in range(N)]
    ok = True
    for r in positive:
        k = r.leading_index()
        if r.coeffs[k] != 1:
            ok = False
        blocks[k].append(r)
    partition = tuple(tuple(_sort_block(family, N, b)) for b in blocks)
    ordered = tuple(r for b in partition for r in b)
    return RootSystem(family, N, simple, ordered, partition, weight, leading_form_ok=ok)


def partition_positive_roots(rs: RootSystem) -> Tuple[Tuple[Root, ...], ...]:
    """The ordered sets ``R_1, ..., R_N``."""
    return rs.partition


def max_root(rs: RootSystem) -> Root:
    """The unique positive root of maximal height."""
    top = max(r.height for r in rs.positive_roots)
    cands = [r for r in rs.positive_roots if r.height == top]
    if len(cands) != 1:
        raise ArithmeticError("highest root is not unique")
    return cands[0]


def dim_a1(family: str, rank: int) -> int:
    """Closed-form size of the first block ``a_1``."""
    family = str(family).upper()
    if family == "G2":
        raise ConfigurationError("dim_a1 is defined for classical families only")
    N = _check_rank(family, rank)
    return {"A": N, "B": 2 * N - 1, "C": N * (N + 1) // 2, "D": 2 * N - 2}[family]
