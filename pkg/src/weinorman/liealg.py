"""Matrix bases of the classical algebras and G2 in the Wei-Norman order.

Matrices are sparse: a ``dict`` mapping ``(row, col)`` to :class:`Scalar`,
with no stored zeros.  Root vectors follow the conventions below (0-based
indices, ``E(i, j)`` the matrix unit, ``N`` the rank):

========  =========================================  =======================
family    weight                                     matrix
========  =========================================  =======================
A         ``h_i - h_j``                              ``E(i, j)``
B         ``h_i - h_j``                              ``E(1+i,1+j) - E(1+N+j,1+N+i)``
B         ``h_i + h_j`` (i<j)                        ``E(1+i,1+N+j) - E(1+j,1+N+i)``
B         ``-h_i - h_j`` (i<j)                       ``E(1+N+j,1+i) - E(1+N+i,1+j)``
B         ``+h_j`` / ``-h_j``                        ``E(0,1+N+j) - E(1+j,0)`` / transpose
C         ``h_i - h_j``                              ``E(i,j) - E(N+j,N+i)``
C         ``h_i + h_j`` (i<=j)                       ``E(i,N+j) + E(j,N+i)`` (one unit if i=j)
C         ``-h_i - h_j``                             transpose of the above
D         ``h_i - h_j``                              ``E(i,j) - E(N+j,N+i)``
D         ``h_i + h_j`` (i<j)                        ``E(i,N+j) - E(j,N+i)``
D         ``-h_i - h_j``                             transpose of the above
========  =========================================  =======================

Negative root vectors are always transposes of positive ones, and Cartan
generators are the coroots of the simple roots.  G2 uses a fixed 7x7
representation with ``sqrt(2)`` entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .rootsys import ConfigurationError, Root, RootSystem, build_root_system
from .scalars import ONE, ZERO, Scalar

__all__ = [
    "Matrix",
    "Generator",
    "Block",
    "OrderedBasis",
    "BlockReport",
    "Check",
    "build_matrix_basis",
    "commutator",
    "matmul",
    "mat_add",
    "mat_scale",
    "transpose",
    "verify_block_structure",
    "bilinear_form",
]

Matrix = Dict[Tuple[int, int], Scalar]


# -- sparse matrix helpers -------------------------------------------------


def mat_add(X: Matrix, Y: Matrix, c=ONE) -> Matrix:
    """``X + c*Y``."""
    out = dict(X)
    for k, v in Y.items():
        s = out.get(k, ZERO) + c * v
        if s.is_zero():
            out.pop(k, None)
        else:
            out[k] = s
    return out


def mat_scale(X: Matrix, c) -> Matrix:
    if not c:
        return {}
    return {k: v * c for k, v in X.items()}


def matmul(X: Matrix, Y: Matrix) -> Matrix:
    rows: Dict[int, List[Tuple[int, Scalar]]] = {}
    for (r, c), v in Y.items():
        rows.setdefault(r, []).append((c, v))
    out: Dict[Tuple[int, int], Scalar] = {}
    for (r, k), x in X.items():
        for c, y in rows.get(k, ()):
            key = (r, c)
            out[key] = out.get(key, ZERO) + x * y
    return {k: v for k, v in out.items() if not v.is_zero()}


def transpose(X: Matrix) -> Matrix:
    return {(c, r): v for (r, c), v in X.items()}


def commutator(X: Matrix, Y: Matrix) -> Matrix:
    """``XY - YX``."""
    return mat_add(matmul(X, Y), matmul(Y, X), -ONE)


def _unit(i, j, c=1) -> Matrix:
    return {(i, j): Scalar(c)}


def _sum(*ms: Matrix) -> Matrix:
    out: Matrix = {}
    for m in ms:
        out = mat_add(out, m)
    return out


# -- data types -------------------------------------------------------------


@dataclass(frozen=True)
class Generator:
    """One element of the ordered basis.

    ``label`` is the 1-based position; ``tag`` is ``("plus", k)``,
    ``("cartan", j)`` or ``("minus", k)``.
    """

    label: int
    matrix: Matrix = field(repr=False, compare=False)
    tag: Tuple[str, int]
    root: Optional[Root] = None


@dataclass(frozen=True)
class Block:
    kind: str  # "plus", "cartan" or "minus"
    k: int
    indices: Tuple[int, ...]  # 0-based generator indices
    title: Optional[str] = None

    @property
    def name(self) -> str:
        if self.title:
            return self.title
        if self.kind == "cartan":
            return "h"
        return f"a{self.k}{'+' if self.kind == 'plus' else '-'}"

    def __len__(self):
        return len(self.indices)


class _CoordinateSolver:
    """Expansion of matrices in a fixed basis.

    Generators sharing matrix positions are grouped; inside each group a
    square pivot system is inverted once, exactly.
    """

    def __init__(self, mats: Sequence[Matrix]):
        self.mats = mats
        owner: Dict[Tuple[int, int], List[int]] = {}
        for i, m in enumerate(mats):
            for pos in m:
                owner.setdefault(pos, []).append(i)
        parent = list(range(len(mats)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for idx in owner.values():
            for j in idx[1:]:
                a, b = find(idx[0]), find(j)
                if a != b:
                    parent[a] = b
        groups: Dict[int, List[int]] = {}
        for i in range(len(mats)):
            groups.setdefault(find(i), []).append(i)
        self.groups = []
        for gens in groups.values():
            positions = sorted({p for g in gens for p in mats[g]})
            rows = [[mats[g].get(p, ZERO) for g in gens] for p in positions]
            piv = _pivot_rows(rows)
            if len(piv) != len(gens):
                raise ArithmeticError("basis matrices are linearly dependent")
            sub = [rows[r] for r in piv]
            self.groups.append((tuple(gens), tuple(positions[r] for r in piv), _inverse(sub)))
        self.known = set(owner)

    def solve(self, M: Matrix) -> List[Scalar]:
        coeffs = [ZERO] * len(self.mats)
        for gens, pivots, inv in self.groups:
            vals = [M.get(p, ZERO) for p in pivots]
            if all(v.is_zero() for v in vals):
                continue
            for r, g in enumerate(gens):
                acc = ZERO
                for c, v in enumerate(vals):
                    if not v.is_zero() and not inv[r][c].is_zero():
                        acc = acc + inv[r][c] * v
                coeffs[g] = acc
        # exact reconstruction check
        rec: Matrix = {}
        for g, c in enumerate(coeffs):
            if not c.is_zero():
                rec = mat_add(rec, self.mats[g], c)
        if rec != {k: v for k, v in M.items() if not v.is_zero()}:
            raise ArithmeticError("matrix is outside the span of the basis")
        return coeffs


def _pivot_rows(rows: List[List[Scalar]]) -> List[int]:
    """Indices of a maximal set of linearly independent rows."""
    basis: List[Tuple[int, List[Scalar]]] = []  # (pivot col, reduced row)
    chosen = []
    for r, row in enumerate(rows):
        v = list(row)
        for pc, br in basis:
            if not v[pc].is_zero():
                f = v[pc]
                v = [x - f * y for x, y in zip(v, br)]
        pc = next((c for c, x in enumerate(v) if not x.is_zero()), None)
        if pc is None:
            continue
        inv = v[pc].inverse()
        basis.append((pc, [x * inv for x in v]))
        chosen.append(r)
    return chosen


def _inverse(A: List[List[Scalar]]) -> List[List[Scalar]]:
    n = len(A)
    M = [list(row) + [ONE if i == j else ZERO for j in range(n)] for i, row in enumerate(A)]
    for c in range(n):
        p = next(r for r in range(c, n) if not M[r][c].is_zero())
        M[c], M[p] = M[p], M[c]
        inv = M[c][c].inverse()
        M[c] = [x * inv for x in M[c]]
        for r in range(n):
            if r != c and not M[r][c].is_zero():
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [row[n:] for row in M]


@dataclass(eq=False)
class OrderedBasis:
    """Generators in the order ``a_1+ .. a_N+, h, a_N- .. a_1-``.

    Attributes
    ----------
    family, rank
        Algebra type.
    size
        Dimension of the defining representation.
    generators
        :class:`Generator` list in basis order.
    blocks
        :class:`Block` list in the same order.
    root_system
        The underlying :class:`RootSystem`.
    form
        Invariant bilinear form ``S`` (B, C, D only).
    """

    family: str
    rank: int
    size: int
    generators: List[Generator]
    blocks: List[Block]
    root_system: RootSystem
    form: Optional[Matrix] = None
    _solver: Optional[_CoordinateSolver] = field(default=None, repr=False)
    _adjoint_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.generators)

    @property
    def name(self) -> str:
        return "G2" if self.family == "G2" else f"{self.family}{self.rank}"

    def matrix(self, i: int) -> Matrix:
        return self.generators[i].matrix

    def coordinates(self, M: Matrix) -> List[Scalar]:
        """Exact coefficients of ``M`` in this basis.

        Raises
        ------
        ArithmeticError
            If ``M`` is not in the span of the generators.
        """
        if self._solver is None:
            self._solver = _CoordinateSolver([g.matrix for g in self.generators])
        return self._solver.solve(M)

    def block_of(self, i: int) -> Block:
        for b in self.blocks:
            if i in b.indices:
                return b
        raise IndexError(i)

    def block_index(self) -> List[int]:
        """``out[i]`` is the position in ``blocks`` of generator ``i``."""
        out = [0] * self.n
        for bi, b in enumerate(self.blocks):
            for i in b.indices:
                out[i] = bi
        return out

    def cartan_indices(self) -> Tuple[int, ...]:
        return next(b.indices for b in self.blocks if b.kind == "cartan")

    def combination(self, coeffs: Sequence) -> Matrix:
        """``sum_i coeffs[i] * X_i`` for exact coefficients."""
        out: Matrix = {}
        for i, c in enumerate(coeffs):
            if c:
                out = mat_add(out, self.generators[i].matrix, Scalar(c) if not isinstance(c, Scalar) else c)
        return out

    def parametrization(self) -> List[List[Dict[int, Scalar]]]:
        """Entries of ``sum_i a_i X_i`` as maps ``{i (1-based): coefficient}``."""
        P = [[{} for _ in range(self.size)] for _ in range(self.size)]
        for g in self.generators:
            for (r, c), v in g.matrix.items():
                P[r][c][g.label] = v
        return P

    def subalgebra_indices(self, blocks: Sequence[Block]) -> Tuple[int, ...]:
        return tuple(i for b in blocks for i in b.indices)


# -- per-family construction -----------------------------------------------


def _root_matrix(family: str, N: int, w) -> Matrix:
    """Root vector for the functional ``w`` on Cartan coordinates."""
    nz = [(i, int(x)) for i, x in enumerate(w) if x]
    if family == "A":
        (i, a), (j, b) = nz
        if a < 0:
            (i, a), (j, b) = (j, b), (i, a)
        return _unit(i, j)
    if len(nz) == 1:
        (j, c), = nz
        if family == "B":
            up = _sum(_unit(0, 1 + N + j), _unit(1 + j, 0, -1))
            return up if c > 0 else transpose(up)
        if family == "C":
            return _unit(j, N + j) if c > 0 else _unit(N + j, j)
        raise ArithmeticError(f"unexpected weight {w} for {family}")
    (i, a), (j, b) = nz
    off = 1 if family == "B" else 0
    if a != b:  # h_p - h_q
        p, q = (i, j) if a > 0 else (j, i)
        return _sum(_unit(off + p, off + q), _unit(off + N + q, off + N + p, -1))
    sign = -1 if family in ("B", "D") else 1
    up = _sum(_unit(off + i, off + N + j), _unit(off + j, off + N + i, sign))
    return up if a > 0 else transpose(up)


def _cartan_matrix(family: str, N: int, x) -> Matrix:
    out: Matrix = {}
    for i, v in enumerate(x):
        if not v:
            continue
        v = Scalar(v)
        if family == "A":
            out[(i, i)] = v
        elif family == "B":
            out[(1 + i, 1 + i)] = v
            out[(1 + N + i, 1 + N + i)] = -v
        else:
            out[(i, i)] = v
            out[(N + i, N + i)] = -v
    return out


def bilinear_form(family: str, N: int) -> Optional[Matrix]:
    """Form ``S`` with ``X^T S + S X = 0`` for every algebra element."""
    if family == "B":
        S = {(0, 0): ONE}
        for i in range(N):
            S[(1 + i, 1 + N + i)] = ONE
            S[(1 + N + i, 1 + i)] = ONE
        return S
    if family == "C":
        S = {}
        for i in range(N):
            S[(i, N + i)] = ONE
            S[(N + i, i)] = -ONE
        return S
    if family == "D":
        S = {}
        for i in range(N):
            S[(i, N + i)] = ONE
            S[(N + i, i)] = ONE
        return S
    return None


def _matrix_size(family: str, N: int) -> int:
    return {"A": N + 1, "B": 2 * N + 1, "C": 2 * N, "D": 2 * N, "G2": 7}[family]


def _classical_basis(family: str, N: int) -> OrderedBasis:
    rs = build_root_system(family, N)
    gens: List[Generator] = []
    blocks: List[Block] = []

    def add(mat, tag, root):
        gens.append(Generator(len(gens) + 1, mat, tag, root))
        return len(gens) - 1

    for k, Rk in enumerate(rs.partition, start=1):
        idx = [add(_root_matrix(family, N, rs.weight[r.coeffs]), ("plus", k), r) for r in Rk]
        blocks.append(Block("plus", k, tuple(idx)))
    idx = [add(_cartan_matrix(family, N, rs.coroot(j)), ("cartan", j + 1), None) for j in range(N)]
    blocks.append(Block("cartan", 0, tuple(idx)))
    for k in range(N, 0, -1):
        Rk = rs.partition[k - 1]
        idx = [add(_root_matrix(family, N, rs.weight[(-r).coeffs]), ("minus", k), -r)
               for r in reversed(Rk)]
        blocks.append(Block("minus", k, tuple(idx)))
    return OrderedBasis(family, N, _matrix_size(family, N), gens, blocks, rs,
                        bilinear_form(family, N))


# Fixed G2 representation: rows of sum_i a_i X_i.  Each entry is a list of
# (coefficient, generator label, carries sqrt(2)).
_G2_ROWS = [
    "0 | -10r | 6r | 3r | -5r | 9r | -12r",
    "5r | 7 | 4 | 1 | 0 | -3 | 6",
    "-9r | -11 | -7+8 | 2 | 3 | 0 | 10",
    "12r | 14 | 13 | -8 | -6 | -10 | 0",
    "10r | 0 | 12 | 9 | -7 | 11 | -14",
    "-6r | -12 | 0 | 5 | -4 | 7-8 | -13",
    "-3r | -9 | -5 | 0 | -1 | -2 | 8",
]


def _parse_g2_entry(text: str):
    import re

    out = []
    for sign, num, r in re.findall(r"([+-]?)(\d+)(r?)", text.replace(" ", "")):
        if num == "0" and not r:
            continue
        c = -1 if sign == "-" else 1
        out.append((c, int(num), bool(r)))
    return out


def _g2_basis() -> OrderedBasis:
    rs = build_root_system("G2")
    mats: List[Matrix] = [dict() for _ in range(14)]
    for r, row in enumerate(_G2_ROWS):
        for c, cell in enumerate(row.split("|")):
            for coef, lab, surd in _parse_g2_entry(cell):
                mats[lab - 1][(r, c)] = Scalar(0, coef) if surd else Scalar(coef)
    # identify roots from the Cartan action: [H, X] = w(H) X
    H = (mats[6], mats[7])
    by_weight = {w: c for c, w in rs.weight.items()}
    gens = []
    for i, m in enumerate(mats):
        label = i + 1
        if label in (7, 8):
            gens.append(Generator(label, m, ("cartan", label - 6), None))
            continue
        vals = []
        for Hj in H:
            br = commutator(Hj, m)
            pos, v = next(iter(m.items()))
            vals.append(br.get(pos, ZERO) / v)
        w = tuple(Fraction(v.rat) for v in vals)
        # functional on (c1, c2) with H7 <-> c1 and H8 <-> c2
        coeffs = by_weight[w]
        tag = ("plus", 1) if label <= 6 else ("minus", 1)
        gens.append(Generator(label, m, tag, Root(coeffs)))
    blocks = [Block("plus", 1, tuple(range(6)), "n+"), Block("cartan", 0, (6, 7)),
              Block("minus", 1, tuple(range(8, 14)), "n-")]
    return OrderedBasis("G2", 2, 7, gens, blocks, rs, None)


def build_matrix_basis(family: str, rank=None) -> OrderedBasis:
    """Ordered basis of the defining (G2: 7-dimensional) representation.

    Raises
    ------
    ConfigurationError
        For unsupported input.
    """
    family = str(family).upper()
    if family == "G2":
        if rank not in (None, 2):
            raise ConfigurationError("G2 has rank 2")
        return _g2_basis()
    rs = build_root_system(family, rank)
    return _classical_basis(family, rs.rank)


# -- structural verification -----------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    witness: Optional[str] = None


@dataclass
class BlockReport:
    algebra: str
    checks: List[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def get(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)


def _span_check(basis: OrderedBasis, left, right, target) -> Optional[str]:
    """First bracket ``[X_i, X_j]`` (i in left, j in right) leaving ``target``.

    ``target=None`` means the bracket must vanish.
    """
    allowed = set(target) if target is not None else set()
    for i in left:
        for j in right:
            br = commutator(basis.matrix(i), basis.matrix(j))
            if not br:
                continue
            if target is None:
                return f"[X{i + 1}, X{j + 1}] != 0"
            coords = basis.coordinates(br)
            bad = [k for k, c in enumerate(coords) if not c.is_zero() and k not in allowed]
            if bad:
                return f"[X{i + 1}, X{j + 1}] has a component along X{bad[0] + 1}"
    return None


def verify_block_structure(basis: OrderedBasis,
                           split: Optional[Sequence[Sequence[int]]] = None) -> BlockReport:
    """Commutativity and ideal checks for every block.

    For each ``a_k+-`` block: commutative, and ``[a_k, b_k] <= a_k`` where
    ``b_k+`` is spanned by ``a_l+`` for ``l >= k`` (likewise for minus).  The
    Cartan block must be commutative.

    Parameters
    ----------
    split
        Optional candidate decomposition of the first block into pieces
        (lists of 1-based labels).  Each piece is tested for commutativity
        and for being an ideal of the first block.
    """
    checks: List[Check] = []
    plus = [b for b in basis.blocks if b.kind == "plus"]
    minus = [b for b in basis.blocks if b.kind == "minus"]
    for b in basis.blocks:
        w = _span_check(basis, b.indices, b.indices, None)
        checks.append(Check(f"{b.name} commutative", w is None, w))
    for group in (plus, minus):
        for b in group:
            bk = [i for c in group if c.k >= b.k for i in c.indices]
            w = _span_check(basis, b.indices, bk, b.indices)
            sign = "+" if b.kind == "plus" else "-"
            checks.append(Check(f"{b.name} ideal in b{b.k}{sign}", w is None, w))
    if split:
        full = plus[0].indices
        for n, piece in enumerate(split, start=1):
            idx = [l - 1 for l in piece]
            w = _span_check(basis, idx, idx, None)
            checks.append(Check(f"piece {n} commutative", w is None, w))
            w = _span_check(basis, idx, full, idx)
            checks.append(Check(f"piece {n} ideal in {plus[0].name}", w is None, w))
    return BlockReport(basis.name, checks)
