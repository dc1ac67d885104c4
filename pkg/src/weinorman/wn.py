"""Wei-Norman equations: the matrix ``A(u)``, the staged hierarchy, emission.

With ``K = exp(u_1 X_1) ... exp(u_n X_n)`` and ``K' K^{-1} = sum a_i X_i``
one gets ``a = A(u) u'`` where column ``l`` of ``A`` is
``Ad(exp(u_1 X_1) ... exp(u_{l-1} X_{l-1})) e_l``.

:func:`extract_hierarchy` never forms ``A`` or its inverse.  It walks the
blocks of the ordered basis and peels one group factor at a time: for the
current block ``G_b`` it applies ``Ad(G_b)^{-1}`` to the remaining vector,
reads off ``u'_b`` from the block's own coordinates (solving a unipotent
system when the block is not commutative) and drops those coordinates.  On
the Cartan block ``Ad(G_h)^{-1}`` is a diagonal of exponentials.  The result
is the same as ``A^{-1} a`` but every intermediate stays polynomial.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from gmpy2 import mpq

from .adjoint import adjoint_matrix, default_ring
from .emit import format_poly
from .expoly import ExpPoly, PolyRing
from .liealg import Block, OrderedBasis
from .scalars import Scalar

__all__ = [
    "Stage",
    "WNSystem",
    "assemble_A",
    "extract_hierarchy",
    "emit_equations",
    "parse_machine",
    "degree_report",
    "DegreeReport",
    "StageDegree",
    "RICCATI",
    "QUADRATURE",
]

RICCATI = "riccati"
QUADRATURE = "quadrature"

Vector = Dict[int, ExpPoly]


class _Engine:
    """Exact adjoint actions on vectors of ExpPoly over one basis."""

    def __init__(self, basis: OrderedBasis, ring: PolyRing):
        self.basis = basis
        self.ring = ring
        n = basis.n
        zero = ring.zero_key
        self.surds = False
        # by_col[i][j] = [(r, key offset, coefficient)] for [u_i X_i, X_j]
        self.by_col: List[Dict[int, List[Tuple[int, int, mpq]]]] = []
        self.cartan_eig: Dict[int, List[int]] = {}
        for i in range(n):
            op = adjoint_matrix(basis, i)
            cols: Dict[int, List[Tuple[int, int, mpq]]] = {}
            ukey = ring.key(u={i: 1}) - zero
            for (r, j), c in op.matrix.items():
                if c.surd:
                    self.surds = True
                    cols.setdefault(j, []).append((r, ukey + (1 << ring.s_shift),
                                                   mpq(c.surd.numerator, c.surd.denominator)))
                if c.rat:
                    cols.setdefault(j, []).append((r, ukey, mpq(c.rat.numerator, c.rat.denominator)))
            self.by_col.append(cols)
            if basis.generators[i].tag[0] == "cartan":
                eig = []
                for j in range(n):
                    c = op.matrix.get((j, j), Scalar(0))
                    if not c.is_rational() or c.rat.denominator != 1:
                        raise ArithmeticError("non-integral Cartan eigenvalue")
                    eig.append(int(c.rat))
                self.cartan_eig[i] = eig
        self.commutative = {b.indices: self._is_commutative(b.indices) for b in basis.blocks}

    def _is_commutative(self, idx) -> bool:
        s = set(idx)
        for i in idx:
            for j in self.by_col[i]:
                if j in s:
                    return False
        return True

    def ad(self, v: Vector, idxs: Sequence[int], scale: Fraction) -> Vector:
        """``ad_X v`` with ``X = scale * sum_{i in idxs} u_i X_i``."""
        acc: Dict[int, Dict[int, mpq]] = {}
        q0 = mpq(scale.numerator, scale.denominator)
        s_shift = self.ring.s_shift
        for i in idxs:
            cols = self.by_col[i]
            for j, p in v.items():
                entries = cols.get(j)
                if not entries:
                    continue
                terms = p.terms
                for r, off, q in entries:
                    d = acc.get(r)
                    if d is None:
                        d = acc[r] = {}
                    qq = q * q0
                    get = d.get
                    if self.surds:
                        for k, c in terms.items():
                            nk, cc = k + off, c * qq
                            if ((nk >> s_shift) & 0xFFFF) >= 2:
                                nk -= 2 << s_shift
                                cc *= 2
                            d[nk] = get(nk, 0) + cc
                    else:
                        for k, c in terms.items():
                            nk = k + off
                            d[nk] = get(nk, 0) + c * qq
        out: Vector = {}
        for r, d in acc.items():
            t = {k: c for k, c in d.items() if c}
            if t:
                out[r] = ExpPoly(self.ring, t)
        return out

    def exp_ad(self, v: Vector, idxs: Sequence[int], sign: int) -> Vector:
        """``exp(sign * ad X) v`` with ``X = sum_{i in idxs} u_i X_i``.

        ``X`` must be nilpotent; the series terminates exactly.
        """
        result = dict(v)
        term = v
        m = 0
        while term:
            m += 1
            if m > self.basis.n + 1:
                raise ArithmeticError("adjoint action is not nilpotent")
            term = self.ad(term, idxs, Fraction(sign, m))
            for r, p in term.items():
                q = result.get(r)
                s = p if q is None else q + p
                if s:
                    result[r] = s
                else:
                    result.pop(r, None)
        return result

    def cartan_scale(self, v: Vector, idxs: Sequence[int], sign: int) -> Vector:
        """Apply ``Ad(prod exp(u_i H_i))^{sign}`` (a diagonal of exponentials)."""
        out: Vector = {}
        ring = self.ring
        for j, p in v.items():
            form = {i: sign * self.cartan_eig[i][j] for i in idxs if self.cartan_eig[i][j]}
            out[j] = p.mul_term(ring.key(form=form), mpq(1)) if form else p
        return out

    def group_action(self, v: Vector, block: Block, sign: int, upto=None) -> Vector:
        """``Ad(G)^{sign} v`` for ``G`` the product of the block's factors.

        ``upto`` restricts to factors strictly before that generator index.
        """
        idx = block.indices if upto is None else tuple(i for i in block.indices if i < upto)
        if not idx:
            return v
        if block.kind == "cartan":
            return self.cartan_scale(v, idx, sign)
        if self.commutative[block.indices]:
            return self.exp_ad(v, idx, sign)
        # Ad(g1 g2 ... gm) = Ad(g1) ... Ad(gm): apply gm first
        order = reversed(idx) if sign > 0 else idx
        for i in order:
            v = self.exp_ad(v, (i,), sign)
        return v


def _vec_add(a: Vector, b: Vector) -> Vector:
    out = dict(a)
    for k, p in b.items():
        q = out.get(k)
        s = p if q is None else q + p
        if s:
            out[k] = s
        else:
            out.pop(k, None)
    return out


def _poly_vec_mul(N: Dict[Tuple[int, int], ExpPoly], v: Vector) -> Vector:
    out: Vector = {}
    for (r, c), p in N.items():
        w = v.get(c)
        if w is None:
            continue
        prod = p * w
        q = out.get(r)
        out[r] = prod if q is None else q + prod
    return {k: p for k, p in out.items() if p}


# -- data types ---------------------------------------------------------------


@dataclass
class Stage:
    """One subsystem of the hierarchy.

    Attributes
    ----------
    kind
        ``"riccati"`` or ``"quadrature"``.
    block
        The block of the ordered basis the stage solves for.
    variables
        0-based ``u`` indices determined by this stage.
    rhs
        ``u'_i`` for each variable, as ExpPoly in ``u`` and ``a``.
    flags
        Departures from the classical pattern (e.g. degree beyond 2).
    """

    kind: str
    block: Block
    variables: Tuple[int, ...]
    rhs: List[ExpPoly]
    flags: List[str] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.block.name

    def __eq__(self, other):
        return (isinstance(other, Stage) and self.kind == other.kind
                and self.variables == other.variables and self.rhs == other.rhs
                and self.block.name == other.block.name)


@dataclass(eq=False)
class WNSystem:
    """Staged Wei-Norman system of one algebra."""

    basis: Optional[OrderedBasis]
    ring: PolyRing
    stages: List[Stage]
    algebra: str = ""
    _A: Optional[dict] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.ring.n_u

    @property
    def A_symbolic(self):
        """Sparse symbolic ``A(u)`` (computed on first access)."""
        if self._A is None:
            if self.basis is None:
                raise ValueError("system has no basis attached")
            self._A = assemble_A(self.basis, self.ring)
        return self._A

    def rhs(self) -> List[ExpPoly]:
        """All right-hand sides ordered by variable index."""
        out = [None] * self.n
        for st in self.stages:
            for v, p in zip(st.variables, st.rhs):
                out[v] = p
        return out

    def stage_of(self, var: int) -> int:
        for k, st in enumerate(self.stages):
            if var in st.variables:
                return k
        raise IndexError(var)

    def __eq__(self, other):
        return (isinstance(other, WNSystem) and self.ring == other.ring
                and self.stages == other.stages)


# -- assembly -----------------------------------------------------------------


def assemble_A(basis: OrderedBasis, ring: Optional[PolyRing] = None):
    """Exact ``A(u)`` as a sparse map ``(row, col) -> ExpPoly``.

    Column ``l`` is ``Ad(G_1 ... G_{b-1}) Ad(Q_l) e_l`` where ``G_c`` are the
    block factors before the block ``b`` of ``l`` and ``Q_l`` the factors of
    block ``b`` preceding ``l``.  Intended for small algebras and checks.
    """
    ring = ring or default_ring(basis)
    eng = _Engine(basis, ring)
    bidx = basis.block_index()
    A = {}
    one = ring.one()
    for l in range(basis.n):
        b = bidx[l]
        v: Vector = {l: one}
        v = eng.group_action(v, basis.blocks[b], +1, upto=l)
        for c in range(b - 1, -1, -1):
            v = eng.group_action(v, basis.blocks[c], +1)
        for r, p in v.items():
            A[(r, l)] = p
    return A


# -- hierarchy ----------------------------------------------------------------


def _classify(stage_vars: Tuple[int, ...], rhs: List[ExpPoly], family: str, kind_hint: str):
    own = set(stage_vars)
    deps = set()
    for p in rhs:
        deps |= p.u_support()
    own_dep = deps & own
    flags = []
    own_deg = max((p.total_degree(stage_vars) for p in rhs), default=0)
    if kind_hint == "cartan" or not own_dep:
        kind = QUADRATURE
    elif kind_hint == "minus":
        kind = QUADRATURE
        flags.append("sequential: right-hand sides depend on earlier variables of the same block")
    else:
        kind = RICCATI
    if kind == RICCATI and own_deg > 2:
        flags.append(f"degree {own_deg} in own variables exceeds the Riccati bound 2")
    return kind, flags


def extract_hierarchy(basis: OrderedBasis, ring: Optional[PolyRing] = None) -> WNSystem:
    """Solve ``a = A(u) u'`` blockwise and return the staged system.

    Stages follow the basis blocks: ``a_1+ .. a_N+`` (Riccati), ``h`` and
    ``a_N- .. a_1-`` (quadratures).  For G2 the blocks are ``n+``, ``h``,
    ``n-``; the ``n+`` stage is flagged because its degree exceeds 2.
    """
    ring = ring or default_ring(basis)
    eng = _Engine(basis, ring)
    cur: Vector = {j: ring.a(j) for j in range(basis.n)}
    stages: List[Stage] = []
    for block in basis.blocks:
        idx = block.indices
        if block.kind == "cartan":
            sol = {i: cur.get(i, ring.zero()) for i in idx}
            R = eng.cartan_scale(cur, idx, -1)
        else:
            R = eng.group_action(cur, block, -1)
            RB = {i: R[i] for i in idx if i in R}
            if eng.commutative[idx]:
                sol = RB
            else:
                sol = _unipotent_solve(eng, block, RB)
        rhs = [sol.get(i, ring.zero()) for i in idx]
        kind, flags = _classify(idx, rhs, basis.family, block.kind)
        stages.append(Stage(kind, block, idx, rhs, flags))
        drop = set(idx)
        cur = {j: p for j, p in R.items() if j not in drop}
    return WNSystem(basis, ring, stages, basis.name)


def _unipotent_solve(eng: _Engine, block: Block, RB: Vector) -> Vector:
    """Solve ``C x = RB`` where column ``l`` of ``C`` is ``Ad(T_l)^{-1} e_l``.

    ``T_l`` is the product of the block factors after ``l``.  ``C - I`` is
    nilpotent, so ``C^{-1} = sum_k (I - C)^k`` terminates.
    """
    ring = eng.ring
    idx = block.indices
    N: Dict[Tuple[int, int], ExpPoly] = {}
    for pos, l in enumerate(idx):
        v: Vector = {l: ring.one()}
        for j in idx[pos + 1:]:
            v = eng.exp_ad(v, (j,), -1)
        for r, p in v.items():
            if r == l:
                p = p - ring.one()
            if r not in idx:
                raise ArithmeticError(f"block {block.name} is not a subalgebra")
            if p:
                N[(r, l)] = p
    x = dict(RB)
    term = dict(RB)
    for _ in range(len(idx) + 1):
        term = {k: -p for k, p in _poly_vec_mul(N, term).items()}
        if not term:
            return x
        x = _vec_add(x, term)
    raise ArithmeticError("unipotent solve did not terminate")


# -- degree report --------------------------------------------------------------


@dataclass
class StageDegree:
    stage: str
    kind: str
    total_degree: int
    own_degree: int
    per_variable: Dict[str, int]
    flags: List[str]


@dataclass
class DegreeReport:
    algebra: str
    stages: List[StageDegree]

    @property
    def max_total_degree(self) -> int:
        return max(s.total_degree for s in self.stages)

    def to_dict(self):
        return {"algebra": self.algebra,
                "stages": [s.__dict__ for s in self.stages]}


def degree_report(sys: WNSystem) -> DegreeReport:
    """Per-stage maximal total u-degree, own-variable degree and per-variable degree."""
    out = []
    n = sys.n
    for st in sys.stages:
        per = {}
        for i in range(n):
            d = max((p.degree_in(i) for p in st.rhs), default=-1)
            if d > 0:
                per[f"u{i + 1}"] = d
        out.append(StageDegree(
            st.name, st.kind,
            max((p.total_degree() for p in st.rhs), default=0),
            max((p.total_degree(st.variables) for p in st.rhs), default=0),
            per, list(st.flags)))
    return DegreeReport(sys.algebra, out)


# -- emission -------------------------------------------------------------------


def _var_list(vs, style="plain"):
    if style == "latex":
        return ", ".join(f"u_{{{v + 1}}}" for v in vs)
    return " ".join(f"u{v + 1}" for v in vs)


def emit_equations(sys: WNSystem, format: str = "plain") -> str:
    """Render the staged system as ``plain``, ``latex`` or ``machine`` text.

    ``machine`` is a JSON document whose right-hand sides use the
    expression syntax of :mod:`weinorman.exprdsl` and parse back exactly
    with :func:`parse_machine`.
    """
    if format in ("plain", "text"):
        lines = [f"# Wei-Norman equations for {sys.algebra}: "
                 f"{sys.n} equations in {len(sys.stages)} stages"]
        for k, st in enumerate(sys.stages, start=1):
            lines.append("")
            lines.append(f"# stage {k}: {st.name} {st.kind} [{_var_list(st.variables)}]")
            for f in st.flags:
                lines.append(f"# note: {f}")
            for v, p in zip(st.variables, st.rhs):
                lines.append(f"u{v + 1}' = {format_poly(p)}")
        return "\n".join(lines) + "\n"
    if format == "latex":
        lines = [f"% Wei-Norman equations for {sys.algebra}"]
        for k, st in enumerate(sys.stages, start=1):
            lines.append(f"% stage {k}: {st.name} {st.kind} ({_var_list(st.variables, 'latex')})")
            lines.append("\\begin{align*}")
            rows = [f"u^{{\\prime}}_{{{v + 1}}} &= {format_poly(p, 'latex')}"
                    for v, p in zip(st.variables, st.rhs)]
            lines.append(",\\\\\n".join(rows))
            lines.append("\\end{align*}")
        return "\n".join(lines) + "\n"
    if format in ("machine", "json"):
        rep = degree_report(sys)
        doc = {
            "format": "weinorman-equations/1",
            "algebra": sys.algebra,
            "n": sys.n,
            "exp_vars": [f"u{i + 1}" for i in sys.ring.exp_vars],
            "max_total_degree": rep.max_total_degree,
            "stages": [
                {
                    "block": st.name,
                    "kind": st.kind,
                    "block_kind": st.block.kind,
                    "k": st.block.k,
                    "variables": [f"u{v + 1}" for v in st.variables],
                    "flags": st.flags,
                    "total_degree": sd.total_degree,
                    "own_degree": sd.own_degree,
                    "equations": [{"lhs": f"u{v + 1}", "rhs": format_poly(p)}
                                  for v, p in zip(st.variables, st.rhs)],
                }
                for st, sd in zip(sys.stages, rep.stages)
            ],
        }
        return json.dumps(doc, indent=2) + "\n"
    raise ValueError(f"unknown format {format!r}")


def parse_machine(text: str, basis: Optional[OrderedBasis] = None) -> WNSystem:
    """Inverse of ``emit_equations(sys, "machine")``."""
    from .exprdsl import parse_expr, symbol_predicate, to_expoly

    doc = json.loads(text)
    if doc.get("format") != "weinorman-equations/1":
        raise ValueError("not a weinorman equation document")
    n = int(doc["n"])
    exp_vars = [int(v[1:]) - 1 for v in doc["exp_vars"]]
    ring = PolyRing(n, n, exp_vars)
    ok = symbol_predicate(n)
    stages = []
    for st in doc["stages"]:
        vars_ = tuple(int(v[1:]) - 1 for v in st["variables"])
        title = st["block"] if st["block"] in ("n+", "n-") else None
        block = Block(st["block_kind"], int(st["k"]), vars_, title)
        rhs = [to_expoly(parse_expr(eq["rhs"], ok), ring) for eq in st["equations"]]
        stages.append(Stage(st["kind"], block, vars_, rhs, list(st["flags"])))
    return WNSystem(basis, ring, stages, doc["algebra"])
