"""Adjoint representation in the ordered basis.

``ad_X`` is stored as a sparse ``n x n`` matrix whose column ``j`` holds the
coordinates of ``[X, X_j]``.  Columns are obtained by expanding each bracket
in the basis (see :meth:`OrderedBasis.coordinates`), so they are consistent
with whatever matrices :mod:`weinorman.liealg` produced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .expoly import ExpPoly, PolyRing
from .liealg import Block, BlockReport, Check, OrderedBasis, commutator
from .scalars import ONE, ZERO, Scalar

__all__ = [
    "AdjointOperator",
    "adjoint_matrix",
    "adjoint_of",
    "structure_constants",
    "nilpotency_order",
    "exp_ad",
    "exp_ad_general",
    "verify_invariance",
    "candidate_blocks",
    "default_ring",
    "numeric_adjoints",
    "poly_matmul",
    "poly_identity",
]

SMatrix = Dict[Tuple[int, int], Scalar]


@dataclass(frozen=True)
class AdjointOperator:
    """Exact ``ad_X`` over the ordered basis.

    ``source`` maps 0-based generator indices to the coefficients of ``X``.
    """

    n: int
    matrix: SMatrix = field(repr=False)
    source: Tuple[Tuple[int, Scalar], ...]

    def __matmul__(self, other: "AdjointOperator") -> SMatrix:
        return _smul(self.matrix, other.matrix)

    def dense(self) -> List[List[Scalar]]:
        M = [[ZERO] * self.n for _ in range(self.n)]
        for (r, c), v in self.matrix.items():
            M[r][c] = v
        return M

    def to_numpy(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        for (r, c), v in self.matrix.items():
            M[r, c] = float(v)
        return M

    def is_strictly_upper(self) -> bool:
        return all(r < c for (r, c) in self.matrix)

    def is_strictly_lower(self) -> bool:
        return all(r > c for (r, c) in self.matrix)


def _smul(A: SMatrix, B: SMatrix) -> SMatrix:
    rows: Dict[int, List[Tuple[int, Scalar]]] = {}
    for (r, c), v in B.items():
        rows.setdefault(r, []).append((c, v))
    out: SMatrix = {}
    for (r, k), x in A.items():
        for c, y in rows.get(k, ()):
            out[(r, c)] = out.get((r, c), ZERO) + x * y
    return {k: v for k, v in out.items() if not v.is_zero()}


def adjoint_matrix(basis: OrderedBasis, i: int) -> AdjointOperator:
    """``ad_{X_i}`` for the 0-based generator index ``i``."""
    cache = basis._adjoint_cache
    op = cache.get(i)
    if op is not None:
        return op
    if not 0 <= i < basis.n:
        raise IndexError(f"generator index {i} out of range")
    X = basis.matrix(i)
    M: SMatrix = {}
    for j in range(basis.n):
        br = commutator(X, basis.matrix(j))
        if not br:
            continue
        for r, c in enumerate(basis.coordinates(br)):
            if not c.is_zero():
                M[(r, j)] = c
    op = AdjointOperator(basis.n, M, ((i, ONE),))
    cache[i] = op
    return op


def adjoint_of(basis: OrderedBasis, coeffs: Mapping[int, object]) -> AdjointOperator:
    """``ad_X`` for ``X = sum coeffs[i] X_i`` (exact coefficients)."""
    M: SMatrix = {}
    src = []
    for i, c in sorted(coeffs.items()):
        c = c if isinstance(c, Scalar) else Scalar(c)
        if c.is_zero():
            continue
        src.append((i, c))
        for k, v in adjoint_matrix(basis, i).matrix.items():
            s = M.get(k, ZERO) + c * v
            if s.is_zero():
                M.pop(k, None)
            else:
                M[k] = s
    return AdjointOperator(basis.n, M, tuple(src))


def structure_constants(basis: OrderedBasis) -> List[List[Tuple[int, int, Scalar]]]:
    """``out[i]`` lists ``(r, j, c)`` with ``[X_i, X_j] = sum_r c X_r``."""
    return [sorted((r, j, c) for (r, j), c in adjoint_matrix(basis, i).matrix.items())
            for i in range(basis.n)]


def numeric_adjoints(basis: OrderedBasis) -> np.ndarray:
    """Array ``ad[i]`` of dense float adjoint matrices."""
    key = "numeric"
    if key not in basis._adjoint_cache:
        basis._adjoint_cache[key] = np.array([adjoint_matrix(basis, i).to_numpy()
                                              for i in range(basis.n)])
    return basis._adjoint_cache[key]


def nilpotency_order(op: AdjointOperator) -> Optional[int]:
    """Smallest ``m`` with ``op^m = 0``, or ``None`` if ``op`` is not nilpotent."""
    if not op.matrix:
        return 1
    P = op.matrix
    for m in range(2, op.n + 2):
        P = _smul(P, op.matrix)
        if not P:
            return m
    return None


# -- polynomial matrices ------------------------------------------------------

PMatrix = Dict[Tuple[int, int], ExpPoly]


def default_ring(basis: OrderedBasis, with_a: bool = True) -> PolyRing:
    """Ring with ``u_1..u_n`` (Cartan block exponential) and ``a_1..a_n``."""
    return PolyRing(basis.n, basis.n if with_a else 0, basis.cartan_indices())


def poly_identity(ring: PolyRing, n: int) -> PMatrix:
    one = ring.one()
    return {(i, i): one for i in range(n)}


def poly_matmul(A: PMatrix, B: PMatrix) -> PMatrix:
    rows: Dict[int, List[Tuple[int, ExpPoly]]] = {}
    for (r, c), v in B.items():
        rows.setdefault(r, []).append((c, v))
    out: PMatrix = {}
    for (r, k), x in A.items():
        for c, y in rows.get(k, ()):
            key = (r, c)
            prod = x * y
            out[key] = out[key] + prod if key in out else prod
    return {k: v for k, v in out.items() if v}


def _padd(A: PMatrix, B: PMatrix, scale=1) -> PMatrix:
    out = dict(A)
    for k, v in B.items():
        v = v * scale if scale != 1 else v
        out[k] = out[k] + v if k in out else v
    return {k: v for k, v in out.items() if v}


def _ad_poly(basis: OrderedBasis, ring: PolyRing, coeffs: Mapping[int, ExpPoly]) -> PMatrix:
    out: PMatrix = {}
    for i, ci in coeffs.items():
        for k, v in adjoint_matrix(basis, i).matrix.items():
            term = ci * ring.const(v)
            out[k] = out[k] + term if k in out else term
    return {k: v for k, v in out.items() if v}


def _block_coeffs(basis, ring, block: Block, coeffs) -> Dict[int, ExpPoly]:
    if coeffs is None:
        return {i: ring.u(i) for i in block.indices}
    coeffs = list(coeffs)
    if len(coeffs) != len(block.indices):
        raise ValueError(f"block {block.name} has {len(block.indices)} generators, "
                         f"got {len(coeffs)} coefficients")
    out = {}
    for i, c in zip(block.indices, coeffs):
        out[i] = c if isinstance(c, ExpPoly) else ring.const(c)
    return out


def _resolve_block(basis: OrderedBasis, block) -> Block:
    if isinstance(block, Block):
        return block
    kind, k = block
    for b in basis.blocks:
        if b.kind == kind and (kind == "cartan" or b.k == k):
            return b
    raise ValueError(f"no block {block!r} in {basis.name}")


def exp_ad(basis: OrderedBasis, block, coeffs=None, ring: Optional[PolyRing] = None) -> PMatrix:
    """``exp(ad X)`` for ``X = sum_i coeffs_i X_i`` over one commutative block.

    Returns ``I + ad X + (ad X)^2 / 2`` as a sparse polynomial matrix.

    Parameters
    ----------
    block
        A :class:`Block` or a tag such as ``("plus", 1)``.
    coeffs
        One exact value or :class:`ExpPoly` per block generator; defaults to
        the ring variables ``u_i`` of the block.

    Raises
    ------
    ValueError
        For G2 (whose blocks are neither commutative nor of nilpotency
        order 3; use :func:`exp_ad_general`) or for the Cartan block.
    """
    if basis.family == "G2":
        raise ValueError("exp_ad is for classical algebras; use exp_ad_general for G2")
    ring = ring or default_ring(basis)
    block = _resolve_block(basis, block)
    if block.kind == "cartan":
        raise ValueError("exp_ad expects a root block; Cartan factors use exp_ad_general")
    c = _block_coeffs(basis, ring, block, coeffs)
    ad = _ad_poly(basis, ring, c)
    ad2 = poly_matmul(ad, ad)
    half = Fraction(1, 2)
    return _padd(_padd(poly_identity(ring, basis.n), ad), ad2, half)


def exp_ad_general(basis: OrderedBasis, i: int, var: Optional[int] = None,
                   ring: Optional[PolyRing] = None) -> PMatrix:
    """``exp(u ad X_i)`` for a single generator, exactly.

    For a nilpotent ``ad X_i`` this is the terminating series
    ``sum_m u^m (ad X_i)^m / m!``.  For a Cartan generator the result is
    diagonal with entries ``exp(c u)``, ``c`` the root values.

    Parameters
    ----------
    var
        0-based ring variable used for ``u`` (default ``i``).  For Cartan
        generators it must be an exponential variable of the ring.
    """
    ring = ring or default_ring(basis)
    var = i if var is None else var
    op = adjoint_matrix(basis, i)
    tag = basis.generators[i].tag[0]
    if tag == "cartan":
        out: PMatrix = {}
        for j in range(basis.n):
            c = op.matrix.get((j, j), ZERO)
            if not c.is_rational() or c.rat.denominator != 1:
                raise ArithmeticError("non-integral Cartan eigenvalue")
            out[(j, j)] = ring.exp({var: int(c.rat)}) if c else ring.one()
        return out
    u = ring.u(var)
    result = poly_identity(ring, basis.n)
    P: SMatrix = {(j, j): ONE for j in range(basis.n)}
    m = 0
    fact = 1
    upow = ring.one()
    while True:
        m += 1
        P = _smul(P, op.matrix)
        if not P:
            break
        if m > basis.n:
            raise ArithmeticError("adjoint operator is not nilpotent")
        fact *= m
        upow = upow * u
        term = {k: upow * ring.const(v / fact) for k, v in P.items()}
        result = _padd(result, term)
    return result


# -- invariance --------------------------------------------------------------


def candidate_blocks(basis: OrderedBasis, split: Sequence[Sequence[int]]) -> List[Block]:
    """Block list for a trial splitting of the positive part.

    ``split`` lists 1-based labels of positive root vectors per piece.  The
    matching negative pieces are built from the negated roots and placed in
    reverse order after the Cartan block.
    """
    by_root = {g.root.coeffs: g.label - 1 for g in basis.generators if g.root is not None}
    plus = [Block("plus", k, tuple(l - 1 for l in piece)) for k, piece in enumerate(split, 1)]
    minus = []
    for b in reversed(plus):
        idx = tuple(by_root[(-basis.generators[i].root).coeffs] for i in reversed(b.indices))
        minus.append(Block("minus", b.k, idx))
    cartan = next(b for b in basis.blocks if b.kind == "cartan")
    return plus + [cartan] + minus


def verify_invariance(basis: OrderedBasis, op: AdjointOperator,
                      blocks: Optional[Sequence[Block]] = None) -> BlockReport:
    """Check which subspaces ``ad X`` preserves, for ``X`` in one block ``a_k``.

    ``ad X`` must map each ``a_l+`` and ``a_l-`` with ``l < k`` into itself,
    and the middle block ``b_k+ + h + b_k-`` into itself.

    Parameters
    ----------
    blocks
        Block list to use instead of ``basis.blocks`` (see
        :func:`candidate_blocks`).
    """
    blocks = list(blocks) if blocks is not None else basis.blocks
    idx = {i for i, _ in op.source}
    home = [b for b in blocks if b.kind != "cartan" and idx <= set(b.indices)]
    if not home:
        raise ValueError("operator does not come from a single root block")
    k = home[0].k
    checks = []
    targets = [(b.name, b.indices) for b in blocks if b.kind != "cartan" and b.k < k]
    middle = tuple(i for b in blocks if b.kind == "cartan" or b.k >= k for i in b.indices)
    targets.append((f"middle block of k={k}", middle))
    for name, sub in targets:
        inside = set(sub)
        bad = next(((r, c) for (r, c) in op.matrix if c in inside and r not in inside), None)
        w = None if bad is None else f"ad X maps X{bad[1] + 1} onto X{bad[0] + 1}"
        checks.append(Check(f"{name} invariant", bad is None, w))
    return BlockReport(basis.name, checks)
