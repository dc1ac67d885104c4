from fractions import Fraction

import pytest

from latex_golden import load_parametrization
from weinorman.liealg import (build_matrix_basis, commutator, matmul, transpose, mat_add,
                              verify_block_structure)
from weinorman.rootsys import ConfigurationError
from weinorman.scalars import Scalar

GOLDEN = [("b2_basis", "B", 2), ("b3_basis", "B", 3), ("b4_basis", "B", 4),
          ("c3_basis", "C", 3), ("c4_basis", "C", 4), ("a4_basis", "A", 4),
          ("d4_basis", "D", 4), ("g2_basis", "G2", None)]

ALGEBRAS = [("A", 1), ("A", 2), ("A", 3), ("A", 4), ("B", 2), ("B", 3), ("B", 4),
            ("C", 3), ("C", 4), ("D", 4), ("D", 5)]
DIM = {"A": lambda N: N * (N + 2), "B": lambda N: N * (2 * N + 1),
       "C": lambda N: N * (2 * N + 1), "D": lambda N: N * (2 * N - 1)}


def _as_pairs(entry):
    return {lab: (c.rat, c.surd) for lab, c in entry.items() if c}


@pytest.mark.parametrize("name,family,rank", GOLDEN)
def test_parametrization_matches_printed_matrix(name, family, rank):
    gold = load_parametrization(name)
    basis = build_matrix_basis(family, rank)
    mine = basis.parametrization()
    assert len(gold) == len(mine) == basis.size
    for r in range(basis.size):
        for c in range(basis.size):
            g = {k: v for k, v in gold[r][c].items() if v != (0, 0)}
            assert _as_pairs(mine[r][c]) == g, f"entry ({r + 1},{c + 1})"


@pytest.mark.parametrize("family,N", ALGEBRAS)
def test_dimension_and_form(family, N):
    basis = build_matrix_basis(family, N)
    assert basis.n == DIM[family](N)
    S = basis.form
    for i in range(basis.n):
        X = basis.matrix(i)
        trace = sum((v for (r, c), v in X.items() if r == c), Scalar(0))
        assert trace == 0
        if S is not None:
            assert not mat_add(matmul(transpose(X), S), matmul(S, X))


@pytest.mark.parametrize("family,N", ALGEBRAS)
def test_negative_root_vectors_are_transposes(family, N):
    basis = build_matrix_basis(family, N)
    by_root = {g.root.coeffs: g for g in basis.generators if g.root is not None}
    for g in basis.generators:
        if g.tag[0] == "plus":
            neg = by_root[tuple(-c for c in g.root.coeffs)]
            assert basis.matrix(neg.label - 1) == transpose(basis.matrix(g.label - 1))
        if g.tag[0] == "cartan":
            assert all(r == c for (r, c) in basis.matrix(g.label - 1))


@pytest.mark.parametrize("family,N", ALGEBRAS)
def test_root_vectors_are_eigenvectors_of_cartan(family, N):
    basis = build_matrix_basis(family, N)
    cartan = basis.cartan_indices()
    for g in basis.generators:
        if g.root is None:
            continue
        X = basis.matrix(g.label - 1)
        for h in cartan:
            br = commutator(basis.matrix(h), X)
            coords = basis.coordinates(br)
            nz = [k for k, c in enumerate(coords) if c]
            assert nz in ([], [g.label - 1])


def test_coordinates_round_trip():
    basis = build_matrix_basis("C", 3)
    coeffs = [Fraction(k, 3) - 2 for k in range(basis.n)]
    M = basis.combination(coeffs)
    assert basis.coordinates(M) == [Scalar(c) for c in coeffs]


def test_coordinates_reject_non_members():
    basis = build_matrix_basis("B", 2)
    with pytest.raises(ArithmeticError):
        basis.coordinates({(0, 0): Scalar(1)})


@pytest.mark.parametrize("family,N,sizes", [
    ("B", 2, [3, 1, 2, 1, 3]), ("C", 4, [10, 3, 2, 1, 4, 1, 2, 3, 10]),
    ("B", 3, [5, 3, 1, 3, 1, 3, 5]),
])
def test_block_sizes(family, N, sizes):
    basis = build_matrix_basis(family, N)
    assert [len(b.indices) for b in basis.blocks] == sizes
    labels = [i for b in basis.blocks for i in b.indices]
    assert labels == list(range(basis.n))


def test_b2_block_spans():
    basis = build_matrix_basis("B", 2)
    spans = {b.name: [i + 1 for i in b.indices] for b in basis.blocks}
    assert spans == {"a1+": [1, 2, 3], "a2+": [4], "h": [5, 6], "a2-": [7], "a1-": [8, 9, 10]}


@pytest.mark.parametrize("family,N", ALGEBRAS)
def test_commutative_ideal_blocks(family, N):
    rep = verify_block_structure(build_matrix_basis(family, N))
    assert rep.passed, rep.failed()


def test_g2_split_findings():
    basis = build_matrix_basis("G2")
    assert [b.name for b in basis.blocks] == ["n+", "h", "n-"]
    rep = verify_block_structure(basis, split=[(1, 2, 3), (4, 5, 6)])
    assert rep.get("piece 1 commutative").passed
    assert not rep.get("piece 2 commutative").passed
    assert not rep.get("piece 1 ideal in n+").passed
    assert not rep.get("n+ commutative").passed


def test_unsupported_algebra():
    with pytest.raises(ConfigurationError):
        build_matrix_basis("E", 6)
    with pytest.raises(ConfigurationError):
        build_matrix_basis("B", 1)
