"""Verification suites shared by ``weinorman verify`` and the test-suite.

Each suite returns a :class:`~weinorman.liealg.BlockReport` of named checks.
For G2 the checks state the expected negative findings, so a passing G2
report means "the classical structure is absent, as it should be".
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from .adjoint import (adjoint_matrix, adjoint_of, candidate_blocks, default_ring, exp_ad,
                      exp_ad_general, nilpotency_order, poly_identity, poly_matmul,
                      verify_invariance)
from .integrate import (CoeffVector, SolveOptions, compare_with_reference, reference_solution,
                        _compiled_stages, _numeric, solve_wn)
from .liealg import BlockReport, Check, OrderedBasis, verify_block_structure
from .wn import QUADRATURE, RICCATI, WNSystem, degree_report, extract_hierarchy

__all__ = [
    "G2_SPLIT",
    "structural_suite",
    "g2_suite",
    "hierarchy_checks",
    "invariant_subspaces",
    "TrialResult",
    "roundtrip_trials",
]

G2_SPLIT = ((1, 2, 3), (4, 5, 6))


def _check(name, witness=None) -> Check:
    return Check(name, witness is None, witness)


def invariant_subspaces(basis: OrderedBasis, k: int):
    """Subspaces preserved by ``ad X`` for ``X`` in ``a_k+-``.

    These are ``a_l+`` and ``a_l-`` for ``l < k`` and the middle block
    ``b_k+ + h + b_k-``; together they partition the basis.
    """
    out = [b.indices for b in basis.blocks if b.kind != "cartan" and b.k < k]
    out.append(tuple(i for b in basis.blocks if b.kind == "cartan" or b.k >= k
                     for i in b.indices))
    return out


def _off_block(M, parts) -> Optional[str]:
    where = {i: p for p, part in enumerate(parts) for i in part}
    for (r, c) in M:
        if where[r] != where[c]:
            return f"entry ({r + 1},{c + 1})"
    return None


def _random_scalars(rng: random.Random, m: int) -> List[Fraction]:
    vals = [Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(m)]
    if not any(vals):
        vals[0] = Fraction(1)
    return vals


def structural_suite(basis: OrderedBasis, n_random: int = 20, seed: int = 0) -> BlockReport:
    """Exact structure checks for a classical algebra.

    1. every ``a_k+-`` is commutative and an ideal in ``b_k+-``;
    2. positive root adjoints are strictly upper triangular, negative ones
       strictly lower;
    3. ``(ad X)^3 = 0`` for every root vector and for ``n_random`` random
       rational elements of the root blocks;
    4. ``exp(ad X)`` over each root block equals ``I + ad X + (ad X)^2/2``,
       equals the product of the single-generator exponentials, and is block
       diagonal with respect to :func:`invariant_subspaces`.
    """
    if basis.family == "G2":
        raise ValueError("use g2_suite for G2")
    rng = random.Random(seed)
    checks = list(verify_block_structure(basis).checks)

    bad_up = bad_lo = None
    bad_nil = None
    for g in basis.generators:
        i = g.label - 1
        op = adjoint_matrix(basis, i)
        if g.tag[0] == "plus" and bad_up is None and not op.is_strictly_upper():
            bad_up = f"ad X{g.label}"
        if g.tag[0] == "minus" and bad_lo is None and not op.is_strictly_lower():
            bad_lo = f"ad X{g.label}"
        if g.tag[0] != "cartan" and bad_nil is None:
            m = nilpotency_order(op)
            if m is None or m > 3:
                bad_nil = f"ad X{g.label} has order {m}"
    checks.append(_check("positive root adjoints strictly upper triangular", bad_up))
    checks.append(_check("negative root adjoints strictly lower triangular", bad_lo))
    checks.append(_check("(ad X)^3 = 0 for root vectors", bad_nil))

    root_blocks = [b for b in basis.blocks if b.kind != "cartan"]
    bad_rand = None
    for trial in range(n_random):
        b = root_blocks[trial % len(root_blocks)]
        vals = _random_scalars(rng, len(b.indices))
        op = adjoint_of(basis, dict(zip(b.indices, vals)))
        m = nilpotency_order(op)
        if bad_rand is None and (m is None or m > 3):
            bad_rand = f"element of {b.name} with order {m}"
    checks.append(_check(f"(ad X)^3 = 0 for {n_random} random block elements", bad_rand))

    ring = default_ring(basis, with_a=False)
    bad_series = bad_prod = bad_diag = None
    for b in root_blocks:
        E = exp_ad(basis, b, ring=ring)
        coeffs = {i: ring.u(i) for i in b.indices}
        ad = {}
        for i, u in coeffs.items():
            for key, v in adjoint_matrix(basis, i).matrix.items():
                t = u * ring.const(v)
                ad[key] = ad[key] + t if key in ad else t
        ad = {k: v for k, v in ad.items() if v}
        ad3 = poly_matmul(poly_matmul(ad, ad), ad)
        if bad_series is None and ad3:
            bad_series = f"(ad X)^3 != 0 on {b.name}"
        P = poly_identity(ring, basis.n)
        for i in b.indices:
            P = poly_matmul(P, exp_ad_general(basis, i, ring=ring))
        if bad_prod is None and P != E:
            bad_prod = f"product over {b.name} differs from exp of the sum"
        if bad_diag is None:
            w = _off_block(E, invariant_subspaces(basis, b.k))
            if w:
                bad_diag = f"exp(ad X) on {b.name} has off-block {w}"
    checks.append(_check("exp(ad X) = I + ad X + (ad X)^2/2 on every root block", bad_series))
    checks.append(_check("exp(ad X) equals the product of single exponentials", bad_prod))
    checks.append(_check("exp(ad X) block diagonal on invariant subspaces", bad_diag))
    return BlockReport(basis.name, checks)


def hierarchy_checks(sys: WNSystem) -> BlockReport:
    """Stage count, stage sizes, degree bound and dependence structure."""
    basis = sys.basis
    checks = []
    N = basis.rank
    stages = sys.stages
    if basis.family != "G2":
        checks.append(_check(f"{2 * N + 1} stages",
                             None if len(stages) == 2 * N + 1 else f"{len(stages)} stages"))
        sizes = [len(s.variables) for s in stages]
        expect = [len(b.indices) for b in basis.blocks]
        checks.append(_check("stage sizes follow the blocks",
                             None if sizes == expect else f"{sizes} vs {expect}"))
        kinds = [s.kind for s in stages]
        want = [RICCATI] * N + [QUADRATURE] * (N + 1)
        checks.append(_check("Riccati stages then quadratures",
                             None if kinds == want else ",".join(kinds)))
        rep = degree_report(sys)
        over = [s.stage for s in rep.stages if s.kind == RICCATI and s.own_degree > 2]
        checks.append(_check("Riccati stages have degree <= 2 in own variables",
                             f"stages {over}" if over else None))
    seen = set()
    bad_dep = bad_own = None
    for st in stages:
        own = set(st.variables)
        allowed = seen | own
        for v, p in zip(st.variables, st.rhs):
            extra = p.u_support() - allowed
            if extra and bad_dep is None:
                bad_dep = f"u{v + 1}' uses u{min(extra) + 1}"
            if p.a_degree() > 1 and bad_dep is None:
                bad_dep = f"u{v + 1}' is not linear in a"
            if st.kind == QUADRATURE and basis.family != "G2" and p.u_support() & own:
                bad_own = bad_own or f"u{v + 1}' depends on its own stage"
        seen |= own
    checks.append(_check("stage k uses only variables of stages 1..k and is linear in a", bad_dep))
    if basis.family != "G2":
        checks.append(_check("quadratures do not depend on their own variables", bad_own))
    return BlockReport(sys.algebra, checks)


def g2_suite(basis: OrderedBasis, sys: Optional[WNSystem] = None) -> BlockReport:
    """Expected negative findings for G2; each check passes when the finding holds."""
    if basis.family != "G2":
        raise ValueError("g2_suite needs the G2 basis")
    checks = []
    orders = [nilpotency_order(adjoint_matrix(basis, i)) for i in range(basis.n)
              if basis.generators[i].tag[0] != "cartan"]
    checks.append(_check("some root vector has nilpotency order exactly 4",
                         None if 4 in orders else f"orders {orders}"))
    checks.append(_check("no root vector exceeds order 4",
                         None if all(o is not None and o <= 4 for o in orders) else f"{orders}"))
    split = verify_block_structure(basis, split=G2_SPLIT)
    first = split.get("piece 1 commutative")
    second = split.get("piece 2 commutative")
    ideal = split.get("piece 1 ideal in n+")
    checks.append(_check("c_a = span{X1,X2,X3} is commutative", first.witness))
    checks.append(Check("c_b = span{X4,X5,X6} is not commutative", not second.passed,
                        second.witness or "c_b commutes"))
    checks.append(Check("c_a is not an ideal in n+", not ideal.passed,
                        ideal.witness or "c_a is an ideal"))
    nplus = split.get("n+ commutative")
    checks.append(Check("n+ is not commutative", not nplus.passed, nplus.witness))
    blocks = candidate_blocks(basis, G2_SPLIT)
    failing = []
    for label in G2_SPLIT[1]:
        rep = verify_invariance(basis, adjoint_matrix(basis, label - 1), blocks)
        if not rep.passed:
            failing.append(f"X{label}")
    checks.append(Check("invariance fails for some element of c_b", bool(failing),
                        "failing: " + ", ".join(failing) if failing else "none fails"))
    sys = sys or extract_hierarchy(basis)
    rep = degree_report(sys)
    nplus_stage = rep.stages[0]
    checks.append(Check("n+ stage reaches total degree 4", nplus_stage.total_degree == 4,
                        f"degree {nplus_stage.total_degree}"))
    checks.append(Check("n+ stage is flagged", bool(nplus_stage.flags),
                        "; ".join(nplus_stage.flags) or "no flag"))
    checks.append(Check("three stages n+, h, n-", [s.name for s in sys.stages] == ["n+", "h", "n-"],
                        ",".join(s.name for s in sys.stages)))
    return BlockReport(basis.name, checks)


@dataclass
class TrialResult:
    index: int
    passed: bool
    max_rel_error: float
    form_residual: Optional[float]
    det_drift: float
    seconds: float
    reanchors: int
    mode: str
    failure: Optional[str] = None
    coefficients: List[str] = field(default_factory=list)


def roundtrip_trials(sys: WNSystem, trials: int = 5, seed: int = 0, tol: float = 1e-6,
                     group_tol: float = 1e-8, mode: str = "staged", reanchor: bool = True,
                     tspan=(0.0, 1.0), options: Optional[SolveOptions] = None,
                     jobs: int = 1) -> List[TrialResult]:
    """Random trigonometric coefficients, Wei-Norman solve versus the oracle.

    Trial ``i`` uses ``numpy.random.default_rng([seed, i])`` so results do
    not depend on how many trials run.  With ``jobs > 1`` trials run on a
    thread pool; results are returned in trial order either way.
    """
    basis = sys.basis
    opt = options or SolveOptions(mode=mode, reanchor=reanchor)
    # build the shared read-only caches before any worker starts
    _numeric(basis)
    _compiled_stages(sys)

    def run(i):
        rng = np.random.default_rng([seed, i])
        cv = CoeffVector.random_trig(basis.n, rng)
        t0 = time.perf_counter()
        traj, rep = solve_wn(sys, cv, tspan, opt)
        ref = reference_solution(basis, cv, tspan)
        compare_with_reference(traj, ref, basis, rep)
        dt = time.perf_counter() - t0
        ok = rep.success and rep.max_rel_error < tol and rep.det_drift < group_tol
        if rep.form_residual is not None:
            ok = ok and rep.form_residual < group_tol
        return TrialResult(i, ok, rep.max_rel_error, rep.form_residual, rep.det_drift, dt,
                           len(rep.reanchor_times), opt.mode, rep.failure, cv.texts())

    if jobs <= 1 or trials <= 1:
        return [run(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=min(jobs, trials)) as pool:
        return list(pool.map(run, range(trials)))
