import numpy as np
import pytest
from scipy.linalg import expm

from weinorman.integrate import (CoeffVector, NumericalFailure, SolveOptions,
                                 compare_with_reference, group_residuals, numeric_A,
                                 reconstruct_K, reference_solution, solve_wn, trajectory_csv,
                                 trajectory_json)
from weinorman.liealg import build_matrix_basis
from weinorman.wn import assemble_A, extract_hierarchy

_CACHE = {}


def setup(family, N=None):
    key = (family, N)
    if key not in _CACHE:
        basis = build_matrix_basis(family, N)
        _CACHE[key] = (basis, extract_hierarchy(basis))
    return _CACHE[key]


def dense_generators(basis):
    out = []
    for i in range(basis.n):
        X = np.zeros((basis.size, basis.size))
        for (r, c), v in basis.matrix(i).items():
            X[r, c] = float(v.rat) + float(v.surd) * np.sqrt(2)
        out.append(X)
    return out


def _M(basis, a):
    return sum(ak * X for ak, X in zip(a, dense_generators(basis)))


@pytest.mark.parametrize("family,N", [("A", 2), ("B", 2), ("C", 3), ("G2", None)])
def test_zero_coefficients(family, N):
    basis, sys = setup(family, N)
    traj, rep = solve_wn(sys, CoeffVector.zeros(basis.n), (0, 1))
    assert rep.success
    assert np.all(traj.u_values == 0)
    assert np.allclose(traj.K_values, np.eye(basis.size), atol=0, rtol=0)
    ref = reference_solution(basis, CoeffVector.zeros(basis.n))
    assert np.all(ref.K_values == np.eye(basis.size))


@pytest.mark.parametrize("family,N", [("A", 3), ("B", 2), ("D", 4), ("G2", None)])
@pytest.mark.parametrize("mode", ["staged", "monolithic"])
def test_first_generator_only(family, N, mode):
    basis, sys = setup(family, N)
    a = [1] + [0] * (basis.n - 1)
    traj, rep = solve_wn(sys, CoeffVector(a), (0, 1), SolveOptions(mode=mode))
    assert rep.success
    assert np.abs(traj.u_values[:, 0] - traj.times).max() < 1e-12
    assert np.all(traj.u_values[:, 1:] == 0)


def test_reconstruct_K_identity_and_single_factor():
    basis, _ = setup("C", 3)
    assert np.array_equal(reconstruct_K(basis, np.zeros(basis.n)), np.eye(basis.size))
    Xs = dense_generators(basis)
    for i in (0, 7, 10, 15, 20):
        u = np.zeros(basis.n)
        u[i] = 0.7
        assert np.abs(reconstruct_K(basis, u) - expm(0.7 * Xs[i])).max() < 1e-12


def test_reconstruct_K_is_ordered_product():
    basis, _ = setup("B", 2)
    rng = np.random.default_rng(5)
    u = rng.uniform(-1, 1, basis.n)
    P = np.eye(basis.size)
    for uk, X in zip(u, dense_generators(basis)):
        P = P @ expm(uk * X)
    K = reconstruct_K(basis, u)
    assert np.abs(K - P).max() < 1e-12
    form, det = group_residuals(basis, K)
    assert form < 1e-10 and det < 1e-10


def test_numeric_A_matches_exact():
    basis, sys = setup("B", 3)
    A = assemble_A(basis, sys.ring)
    u = np.random.default_rng(3).uniform(-1, 1, basis.n)
    An = np.zeros((basis.n, basis.n))
    for (r, c), p in A.items():
        An[r, c] = p.evaluate(u)
    assert np.abs(numeric_A(basis, u) - An).max() < 1e-12


def test_reference_constant_M():
    basis, _ = setup("B", 2)
    a = np.random.default_rng(8).uniform(-1, 1, basis.n)
    ts = np.linspace(0, 1, 11)
    ref = reference_solution(basis, CoeffVector([float(x) for x in a]), (0, 1), t_eval=ts)
    M = _M(basis, a)
    for t, K in zip(ts, ref.K_values):
        assert np.abs(K - expm(t * M)).max() < 1e-8


def test_reference_commuting_family():
    basis, _ = setup("C", 3)
    block = basis.blocks[0]
    texts = ["0"] * basis.n
    for j, i in enumerate(block.indices):
        texts[i] = f"{j + 1}*cos({j + 1}*t)"
    cv = CoeffVector(texts)
    ts = np.linspace(0, 1, 6)
    ref = reference_solution(basis, cv, (0, 1), t_eval=ts)
    Xs = dense_generators(basis)
    for t, K in zip(ts, ref.K_values):
        integral = sum(np.sin((j + 1) * t) * Xs[i] for j, i in enumerate(block.indices))
        assert np.abs(K - expm(integral)).max() < 1e-8


def test_b2_desk_run_reports_local_singularity():
    # this draw leaves the neighbourhood where A(u) is invertible near t = 0.946
    basis, sys = setup("B", 2)
    cv = CoeffVector.random_trig(basis.n, np.random.default_rng(42))
    stars = []
    for mode in ("staged", "monolithic"):
        traj, rep = solve_wn(sys, cv, (0, 1), SolveOptions(mode=mode))
        assert not rep.success and "cond" in rep.failure
        assert rep.max_cond > 1e11
        stars.append(rep.t_star)
    assert 0.9 < stars[0] < 1 and abs(stars[0] - stars[1]) < 1e-6


@pytest.mark.parametrize("seed", [42, 3])
def test_b2_desk_run(seed):
    basis, sys = setup("B", 2)
    cv = CoeffVector.random_trig(basis.n, np.random.default_rng(seed))
    traj, rep = solve_wn(sys, cv, (0, 1), SolveOptions(reanchor=True))
    ref = reference_solution(basis, cv, (0, 1))
    compare_with_reference(traj, ref, basis, rep)
    assert rep.success
    assert rep.max_rel_error < 1e-6
    assert rep.form_residual < 1e-8 and rep.det_drift < 1e-8
    assert np.all(traj.u_values[0] == 0)


def test_exact_trajectory_has_zero_error():
    basis, sys = setup("B", 2)
    cv = CoeffVector.random_trig(basis.n, np.random.default_rng(1))
    traj, _ = solve_wn(sys, cv, (0, 1))
    fake = reference_solution(basis, cv, (0, 1), t_eval=traj.times)
    fake.K_values = traj.K_values.copy()
    fake.dense = lambda t: traj.K_values[np.searchsorted(traj.times, t)]
    rep = compare_with_reference(traj, fake, basis)
    assert rep.max_rel_error == 0


def test_g2_monolithic_desk_run():
    basis, sys = setup("G2")
    cv = CoeffVector.random_trig(basis.n, np.random.default_rng(42))
    traj, rep = solve_wn(sys, cv, (0, 1), SolveOptions(mode="monolithic", reanchor=True))
    compare_with_reference(traj, reference_solution(basis, cv, (0, 1)), basis, rep)
    assert rep.success and rep.max_rel_error < 1e-6 and rep.det_drift < 1e-8


@pytest.mark.parametrize("family,N", [("A", 3), ("C", 3), ("D", 4)])
def test_staged_matches_monolithic(family, N):
    basis, sys = setup(family, N)
    cv = CoeffVector.random_trig(basis.n, np.random.default_rng(7))
    t1, r1 = solve_wn(sys, cv, (0, 1), SolveOptions(mode="staged", reanchor=True))
    t2, r2 = solve_wn(sys, cv, (0, 1), SolveOptions(mode="monolithic", reanchor=True))
    assert r1.success and r2.success
    rel = max(np.linalg.norm(a - b) / np.linalg.norm(b) for a, b in zip(t1.K_values, t2.K_values))
    assert rel < 1e-6


@pytest.mark.parametrize("mode", ["staged", "monolithic"])
def test_halving_tolerance_reduces_error(mode):
    basis, sys = setup("B", 2)
    errors = []
    for tol in (1e-6, 5e-7):
        total = 0.0
        for i in range(3):
            cv = CoeffVector.random_trig(basis.n, np.random.default_rng([9, i]))
            traj, rep = solve_wn(sys, cv, (0, 1), SolveOptions(mode=mode, rtol=tol, atol=tol))
            compare_with_reference(traj, reference_solution(basis, cv, (0, 1)), basis, rep)
            total += rep.final_rel_error
        errors.append(total)
    assert errors[1] < errors[0]


def test_singularity_fails_with_time_then_reanchors():
    basis, sys = setup("A", 1)
    cv = CoeffVector([1, 0, -1])
    traj, rep = solve_wn(sys, cv, (0, 2))
    assert not rep.success
    assert abs(rep.t_star - np.pi / 2) < 1e-2
    with pytest.raises(NumericalFailure) as e:
        solve_wn(sys, cv, (0, 2), raise_on_failure=True)
    assert e.value.t_star == pytest.approx(rep.t_star)
    for mode in ("staged", "monolithic"):
        traj, rep = solve_wn(sys, cv, (0, 2), SolveOptions(mode=mode, reanchor=True))
        assert rep.success and rep.reanchor_times
        compare_with_reference(traj, reference_solution(basis, cv, (0, 2)), basis, rep)
        assert rep.max_rel_error < 1e-6
        # K = [[cos t, sin t], [-sin t, cos t]] up to the basis convention
        assert abs(abs(np.linalg.det(traj.K_values[-1])) - 1) < 1e-8


def test_first_stage_independent_of_later_variables():
    basis, sys = setup("B", 3)
    first = sys.stages[0]
    own = set(first.variables)
    rng = np.random.default_rng(4)
    h = 1e-6
    for _ in range(5):
        u = rng.uniform(-1, 1, basis.n)
        a = rng.uniform(-1, 1, basis.n)
        f0 = np.array([p.evaluate(u, a) for p in first.rhs])
        for j in range(basis.n):
            du = u.copy()
            du[j] += h
            f1 = np.array([p.evaluate(du, a) for p in first.rhs])
            jac = (f1 - f0) / h
            if j not in own:
                assert np.all(jac == 0)
            elif j == first.variables[0]:
                assert np.any(jac != 0)


def test_csv_and_json_export():
    basis, sys = setup("A", 1)
    traj, rep = solve_wn(sys, CoeffVector(["sin(t)", "0", "0"]), (0, 1),
                         t_eval=np.linspace(0, 1, 5))
    csv = trajectory_csv(traj)
    lines = csv.splitlines()
    assert lines[0] == "t,u1,u2,u3"
    assert len(lines) == 6
    row = [float(x) for x in lines[-1].split(",")]
    assert row[1] == pytest.approx(1 - np.cos(1), abs=1e-8)
    doc = __import__("json").loads(trajectory_json(traj, rep, "A1"))
    assert doc["format"] == "weinorman-trajectory/1"
    assert len(doc["K"]) == 5 if "K" in doc else True
