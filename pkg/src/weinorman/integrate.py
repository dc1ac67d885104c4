"""Numerical solution of the Wei-Norman system and an independent oracle.

:func:`solve_wn` integrates the hierarchy either stage by stage (later stages
read earlier ones through cubic Hermite interpolants) or monolithically
(``u' = A(u)^{-1} a(t)`` with ``A`` evaluated numerically).  It starts from
``u = 0`` and stops, or re-anchors when asked, where ``A(u)`` degenerates.

:func:`reference_solution` integrates ``K' = M(t) K`` directly and never
touches the Wei-Norman machinery.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .adjoint import numeric_adjoints
from .expoly import ExpPoly
from .exprdsl import Expr, Num, compile_expr, parse_expr, to_text
from .liealg import OrderedBasis
from .wn import WNSystem

__all__ = [
    "CoeffVector",
    "SolveOptions",
    "Trajectory",
    "SolveReport",
    "ReferenceTrajectory",
    "NumericalFailure",
    "solve_wn",
    "reconstruct_K",
    "reference_solution",
    "compare_with_reference",
    "trajectory_csv",
    "trajectory_json",
    "numeric_A",
]

SQRT2 = math.sqrt(2.0)


class NumericalFailure(RuntimeError):
    """A solve could not reach the end of the time span."""

    def __init__(self, message: str, t_star: float, report: "SolveReport" = None):
        super().__init__(f"{message} (t*={t_star:.6g})")
        self.t_star = t_star
        self.report = report


# -- coefficients -----------------------------------------------------------------


@dataclass
class CoeffVector:
    """Coefficient functions ``a_k(t)`` of ``M(t) = sum a_k X_k``.

    Parameters
    ----------
    exprs
        One entry per basis element: a parsed expression in ``t``, a string
        in the expression language, or a number.
    """

    exprs: List[Expr]

    def __init__(self, exprs: Sequence[Union[Expr, str, float, int]]):
        out = []
        for e in exprs:
            if isinstance(e, str):
                e = parse_expr(e, ["t"])
            elif isinstance(e, (int, float)):
                e = parse_expr(repr(float(e)), [])
            out.append(e)
        self.exprs = out
        self._funcs = [compile_expr(e) for e in out]

    def __len__(self):
        return len(self.exprs)

    def __call__(self, t: float) -> np.ndarray:
        return np.array([f(t) for f in self._funcs], dtype=float)

    def texts(self) -> List[str]:
        return [to_text(e) for e in self.exprs]

    def is_zero(self) -> bool:
        return all(isinstance(e, Num) and e.value == 0 for e in self.exprs)

    @classmethod
    def zeros(cls, n: int) -> "CoeffVector":
        return cls([0] * n)

    @classmethod
    def random_trig(cls, n: int, rng: np.random.Generator, cmax: float = 1.0,
                    wmax: float = 2.0) -> "CoeffVector":
        """``a_k = c0 + c1 sin(w t) + c2 cos(w t)`` with ``|c| <= cmax``, ``0 < w <= wmax``."""
        exprs = []
        for _ in range(n):
            c = [float(x) for x in rng.uniform(-cmax, cmax, 3)]
            w = float(rng.uniform(0.0, wmax))
            exprs.append(f"{c[0]!r} + {c[1]!r}*sin({w!r}*t) + {c[2]!r}*cos({w!r}*t)")
        return cls(exprs)


# -- numeric representation data ----------------------------------------------------


def _scalar_float(c) -> float:
    return float(c.rat) + float(c.surd) * SQRT2


def _dense(basis: OrderedBasis, M) -> np.ndarray:
    out = np.zeros((basis.size, basis.size))
    for (r, c), v in M.items():
        out[r, c] = _scalar_float(v)
    return out


class _Numeric:
    """Float data of one basis, cached on the basis object."""

    def __init__(self, basis: OrderedBasis):
        self.basis = basis
        n, d = basis.n, basis.size
        self.X = np.array([_dense(basis, basis.matrix(i)) for i in range(n)])
        self.cartan = set(basis.cartan_indices())
        self.X_diag = self.X[:, np.arange(d), np.arange(d)].copy()
        self.X_pows = []
        for i in range(n):
            pows = []
            if i not in self.cartan:
                P = np.eye(d)
                for m in range(1, d + 1):
                    P = P @ self.X[i] / m
                    if not P.any():
                        break
                    pows.append(P)
            self.X_pows.append(pows)
        ad = numeric_adjoints(basis)
        self.ad = ad
        self.ad_pows = []
        self.ad_diag = np.array([np.diag(ad[i]) for i in range(n)])
        for i in range(n):
            pows = []
            if i not in self.cartan:
                P = np.eye(n)
                for m in range(1, n + 2):
                    P = P @ ad[i] / m
                    if not P.any():
                        break
                    pows.append(P)
            self.ad_pows.append(pows)
        self.S = None if basis.form is None else _dense(basis, basis.form)

    def exp_ad(self, i: int, u: float) -> np.ndarray:
        if i in self.cartan:
            return np.diag(np.exp(u * self.ad_diag[i]))
        E = np.eye(self.basis.n)
        p = 1.0
        for P in self.ad_pows[i]:
            p *= u
            E = E + p * P
        return E

    def exp_X(self, i: int, u: float) -> np.ndarray:
        if i in self.cartan:
            return np.diag(np.exp(u * self.X_diag[i]))
        E = np.eye(self.basis.size)
        p = 1.0
        for P in self.X_pows[i]:
            p *= u
            E = E + p * P
        return E

    def M(self, a: np.ndarray) -> np.ndarray:
        return np.tensordot(a, self.X, axes=1)


def _numeric(basis: OrderedBasis) -> _Numeric:
    cache = basis._adjoint_cache
    data = cache.get("integrate")
    if data is None:
        data = cache["integrate"] = _Numeric(basis)
    return data


def numeric_A(basis: OrderedBasis, u: np.ndarray) -> np.ndarray:
    """``A(u)`` by the cumulative product of ``exp(u_k ad X_k)`` factors."""
    nd = _numeric(basis)
    n = basis.n
    A = np.empty((n, n))
    P = np.eye(n)
    for l in range(n):
        A[:, l] = P[:, l]
        if u[l] != 0.0:
            P = P @ nd.exp_ad(l, u[l])
    return A


def reconstruct_K(basis: OrderedBasis, u: Sequence[float]) -> np.ndarray:
    """``prod_k exp(u_k X_k)`` in the defining representation."""
    nd = _numeric(basis)
    K = np.eye(basis.size)
    for i, ui in enumerate(u):
        if ui != 0.0:
            K = K @ nd.exp_X(i, float(ui))
    return K


# -- compiled right-hand sides ---------------------------------------------------------


class _CompiledRHS:
    """Vectorized evaluation of a list of ExpPoly right-hand sides.

    Each term is ``coef * prod(u[f]) * exp(form . u) * a[j]``; factor index
    lists are padded with a slot that evaluates to 1.
    """

    def __init__(self, polys: Sequence[ExpPoly], n: int):
        self.m = len(polys)
        coefs, facs, aidx, rows, forms = [], [], [], [], []
        ring = polys[0].ring if polys else None
        exp_vars = ring.exp_vars if ring else ()
        for r, p in enumerate(polys):
            for (uexp, aexp, s, form), c in p.decoded_terms():
                coefs.append(float(c) * (SQRT2 ** s))
                f = []
                for i, e in enumerate(uexp):
                    f.extend([i] * e)
                facs.append(f)
                js = [j for j, e in enumerate(aexp) for _ in range(e)]
                if len(js) > 1:
                    raise ValueError("right-hand side is not linear in a")
                aidx.append(js[0] if js else n)
                fv = [0.0] * len(exp_vars)
                for k, e in zip(range(len(exp_vars)), form):
                    fv[k] = e
                forms.append(fv)
                rows.append(r)
        width = max((len(f) for f in facs), default=0)
        self.fac = np.full((len(facs), max(width, 1)), n, dtype=np.intp)
        for t, f in enumerate(facs):
            self.fac[t, :len(f)] = f
        self.coef = np.array(coefs, dtype=float)
        self.aidx = np.array(aidx, dtype=np.intp)
        self.rows = np.array(rows, dtype=np.intp)
        self.forms = np.array(forms, dtype=float).reshape(len(coefs), len(exp_vars))
        self.exp_cols = np.array(exp_vars, dtype=np.intp)
        self.has_exp = bool(self.forms.size and self.forms.any())
        self.n = n

    def __call__(self, u: np.ndarray, a: np.ndarray) -> np.ndarray:
        if not len(self.coef):
            return np.zeros(self.m)
        ue = np.append(u, 1.0)
        ae = np.append(a, 1.0)
        vals = self.coef * ae[self.aidx] * np.prod(ue[self.fac], axis=1)
        if self.has_exp:
            vals = vals * np.exp(self.forms @ u[self.exp_cols])
        return np.bincount(self.rows, weights=vals, minlength=self.m)


def _compiled_stages(sys: WNSystem) -> List[_CompiledRHS]:
    cached = getattr(sys, "_compiled", None)
    if cached is None:
        cached = [_CompiledRHS(st.rhs, sys.n) for st in sys.stages]
        sys._compiled = cached
    return cached


# -- results ----------------------------------------------------------------------


@dataclass
class SolveOptions:
    """Options of :func:`solve_wn`.

    ``reanchor_cond`` and ``reanchor_u`` only apply with ``reanchor=True``;
    without it the solve fails once ``cond(A) > cond_limit``.
    """

    mode: str = "staged"
    rtol: float = 1e-9
    atol: float = 1e-9
    max_step: float = np.inf
    reanchor: bool = False
    cond_limit: float = 1e12
    reanchor_cond: float = 1e4
    reanchor_u: float = 8.0
    u_limit: float = 1e5
    max_segments: int = 200
    method: str = "RK45"
    hermite_refine: int = 4


@dataclass
class SolveReport:
    """Diagnostics of one solve; present on success and on failure."""

    success: bool = True
    mode: str = "staged"
    t_final: float = 0.0
    failure: Optional[str] = None
    t_star: Optional[float] = None
    reanchor_times: List[float] = field(default_factory=list)
    n_rhs_evals: int = 0
    n_steps: int = 0
    max_cond: float = 1.0
    max_rel_error: Optional[float] = None
    final_rel_error: Optional[float] = None
    form_residual: Optional[float] = None
    det_drift: Optional[float] = None

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class Trajectory:
    """Solution on a time grid.

    ``u_values[i]`` are the exponents of the segment active at ``times[i]``;
    ``K_values[i]`` is the full group element including earlier segments.
    """

    times: np.ndarray
    u_values: np.ndarray
    K_values: Optional[np.ndarray]
    segment: np.ndarray
    anchors: List[Tuple[float, np.ndarray]]
    diagnostics: Dict[str, object] = field(default_factory=dict)


@dataclass
class ReferenceTrajectory:
    times: np.ndarray
    K_values: np.ndarray
    dense: Callable[[float], np.ndarray]
    n_rhs_evals: int = 0


# -- solver -----------------------------------------------------------------------


def _grid(tspan, t_eval):
    t0, t1 = map(float, tspan)
    if not t1 > t0:
        raise ValueError("tspan must be increasing")
    if t_eval is None:
        t_eval = np.linspace(t0, t1, 101)
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t0 or t_eval[-1] > t1:
        raise ValueError("t_eval must be strictly increasing inside tspan")
    return t0, t1, t_eval


def solve_wn(sys: WNSystem, coeffs: CoeffVector, tspan=(0.0, 1.0), options: SolveOptions = None,
             t_eval=None, with_K: bool = True, raise_on_failure: bool = False):
    """Integrate the Wei-Norman system from ``u = 0``.

    Parameters
    ----------
    sys
        System from :func:`weinorman.wn.extract_hierarchy` (with a basis).
    coeffs
        ``a_k(t)``, one per basis element.
    tspan
        ``(t0, t1)``.
    options
        :class:`SolveOptions`; ``mode`` is ``"staged"`` or ``"monolithic"``.
    t_eval
        Output grid (default 101 uniform points).

    Returns
    -------
    (Trajectory, SolveReport)
        On failure the trajectory stops at the last accepted time and the
        report carries ``t_star``; with ``raise_on_failure`` a
        :class:`NumericalFailure` is raised instead.
    """
    opt = options or SolveOptions()
    basis = sys.basis
    if basis is None:
        raise ValueError("system has no basis attached")
    if len(coeffs) != sys.n:
        raise ValueError(f"expected {sys.n} coefficients, got {len(coeffs)}")
    if opt.mode not in ("staged", "monolithic"):
        raise ValueError(f"unknown mode {opt.mode!r}")
    t0, t1, grid = _grid(tspan, t_eval)
    report = SolveReport(mode=opt.mode)
    cond_thr = opt.reanchor_cond if opt.reanchor else opt.cond_limit
    seg_fn = _segment_staged if opt.mode == "staged" else _segment_monolithic

    times, us, seg_ids, anchors = [], [], [], []
    K_acc = np.eye(basis.size)
    ts = t0
    seg = 0
    while True:
        anchors.append((ts, K_acc))
        out_t = grid[(grid >= ts) & (grid <= t1)]
        t_end, u_of, reason = seg_fn(sys, coeffs, ts, t1, opt, cond_thr, report)
        keep = out_t[out_t <= t_end]
        for t in keep:
            if times and t <= times[-1]:
                continue
            times.append(t)
            us.append(u_of(t))
            seg_ids.append(seg)
        if t_end >= t1:
            break
        if not opt.reanchor or t_end <= ts or seg + 1 >= opt.max_segments:
            report.success = False
            report.failure = f"re-anchoring stalled: {reason}" if opt.reanchor else reason
            report.t_star = t_end
            break
        u_end = u_of(t_end)
        K_acc = reconstruct_K(basis, u_end) @ K_acc
        report.reanchor_times.append(t_end)
        ts = t_end
        seg += 1
    report.t_final = times[-1] if times else t0
    times_a = np.array(times)
    u_a = np.array(us).reshape(len(times), sys.n)
    seg_a = np.array(seg_ids, dtype=int)
    K = None
    if with_K:
        K = np.array([reconstruct_K(basis, u) @ anchors[s][1] for u, s in zip(u_a, seg_a)])
    traj = Trajectory(times_a, u_a, K, seg_a, anchors,
                      {"n_rhs_evals": report.n_rhs_evals, "n_steps": report.n_steps,
                       "max_cond": report.max_cond})
    if raise_on_failure and not report.success:
        raise NumericalFailure(report.failure, report.t_star, report)
    return traj, report


def _ivp(fun, t0, t1, y0, opt, events=None, dense=False):
    return solve_ivp(fun, (t0, t1), y0, method=opt.method, rtol=opt.rtol, atol=opt.atol,
                     max_step=opt.max_step, events=events, dense_output=dense)


def _refine(sol, m: int):
    """Accepted step points split into ``m`` pieces via the solver's dense output."""
    t = sol.t
    if m <= 1 or len(t) < 2:
        return t, sol.y
    frac = np.arange(m) / m
    pts = np.concatenate([t[:-1, None] + frac[None, :] * np.diff(t)[:, None]]).ravel()
    pts = np.append(pts, t[-1])
    return pts, sol.sol(pts)


def _segment_staged(sys, coeffs, ts, t1, opt, cond_thr, report):
    """One re-anchoring segment in staged mode.

    Returns ``(t_end, u_of_t, reason)``.
    """
    n = sys.n
    compiled = _compiled_stages(sys)
    splines: List[Tuple[Tuple[int, ...], Callable]] = []
    t_end = t1
    reason = None
    knots = [np.array([ts])]
    u_lim = opt.reanchor_u if opt.reanchor else opt.u_limit

    def earlier(t):
        u = np.zeros(n)
        for vars_, sp in splines:
            u[list(vars_)] = sp(t)
        return u

    for st, f in zip(sys.stages, compiled):
        idx = list(st.variables)

        def rhs(t, y, idx=idx, f=f):
            u = earlier(t)
            u[idx] = y
            return f(u, coeffs(t))

        def blow(t, y):
            return np.max(np.abs(y)) - u_lim
        blow.terminal = True

        if t_end <= ts:
            break
        sol = _ivp(rhs, ts, t_end, np.zeros(len(idx)), opt, events=[blow], dense=True)
        report.n_rhs_evals += sol.nfev
        report.n_steps += max(len(sol.t) - 1, 0)
        if sol.status == -1:
            t_end = float(sol.t[-1])
            reason = f"integrator failure in stage {st.name}: {sol.message}"
        elif sol.status == 1:
            t_end = float(sol.t_events[0][0])
            reason = f"|u| exceeded {u_lim:g} in stage {st.name}"
        tk, yk = _refine(sol, opt.hermite_refine)
        if len(tk) < 2:
            splines.append((st.variables, lambda t, m=len(idx): np.zeros(m)))
            continue
        dy = np.array([rhs(t, y) for t, y in zip(tk, yk.T)]).T
        sp = CubicHermiteSpline(tk, yk, dy, axis=1, extrapolate=True)
        splines.append((st.variables, sp))
        knots.append(tk)

    def u_of(t):
        return earlier(t)

    # conditioning of A along the segment
    pts = np.unique(np.concatenate(knots))
    pts = pts[pts <= t_end]
    if t_end not in pts:
        pts = np.append(pts, t_end)
    def cond(t):
        c = float(np.linalg.cond(numeric_A(sys.basis, u_of(t))))
        return c if np.isfinite(c) else math.inf

    lo = ts
    for t in pts:
        c = cond(t)
        if c > cond_thr:
            hi = t
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if cond(mid) > cond_thr:
                    hi = mid
                else:
                    lo = mid
            t_end = float(lo)
            reason = f"cond(A) exceeded {cond_thr:g}"
            break
        report.max_cond = max(report.max_cond, c)
        lo = t
    return t_end, u_of, reason


def _segment_monolithic(sys, coeffs, ts, t1, opt, cond_thr, report):
    basis = sys.basis
    log_thr = math.log(cond_thr)

    def rhs(t, u):
        return np.linalg.solve(numeric_A(basis, u), coeffs(t))

    def degenerate(t, u):
        c = np.linalg.cond(numeric_A(basis, u))
        report.max_cond = max(report.max_cond, float(c)) if np.isfinite(c) else math.inf
        return (math.log(c) if np.isfinite(c) and c > 0 else math.inf) - log_thr
    degenerate.terminal = True

    sol = _ivp(rhs, ts, t1, np.zeros(sys.n), opt, events=[degenerate], dense=True)
    report.n_rhs_evals += sol.nfev
    report.n_steps += max(len(sol.t) - 1, 0)
    t_end = float(sol.t[-1])
    reason = None
    if sol.status == 1:
        t_end = float(sol.t_events[0][0])
        reason = f"cond(A) exceeded {cond_thr:g}"
    elif sol.status == -1:
        reason = f"integrator failure: {sol.message}"
    dense = sol.sol

    def u_of(t):
        return dense(t) if dense is not None else np.zeros(sys.n)
    return t_end, u_of, reason


# -- oracle ------------------------------------------------------------------------


def reference_solution(basis: OrderedBasis, coeffs: CoeffVector, tspan=(0.0, 1.0),
                       tol: float = 1e-10, t_eval=None) -> ReferenceTrajectory:
    """Integrate ``K' = M(t) K``, ``K(t0) = I`` with DOP853 at ``rtol = atol = tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    t0, t1, grid = _grid(tspan, t_eval)
    nd = _numeric(basis)
    d = basis.size

    def rhs(t, y):
        return (nd.M(coeffs(t)) @ y.reshape(d, d)).ravel()

    sol = solve_ivp(rhs, (t0, t1), np.eye(d).ravel(), method="DOP853", rtol=tol, atol=tol,
                    dense_output=True)
    if sol.status != 0:
        raise NumericalFailure(f"reference integration failed: {sol.message}", float(sol.t[-1]))

    def dense(t):
        return sol.sol(t).reshape(d, d)
    K = np.array([dense(t) for t in grid])
    return ReferenceTrajectory(grid, K, dense, sol.nfev)


def compare_with_reference(traj: Trajectory, ref: ReferenceTrajectory,
                           basis: OrderedBasis = None, report: SolveReport = None) -> SolveReport:
    """Relative Frobenius error of ``K_WN`` against the oracle plus group residuals.

    The reference is evaluated on the trajectory grid through its dense output.
    ``form_residual`` is ``max ||K^T S K - S||_F`` (B, C, D only) and
    ``det_drift`` is ``max |det K - 1|``.
    """
    report = report or SolveReport()
    if traj.K_values is None:
        raise ValueError("trajectory has no K values")
    errs = []
    for t, K in zip(traj.times, traj.K_values):
        R = ref.dense(t)
        errs.append(np.linalg.norm(K - R) / np.linalg.norm(R))
    errs = np.array(errs)
    report.max_rel_error = float(errs.max()) if len(errs) else 0.0
    report.final_rel_error = float(errs[-1]) if len(errs) else 0.0
    report.det_drift = float(max(abs(np.linalg.det(K) - 1.0) for K in traj.K_values))
    if basis is not None:
        S = _numeric(basis).S
        if S is not None:
            report.form_residual = float(max(np.linalg.norm(K.T @ S @ K - S)
                                             for K in traj.K_values))
    return report


def group_residuals(basis: OrderedBasis, K: np.ndarray) -> Tuple[Optional[float], float]:
    """``(||K^T S K - S||_F or None, |det K - 1|)`` for one matrix."""
    S = _numeric(basis).S
    form = None if S is None else float(np.linalg.norm(K.T @ S @ K - S))
    return form, float(abs(np.linalg.det(K) - 1.0))


# -- export ------------------------------------------------------------------------


def trajectory_csv(traj: Trajectory) -> str:
    """CSV with header ``t,u1,...,un``; one row per output time."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = traj.u_values.shape[1]
    w.writerow(["t"] + [f"u{i + 1}" for i in range(n)])
    for t, u in zip(traj.times, traj.u_values):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in u])
    return buf.getvalue()


def trajectory_json(traj: Trajectory, report: SolveReport, algebra: str = "") -> str:
    """Structured export with ``t``, ``u``, segment ids, ``K`` matrices and the report."""
    doc = {
        "format": "weinorman-trajectory/1",
        "algebra": algebra,
        "times": traj.times.tolist(),
        "u": traj.u_values.tolist(),
        "segment": traj.segment.tolist(),
        "anchors": [t for t, _ in traj.anchors],
        "K": None if traj.K_values is None else traj.K_values.tolist(),
        "report": report.to_dict(),
    }
    return json.dumps(doc, indent=1, default=float) + "\n"
