"""Command-line front end.

Subcommands::

    weinorman structure --algebra B --rank 2 [--format text|json]
    weinorman equations --algebra B --rank 2 [--format text|latex|machine]
    weinorman solve     [--config run.yaml] [--algebra ..] [--reanchor] [--format csv|json]
    weinorman verify    [--config run.yaml] [--trials K] [--seed S] [--jobs J] [--structure-only]

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 verification failure.

Config files are YAML with the optional sections ``algebra``,
``coefficients``, ``tspan``, ``solver``, ``output`` and ``verify``; see the
README for the schema.  Coefficients use the expression language of
:mod:`weinorman.exprdsl`.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import yaml

from .exprdsl import ParseError
from .integrate import (CoeffVector, SolveOptions, compare_with_reference, reference_solution,
                        solve_wn, trajectory_csv, trajectory_json)
from .liealg import BlockReport, OrderedBasis, build_matrix_basis, verify_block_structure
from .rootsys import ConfigurationError
from .suites import G2_SPLIT, g2_suite, hierarchy_checks, roundtrip_trials, structural_suite
from .wn import degree_report, emit_equations, extract_hierarchy

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_VERIFY = 3


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- configuration -------------------------------------------------------------

_SECTIONS = {
    "algebra": {"family", "rank"},
    "coefficients": None,
    "tspan": {"t0", "t1"},
    "solver": {"mode", "rtol", "atol", "max_step", "reanchor", "oracle", "reanchor_cond",
               "cond_limit"},
    "output": {"path", "format", "stride", "points", "K"},
    "verify": {"trials", "tol", "seed", "mode"},
}


@dataclass
class RunConfig:
    family: Optional[str] = None
    rank: Optional[int] = None
    coefficients: object = None
    t0: float = 0.0
    t1: float = 1.0
    mode: str = "staged"
    rtol: float = 1e-9
    atol: float = 1e-9
    max_step: float = float("inf")
    reanchor: bool = False
    reanchor_cond: float = 1e4
    cond_limit: float = 1e12
    oracle: bool = True
    path: Optional[str] = None
    format: str = "csv"
    stride: int = 1
    points: int = 101
    include_K: bool = False
    trials: int = 5
    tol: float = 1e-6
    seed: int = 0
    verify_mode: str = "staged"
    source: Optional[str] = field(default=None, repr=False)


def load_config(path: Optional[str]) -> RunConfig:
    """Read a YAML run configuration; a missing path gives the defaults."""
    cfg = RunConfig()
    if path is None:
        return cfg
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}")
    except yaml.YAMLError as exc:
        raise UsageError(f"invalid YAML in {path}: {exc}")
    if not isinstance(doc, dict):
        raise UsageError("config must be a mapping")
    cfg.source = path
    for key, val in doc.items():
        if key not in _SECTIONS:
            raise UsageError(f"unknown config section {key!r}")
        allowed = _SECTIONS[key]
        if allowed is not None:
            if not isinstance(val, dict):
                raise UsageError(f"config section {key!r} must be a mapping")
            extra = set(val) - allowed
            if extra:
                raise UsageError(f"unknown keys in {key!r}: {sorted(extra)}")
    try:
        alg = doc.get("algebra", {})
        cfg.family = alg.get("family")
        cfg.rank = alg.get("rank")
        cfg.coefficients = doc.get("coefficients")
        ts = doc.get("tspan", {})
        cfg.t0 = float(ts.get("t0", cfg.t0))
        cfg.t1 = float(ts.get("t1", cfg.t1))
        sv = doc.get("solver", {})
        cfg.mode = str(sv.get("mode", cfg.mode))
        cfg.rtol = float(sv.get("rtol", cfg.rtol))
        cfg.atol = float(sv.get("atol", cfg.atol))
        cfg.max_step = float(sv.get("max_step", cfg.max_step))
        cfg.reanchor = bool(sv.get("reanchor", cfg.reanchor))
        cfg.reanchor_cond = float(sv.get("reanchor_cond", cfg.reanchor_cond))
        cfg.cond_limit = float(sv.get("cond_limit", cfg.cond_limit))
        cfg.oracle = bool(sv.get("oracle", cfg.oracle))
        out = doc.get("output", {})
        cfg.path = out.get("path")
        cfg.format = str(out.get("format", cfg.format))
        cfg.stride = int(out.get("stride", cfg.stride))
        cfg.points = int(out.get("points", cfg.points))
        cfg.include_K = bool(out.get("K", cfg.include_K))
        vf = doc.get("verify", {})
        cfg.trials = int(vf.get("trials", cfg.trials))
        cfg.tol = float(vf.get("tol", cfg.tol))
        cfg.seed = int(vf.get("seed", cfg.seed))
        cfg.verify_mode = str(vf.get("mode", cfg.verify_mode))
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config value: {exc}")
    return cfg


def _validate(cfg: RunConfig):
    if not cfg.t1 > cfg.t0:
        raise UsageError("tspan: t1 must exceed t0")
    if cfg.trials < 1:
        raise UsageError("verify.trials must be at least 1")
    if cfg.stride < 1 or cfg.points < 2:
        raise UsageError("output.stride must be >= 1 and output.points >= 2")
    if cfg.mode not in ("staged", "monolithic") or cfg.verify_mode not in ("staged", "monolithic"):
        raise UsageError("mode must be 'staged' or 'monolithic'")
    if cfg.rtol <= 0 or cfg.atol <= 0:
        raise UsageError("rtol and atol must be positive")


def coefficient_texts(spec, n: int) -> List[str]:
    """Expand the ``coefficients`` entry to ``n`` expression strings.

    Accepts a list (missing trailing entries are ``"0"``) or a mapping from
    ``a<k>`` / ``k`` (1-based) to an expression.
    """
    out = ["0"] * n
    if spec is None:
        return out
    if isinstance(spec, (list, tuple)):
        if len(spec) > n:
            raise UsageError(f"{len(spec)} coefficients given, the algebra has dimension {n}")
        for i, e in enumerate(spec):
            out[i] = str(e)
        return out
    if isinstance(spec, dict):
        for key, e in spec.items():
            k = str(key)
            k = k[1:] if k.startswith("a") else k
            if not k.isdigit() or not 1 <= int(k) <= n:
                raise UsageError(f"bad coefficient key {key!r} (use a1..a{n})")
            out[int(k) - 1] = str(e)
        return out
    raise UsageError("coefficients must be a list or a mapping")


def _coeffs(texts: List[str]) -> CoeffVector:
    exprs = []
    from .exprdsl import parse_expr
    for i, src in enumerate(texts, start=1):
        try:
            exprs.append(parse_expr(src, ["t"]))
        except ParseError as exc:
            raise UsageError(f"coefficient a{i}: {exc}\n  {src}\n  {' ' * exc.offset}^")
    return CoeffVector(exprs)


# -- algebra selection -----------------------------------------------------------


def _basis(args, cfg: Optional[RunConfig] = None) -> OrderedBasis:
    family = args.algebra or (cfg.family if cfg else None)
    rank = args.rank if args.rank is not None else (cfg.rank if cfg else None)
    if family is None:
        raise UsageError("no algebra given (use --algebra or the config file)")
    family = str(family).upper()
    if family == "G2":
        if rank not in (None, 2):
            raise UsageError("G2 has rank 2")
        rank = None
    elif rank is None:
        raise UsageError(f"--rank is required for family {family}")
    try:
        return build_matrix_basis(family, rank)
    except ConfigurationError as exc:
        raise UsageError(str(exc))


# -- structure -----------------------------------------------------------------


def _label_span(basis, idx):
    labs = [basis.generators[i].label for i in idx]
    if len(labs) > 2 and labs == list(range(labs[0], labs[0] + len(labs))):
        return f"X{labs[0]}..X{labs[-1]}"
    return ",".join(f"X{l}" for l in labs)


def structure_report(basis: OrderedBasis) -> dict:
    """Roots, partition, blocks, parametrization and structural checks."""
    rs = basis.root_system
    gens = []
    for g in basis.generators:
        gens.append({
            "label": g.label,
            "kind": g.tag[0],
            "root": list(g.root.coeffs) if g.root is not None else None,
            "height": g.root.height if g.root is not None else None,
            "block": basis.block_of(g.label - 1).name,
        })
    blocks = [{"name": b.name, "kind": b.kind, "size": len(b.indices),
               "labels": [i + 1 for i in b.indices]} for b in basis.blocks]
    checks = verify_block_structure(basis, split=G2_SPLIT if basis.family == "G2" else None)
    report = {
        "algebra": basis.name,
        "dimension": basis.n,
        "representation_size": basis.size,
        "positive_roots": len(rs.positive_roots),
        "partition_sizes": [len(p) for p in rs.partition],
        "generators": gens,
        "blocks": blocks,
        "parametrization": [[_entry_text(e) for e in row] for row in basis.parametrization()],
        "checks": [{"name": c.name, "passed": c.passed, "witness": c.witness}
                   for c in checks.checks],
    }
    if basis.family == "G2":
        report["decomposition"] = {
            "candidate_split": [list(p) for p in G2_SPLIT],
            "commuting_decomposition": False,
            "surviving_split": ["n+", "h", "n-"],
        }
    return report


def _entry_text(entry: Dict[int, object]) -> str:
    if not entry:
        return "0"
    parts = []
    for lab in sorted(entry):
        c = entry[lab]
        s = str(c) if not (c.is_rational() and abs(c.rat) == 1) else ("-" if c.rat < 0 else "")
        if s not in ("", "-") and not c.is_rational():
            s = f"({s})*"
        elif s not in ("", "-"):
            s += "*"
        parts.append(f"{s}a{lab}")
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


def _structure_text(rep: dict) -> str:
    lines = [f"algebra {rep['algebra']}: dimension {rep['dimension']}, "
             f"{rep['representation_size']}x{rep['representation_size']} matrices, "
             f"{rep['positive_roots']} positive roots"]
    lines.append("partition sizes |R_k|: " + " ".join(map(str, rep["partition_sizes"])))
    lines.append("")
    lines.append("blocks:")
    for b in rep["blocks"]:
        lines.append(f"  {b['name']:<5} size {b['size']:<3} "
                     + ",".join(f"X{l}" for l in b["labels"]))
    lines.append("")
    lines.append("generators (label, root over simple roots, height):")
    for g in rep["generators"]:
        root = "cartan" if g["root"] is None else "(" + ",".join(map(str, g["root"])) + ")"
        h = "" if g["height"] is None else f" height {g['height']}"
        lines.append(f"  X{g['label']:<4} {g['block']:<5} {root}{h}")
    lines.append("")
    lines.append("parametrization sum a_i X_i (rows):")
    for row in rep["parametrization"]:
        lines.append("  [ " + " | ".join(row) + " ]")
    lines.append("")
    lines.append("checks:")
    for c in rep["checks"]:
        w = f"  ({c['witness']})" if c["witness"] else ""
        lines.append(f"  {'PASS' if c['passed'] else 'FAIL'} {c['name']}{w}")
    if "decomposition" in rep:
        lines.append("")
        lines.append("the split n+ = span{X1,X2,X3} + span{X4,X5,X6} is not a commuting "
                     "decomposition;")
        lines.append("surviving split: n+ + h + n-")
    return "\n".join(lines) + "\n"


def cmd_structure(args) -> int:
    basis = _basis(args)
    rep = structure_report(basis)
    fmt = args.format or "text"
    if fmt == "json":
        _write(args, json.dumps(rep, indent=2) + "\n")
    elif fmt == "text":
        _write(args, _structure_text(rep))
    else:
        raise UsageError(f"structure supports --format text|json, not {fmt}")
    return EXIT_OK


# -- equations -----------------------------------------------------------------


def cmd_equations(args) -> int:
    basis = _basis(args)
    fmt = args.format or "text"
    if fmt not in ("text", "latex", "machine", "json"):
        raise UsageError(f"equations supports --format text|latex|machine, not {fmt}")
    try:
        wsys = extract_hierarchy(basis)
    except ArithmeticError as exc:
        print(f"error: extraction failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(args, emit_equations(wsys, "plain" if fmt == "text" else fmt))
    if fmt == "text":
        for st in degree_report(wsys).stages:
            if st.flags:
                print(f"note: stage {st.stage} has total degree {st.total_degree}",
                      file=sys.stderr)
    return EXIT_OK


# -- solve ---------------------------------------------------------------------


def _apply_flags(args, cfg: RunConfig):
    if getattr(args, "reanchor", False):
        cfg.reanchor = True
    if getattr(args, "mode", None):
        cfg.mode = cfg.verify_mode = args.mode
    if getattr(args, "trials", None) is not None:
        cfg.trials = args.trials
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "output", None):
        cfg.path = args.output
    if getattr(args, "format", None):
        cfg.format = args.format
    _validate(cfg)


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    _apply_flags(args, cfg)
    if cfg.format not in ("csv", "json"):
        raise UsageError(f"solve supports --format csv|json, not {cfg.format}")
    basis = _basis(args, cfg)
    coeffs = _coeffs(coefficient_texts(cfg.coefficients, basis.n))
    wsys = extract_hierarchy(basis)
    opt = SolveOptions(mode=cfg.mode, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step,
                       reanchor=cfg.reanchor, reanchor_cond=cfg.reanchor_cond,
                       cond_limit=cfg.cond_limit)
    grid = np.linspace(cfg.t0, cfg.t1, cfg.points)
    traj, rep = solve_wn(wsys, coeffs, (cfg.t0, cfg.t1), opt, t_eval=grid)
    if cfg.oracle and traj.K_values is not None and len(traj.times):
        ref = reference_solution(basis, coeffs, (cfg.t0, cfg.t1), t_eval=grid)
        compare_with_reference(traj, ref, basis, rep)
    keep = np.arange(0, len(traj.times), cfg.stride)
    if len(traj.times) and keep[-1] != len(traj.times) - 1:
        keep = np.append(keep, len(traj.times) - 1)
    traj.times, traj.u_values, traj.segment = traj.times[keep], traj.u_values[keep], traj.segment[keep]
    if traj.K_values is not None:
        traj.K_values = traj.K_values[keep]
    if cfg.format == "csv":
        text = trajectory_csv(traj)
    else:
        if not cfg.include_K:
            traj.K_values = None
        text = trajectory_json(traj, rep, basis.name)
    if cfg.path:
        Path(cfg.path).write_text(text)
    else:
        sys.stdout.write(text)
    _print_report(rep)
    return EXIT_OK if rep.success else EXIT_NUMERIC


def _print_report(rep):
    err = sys.stderr
    status = "ok" if rep.success else "FAILED"
    print(f"solve {status}: mode {rep.mode}, reached t={rep.t_final:.6g}, "
          f"{rep.n_steps} steps, {rep.n_rhs_evals} rhs evaluations", file=err)
    if rep.reanchor_times:
        print("re-anchored at t = " + ", ".join(f"{t:.6g}" for t in rep.reanchor_times), file=err)
    if not rep.success:
        print(f"failure at t*={rep.t_star:.6g}: {rep.failure}", file=err)
    if rep.max_rel_error is not None:
        print(f"oracle max relative error {rep.max_rel_error:.3e}", file=err)
    if rep.form_residual is not None:
        print(f"form residual max ||K^T S K - S|| {rep.form_residual:.3e}", file=err)
    if rep.det_drift is not None:
        print(f"determinant drift max |det K - 1| {rep.det_drift:.3e}", file=err)


# -- verify --------------------------------------------------------------------


def _print_checks(title: str, rep: BlockReport, out) -> bool:
    for c in rep.checks:
        w = f"  ({c.witness})" if c.witness and not c.passed else ""
        print(f"{'PASS' if c.passed else 'FAIL'} [{title}] {c.name}{w}", file=out)
    return rep.passed


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    _apply_flags(args, cfg)
    basis = _basis(args, cfg)
    out = sys.stdout
    ok = True
    if basis.family == "G2":
        wsys = extract_hierarchy(basis)
        ok &= _print_checks("structure", g2_suite(basis, wsys), out)
    else:
        ok &= _print_checks("structure", structural_suite(basis, seed=cfg.seed), out)
        wsys = extract_hierarchy(basis)
    ok &= _print_checks("hierarchy", hierarchy_checks(wsys), out)
    if not args.structure_only:
        jobs = args.jobs if args.jobs is not None else min(cfg.trials, os.cpu_count() or 1)
        results = roundtrip_trials(wsys, cfg.trials, cfg.seed, cfg.tol, mode=cfg.verify_mode,
                                   reanchor=True, jobs=jobs)
        for r in results:
            form = "" if r.form_residual is None else f" form {r.form_residual:.2e}"
            fail = f" ({r.failure})" if r.failure else ""
            print(f"{'PASS' if r.passed else 'FAIL'} [trial {r.index}] "
                  f"rel error {r.max_rel_error:.2e}{form} det {r.det_drift:.2e} "
                  f"re-anchors {r.reanchors}{fail}", file=out)
            ok &= r.passed
    print(f"verify {basis.name}: {'PASS' if ok else 'FAIL'}", file=out)
    return EXIT_OK if ok else EXIT_VERIFY


# -- entry point -----------------------------------------------------------------


def _write(args, text: str):
    path = getattr(args, "output", None)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="weinorman", description="Wei-Norman reduction for classical Lie algebras")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, formats):
        sp.add_argument("--algebra", type=str.upper, choices=["A", "B", "C", "D", "G2"])
        sp.add_argument("--rank", type=int)
        sp.add_argument("--format", choices=formats)
        sp.add_argument("--output", "-o", help="write to this file instead of stdout")

    sp = sub.add_parser("structure", help="roots, blocks and structural checks")
    common(sp, ["text", "json"])
    sp.set_defaults(func=cmd_structure)

    sp = sub.add_parser("equations", help="emit the staged Wei-Norman equations")
    common(sp, ["text", "latex", "machine", "json"])
    sp.set_defaults(func=cmd_equations)

    sp = sub.add_parser("solve", help="integrate the equations for given coefficients")
    common(sp, ["csv", "json"])
    sp.add_argument("--config", help="YAML run configuration")
    sp.add_argument("--reanchor", action="store_true", help="restart where A(u) degenerates")
    sp.add_argument("--mode", choices=["staged", "monolithic"])
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="structural suites and random round-trip solves")
    common(sp, ["text"])
    sp.add_argument("--config", help="YAML run configuration")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--mode", choices=["staged", "monolithic"])
    sp.add_argument("--reanchor", action="store_true", help="accepted for symmetry; trials always re-anchor")
    sp.add_argument("--jobs", type=int, help="parallel trials (default: CPU count)")
    sp.add_argument("--structure-only", action="store_true", help="skip the numeric trials")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help exits 0 through argparse
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
