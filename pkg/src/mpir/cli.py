"""Command line front end: solve one system, emit the timing table, or
run the acceptance checks.

Exit codes: 0 success, 1 a solve or check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from .bench import emit_table, records_to_json, run_benchmark
from .checks import run_checks
from .ir import IRConfig, Policy, Reason, Solver, ir_solve
from .mparray import cast_matrix
from .precision import Precision
from .problems import MatrixMarketError, ProblemSpec, RhsKind, build_operator, load_matrix_market, make_rhs

_TAGS = [p.value for p in Precision]


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tf", choices=_TAGS, default="single", help="factorization precision")
    p.add_argument("--tw", choices=_TAGS, default="double", help="working precision of the problem")
    p.add_argument("--tr", choices=_TAGS, default="double", help="residual and correction precision")
    p.add_argument("--policy", choices=[p.value for p in Policy], default="residual", help="termination policy")
    p.add_argument("--alpha", type=float, default=0.9, help="stagnation ratio threshold")
    p.add_argument("--c-success", type=float, default=1.0, help="success threshold constant")
    p.add_argument("--max-iters", type=int, default=None, help="iteration budget (default unbounded)")
    p.add_argument("--rate-target", type=float, default=None, help="rate policy target (default: working roundoff)")


def _config_from(args: argparse.Namespace, solver: Solver) -> IRConfig:
    return IRConfig(
        tf=Precision(args.tf),
        tw=Precision(args.tw),
        tr=Precision(args.tr),
        solver=solver,
        policy=Policy(args.policy),
        alpha=args.alpha,
        c_success=args.c_success,
        max_iters=args.max_iters,
        rate_target=args.rate_target,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpir", description="mixed-precision iterative refinement")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve one system and print the run")
    solve.add_argument("--n", type=int, default=400, help="kernel problem dimension")
    solve.add_argument("--c", type=float, default=800.0, help="kernel operator strength")
    solve.add_argument("--matrix", type=Path, default=None, help="Matrix Market file instead of the kernel problem")
    solve.add_argument("--rhs", choices=[k.value for k in RhsKind], default="ones")
    solve.add_argument("--strategy", choices=[s.value for s in Solver], default="otf")
    solve.add_argument("--format", choices=["text", "json"], default="text")
    _add_config_args(solve)

    table = sub.add_parser("table", help="benchmark both solvers over a size sweep")
    table.add_argument("--sizes", default="200,400,800,1600", help="comma-separated dimensions")
    table.add_argument("--c", type=float, default=800.0, help="kernel operator strength")
    table.add_argument("--rhs", choices=[k.value for k in RhsKind], default="ones")
    table.add_argument("--reps", type=int, default=3, help="timed repetitions per phase")
    table.add_argument("--format", choices=["markdown", "csv", "json"], default="markdown")
    table.add_argument("--out", type=Path, default=None, help="also write raw records as JSON")
    table.add_argument("--parallel", action="store_true", help="run cells concurrently (timings marked non-comparable)")
    _add_config_args(table)

    check = sub.add_parser("check", help="run the acceptance criteria")
    check.add_argument(
        "--level",
        choices=["fast", "full"],
        default=None,
        help="fast caps sizes at 400; the MPIR_CHECK_LEVEL environment variable takes precedence",
    )
    check.add_argument("--seed", type=int, default=1729, help="seed for the randomized criteria")
    return parser


def _cmd_solve(args: argparse.Namespace) -> int:
    try:
        if args.matrix is not None:
            base = load_matrix_market(args.matrix)
        else:
            base = build_operator(ProblemSpec(args.n, c=args.c))
        config = _config_from(args, Solver(args.strategy))
        a, _ = cast_matrix(base, config.tw)
        b, _ = make_rhs(a, RhsKind(args.rhs))
    except (MatrixMarketError, OSError) as exc:
        print(f"{args.matrix}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    result = ir_solve(a, b, config)
    hist = result.history
    if args.format == "json":
        payload = {
            "n": len(b),
            "tf": config.tf.value,
            "tw": config.tw.value,
            "tr": config.tr.value,
            "solver": config.solver.value,
            "policy": config.policy.value,
            "iterations": result.iterations,
            "reason": result.reason.value,
            "residual_norms": list(hist.residual_norms),
            "correction_norms": list(hist.correction_norms),
            "underflow_counts": list(hist.underflow_counts),
        }
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(
            f"n={len(b)} tf={config.tf.value} tw={config.tw.value} tr={config.tr.value} "
            f"solver={config.solver.value} policy={config.policy.value}"
        )
        print(f"reason={result.reason.value} iterations={result.iterations}")
        print(f"{'iter':>4}  {'|r|':>12}  {'|d|':>12}")
        print(f"{0:>4}  {hist.residual_norms[0]:>12.4e}")
        for i, (rn, dn) in enumerate(zip(hist.residual_norms[1:], hist.correction_norms), start=1):
            print(f"{i:>4}  {rn:>12.4e}  {dn:>12.4e}")
    return 1 if result.reason is Reason.SOLVE_FAILURE else 0


def _cmd_table(args: argparse.Namespace) -> int:
    try:
        sizes = [int(tok) for tok in args.sizes.split(",") if tok.strip()]
    except ValueError:
        print(f"bad --sizes value {args.sizes!r}", file=sys.stderr)
        return 2
    if not sizes:
        print("no sizes given", file=sys.stderr)
        return 2
    rhs = RhsKind(args.rhs)

    def run_cell(cell):
        n, config = cell
        return run_benchmark(ProblemSpec(n, c=args.c, rhs=rhs), config, repetitions=args.reps, parallel=args.parallel)

    try:
        cells = [
            (n, _config_from(args, solver))
            for n in sizes
            for solver in (Solver.OTF, Solver.IP)
        ]
        if args.parallel:
            with ThreadPoolExecutor(max_workers=min(8, len(cells))) as pool:
                records = list(pool.map(run_cell, cells))
        else:
            records = [run_cell(cell) for cell in cells]
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    print(emit_table(records, fmt=args.format), end="")
    if args.out is not None:
        try:
            args.out.write_text(records_to_json(records))
        except OSError as exc:
            print(f"{args.out}: {exc}", file=sys.stderr)
            return 2
    return 1 if any(rec.reason == Reason.SOLVE_FAILURE.value for rec in records) else 0


def _cmd_check(args: argparse.Namespace) -> int:
    level = os.environ.get("MPIR_CHECK_LEVEL") or args.level or "fast"
    if level not in ("fast", "full"):
        print(f"bad check level {level!r} (want fast or full)", file=sys.stderr)
        return 2
    results = run_checks(level=level, seed=args.seed)
    failed = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        if res.warned:
            status = "WARN"
        if not res.passed:
            failed += 1
        print(f"[{res.number:2d}] {res.name:<48} {status}  ({res.seconds:6.2f}s)  {res.detail}")
    print(f"{len(results)} checks at level {level}: {len(results) - failed} ok, {failed} failed")
    return 1 if failed else 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "solve":
        return _cmd_solve(args)
    if args.command == "table":
        return _cmd_table(args)
    return _cmd_check(args)


if __name__ == "__main__":
    sys.exit(main())
