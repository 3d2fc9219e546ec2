"""Timing harness and table emission for the two refinement solvers.

Each benchmark cell times three phases with perf_counter: the downcast
plus factorization, one triangular solve against the initial residual,
and the whole refinement loop. One warmup pass runs first, then the
median over the repetitions is kept. Absolute numbers are machine
bound; only shapes and ratios are meant to travel. Records serialize to
JSON losslessly: emit, parse, emit again is byte-identical.
"""

from __future__ import annotations

import json
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

from .factor import lu_factor, solve_inplace, solve_otf
from .ir import IRConfig, IRResult, Solver, ir_solve
from .mparray import bitwise_equal, cast_matrix, cast_vector, norm_inf, residual
from .problems import ProblemSpec, build_operator, load_matrix_market, make_rhs

__all__ = ["RunRecord", "run_benchmark", "emit_table", "records_to_json", "parse_records"]


@dataclass(frozen=True)
class RunRecord:
    """One benchmark cell: problem, config, timings, and the loop's outcome."""

    n: int
    tf: str
    tw: str
    tr: str
    solver: str
    policy: str
    alpha: float
    c_success: float
    lu_seconds: float
    solve_seconds: float
    ir_seconds: float
    iterations: int
    reason: str
    final_residual: float
    repetitions: int
    timestamp: str
    parallel: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)


def records_to_json(records: Sequence[RunRecord]) -> str:
    """Serialize records with a stable key order and full float precision."""
    return json.dumps([r.to_dict() for r in records], indent=2, sort_keys=True) + "\n"


def parse_records(text: str) -> list[RunRecord]:
    return [RunRecord.from_dict(d) for d in json.loads(text)]


def _timed_runs(fn: Callable[[], object], repetitions: int) -> tuple[list[object], float]:
    fn()  # warmup: first touch pays allocation and cache costs
    outs = []
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        outs.append(fn())
        samples.append(time.perf_counter() - t0)
    return outs, statistics.median(samples)


def run_benchmark(
    spec: ProblemSpec,
    config: IRConfig,
    repetitions: int = 3,
    parallel: bool = False,
) -> RunRecord:
    """Time one (problem, config) cell and return its record.

    The OTF refinement runs are checked for bitwise repeatability across
    the repetitions; a mismatch raises AssertionError. The parallel flag
    only marks the record: timings taken under concurrency are not
    comparable and say so.
    """
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    if spec.matrix_path is not None:
        base = load_matrix_market(spec.matrix_path)
    else:
        base = build_operator(spec)
    a, _ = cast_matrix(base, config.tw)
    b, _ = make_rhs(a, spec.rhs)

    def lu_phase():
        narrow, _ = cast_matrix(a, config.tf)
        return lu_factor(narrow)

    lu_outs, lu_seconds = _timed_runs(lu_phase, repetitions)
    factors = lu_outs[-1]

    r0, _ = cast_vector(b, config.tr)
    if config.solver is Solver.OTF:
        solve_phase = lambda: solve_otf(factors, r0)
    else:
        solve_phase = lambda: solve_inplace(factors, r0).vector
    _, solve_seconds = _timed_runs(solve_phase, repetitions)

    ir_outs, ir_seconds = _timed_runs(lambda: ir_solve(a, b, config), repetitions)
    results: list[IRResult] = ir_outs
    result = results[-1]
    if config.solver is Solver.OTF:
        first = results[0]
        for other in results[1:]:
            same = (
                bitwise_equal(other.x, first.x)
                and other.iterations == first.iterations
                and other.reason is first.reason
            )
            if not same:
                raise AssertionError("OTF refinement must be bitwise repeatable across repetitions")

    final = norm_inf(residual(a, b, result.x))
    return RunRecord(
        n=len(b),
        tf=config.tf.value,
        tw=config.tw.value,
        tr=config.tr.value,
        solver=config.solver.value,
        policy=config.policy.value,
        alpha=config.alpha,
        c_success=config.c_success,
        lu_seconds=lu_seconds,
        solve_seconds=solve_seconds,
        ir_seconds=ir_seconds,
        iterations=result.iterations,
        reason=result.reason.value,
        final_residual=final,
        repetitions=repetitions,
        timestamp=_utc_now(),
        parallel=parallel,
    )


def _utc_now() -> str:
    from datetime import datetime, timezone

    return datetime.now(timezone.utc).isoformat(timespec="seconds")


_COLUMNS = ("N", "LU", "OTF", "IP", "OTF-IR", "its", "IP-IR", "its")


def _table_rows(records: Sequence[RunRecord]) -> list[dict]:
    if not records:
        raise ValueError("no records to tabulate")
    cells: dict[int, dict[str, RunRecord]] = {}
    for rec in records:
        slot = cells.setdefault(rec.n, {})
        if rec.solver in slot:
            raise ValueError(f"duplicate record for n={rec.n} solver={rec.solver}")
        slot[rec.solver] = rec
    rows = []
    for n in sorted(cells):
        otf = cells[n].get("otf")
        ip = cells[n].get("ip")
        any_rec = otf or ip
        rows.append(
            {
                "N": n,
                "LU": any_rec.lu_seconds,
                "OTF": otf.solve_seconds if otf else None,
                "IP": ip.solve_seconds if ip else None,
                "OTF-IR": otf.ir_seconds if otf else None,
                "its_otf": otf.iterations if otf else None,
                "IP-IR": ip.ir_seconds if ip else None,
                "its_ip": ip.iterations if ip else None,
            }
        )
    return rows


def emit_table(records: Sequence[RunRecord], fmt: str = "markdown") -> str:
    """Render per-dimension rows in the benchmark's column layout.

    Each dimension contributes at most one record per solver; the LU
    column comes from whichever record is present (both solvers factor
    identically). Times print with two significant digits in markdown
    and csv; json keeps full precision and names the two iteration
    columns its_otf and its_ip so keys stay unique.
    """
    rows = _table_rows(records)
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"

    def cell_time(v, missing: str) -> str:
        return missing if v is None else f"{v:.1e}"

    def cell_int(v, missing: str) -> str:
        return missing if v is None else str(v)

    if fmt == "markdown":
        out = ["| " + " | ".join(_COLUMNS) + " |", "|" + "---|" * len(_COLUMNS)]
        for row in rows:
            out.append(
                "| "
                + " | ".join(
                    [
                        str(row["N"]),
                        cell_time(row["LU"], "-"),
                        cell_time(row["OTF"], "-"),
                        cell_time(row["IP"], "-"),
                        cell_time(row["OTF-IR"], "-"),
                        cell_int(row["its_otf"], "-"),
                        cell_time(row["IP-IR"], "-"),
                        cell_int(row["its_ip"], "-"),
                    ]
                )
                + " |"
            )
        return "\n".join(out) + "\n"
    if fmt == "csv":
        out = [",".join(_COLUMNS)]
        for row in rows:
            out.append(
                ",".join(
                    [
                        str(row["N"]),
                        cell_time(row["LU"], ""),
                        cell_time(row["OTF"], ""),
                        cell_time(row["IP"], ""),
                        cell_time(row["OTF-IR"], ""),
                        cell_int(row["its_otf"], ""),
                        cell_time(row["IP-IR"], ""),
                        cell_int(row["its_ip"], ""),
                    ]
                )
            )
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")
