"""Benchmark records, table emission, and the command line front end."""

from __future__ import annotations

import json

import pytest

from mpir import (
    CheckResult,
    IRConfig,
    IRResult,
    PVector,
    Precision,
    ProblemSpec,
    RunRecord,
    Solver,
    emit_table,
    ir_solve,
    make_rhs,
    parse_records,
    records_to_json,
    run_benchmark,
    run_checks,
)
from mpir import cli
from mpir.problems import RhsKind, build_operator

S, D = Precision.SINGLE, Precision.DOUBLE


def _rec(n, solver, its, **over):
    base = dict(
        n=n,
        tf="single",
        tw="double",
        tr="double",
        solver=solver,
        policy="residual",
        alpha=0.9,
        c_success=1.0,
        lu_seconds=0.00123,
        solve_seconds=0.000456,
        ir_seconds=0.0061,
        iterations=its,
        reason="Converged",
        final_residual=1.5e-12,
        repetitions=3,
        timestamp="2026-08-19T00:00:00+00:00",
        parallel=False,
    )
    base.update(over)
    return RunRecord(**base)


OTF_REC = _rec(200, "otf", 3)
IP_REC = _rec(200, "ip", 4, solve_seconds=0.00031, ir_seconds=0.005)


def test_records_round_trip_byte_identical():
    text = records_to_json([OTF_REC, IP_REC])
    parsed = parse_records(text)
    assert parsed == [OTF_REC, IP_REC]
    assert records_to_json(parsed) == text


def test_markdown_table_golden():
    got = emit_table([OTF_REC, IP_REC], fmt="markdown")
    assert got == (
        "| N | LU | OTF | IP | OTF-IR | its | IP-IR | its |\n"
        "|---|---|---|---|---|---|---|---|\n"
        "| 200 | 1.2e-03 | 4.6e-04 | 3.1e-04 | 6.1e-03 | 3 | 5.0e-03 | 4 |\n"
    )


def test_csv_table_golden():
    got = emit_table([OTF_REC, IP_REC], fmt="csv")
    assert got == (
        "N,LU,OTF,IP,OTF-IR,its,IP-IR,its\n"
        "200,1.2e-03,4.6e-04,3.1e-04,6.1e-03,3,5.0e-03,4\n"
    )


def test_json_table_round_trips_and_keys_are_unique():
    got = emit_table([OTF_REC, IP_REC], fmt="json")
    rows = json.loads(got)
    assert len(rows) == 1
    assert set(rows[0]) == {"N", "LU", "OTF", "IP", "OTF-IR", "IP-IR", "its_otf", "its_ip"}
    assert json.dumps(rows, indent=2, sort_keys=True) + "\n" == got


def test_missing_solver_leaves_gaps():
    md = emit_table([OTF_REC], fmt="markdown")
    assert "| 200 | 1.2e-03 | 4.6e-04 | - | 6.1e-03 | 3 | - | - |" in md
    csv = emit_table([OTF_REC], fmt="csv")
    assert "200,1.2e-03,4.6e-04,,6.1e-03,3,," in csv


def test_rows_sort_by_dimension():
    big = _rec(400, "otf", 4)
    md = emit_table([big, OTF_REC], fmt="markdown").splitlines()
    assert md[2].startswith("| 200 ") and md[3].startswith("| 400 ")


def test_table_rejects_bad_input():
    with pytest.raises(ValueError):
        emit_table([], fmt="markdown")
    with pytest.raises(ValueError):
        emit_table([OTF_REC, _rec(200, "otf", 5)], fmt="markdown")
    with pytest.raises(ValueError):
        emit_table([OTF_REC], fmt="html")


def test_run_benchmark_smoke():
    rec = run_benchmark(ProblemSpec(64), IRConfig(tf=S, tw=D, tr=D), repetitions=2)
    assert rec.n == 64
    assert rec.solver == "otf" and rec.policy == "residual"
    assert rec.tf == "single" and rec.tw == "double" and rec.tr == "double"
    assert rec.iterations >= 1
    assert rec.reason == "Converged"
    assert rec.lu_seconds >= 0.0 and rec.solve_seconds >= 0.0 and rec.ir_seconds >= 0.0
    assert rec.final_residual < 1e-10
    assert rec.repetitions == 2 and rec.parallel is False
    assert parse_records(records_to_json([rec])) == [rec]


def test_run_benchmark_ip_reports_that_solver():
    rec = run_benchmark(
        ProblemSpec(32), IRConfig(tf=S, tw=D, tr=D, solver=Solver.IP), repetitions=1
    )
    assert rec.solver == "ip"
    assert rec.reason == "Converged"


def test_run_benchmark_validates_repetitions():
    with pytest.raises(ValueError):
        run_benchmark(ProblemSpec(16), IRConfig(tf=S, tw=D, tr=D), repetitions=0)


def test_run_benchmark_guards_repeatability(monkeypatch):
    a = build_operator(ProblemSpec(8))
    b, _ = make_rhs(a, RhsKind.ONES)
    config = IRConfig(tf=S, tw=D, tr=D)
    real = ir_solve(a, b, config)
    drifted = IRResult(
        x=PVector(real.x.data + 1.0, D),
        iterations=real.iterations,
        reason=real.reason,
        history=real.history,
        config=real.config,
    )
    calls = iter([real, real, drifted])
    monkeypatch.setattr("mpir.bench.ir_solve", lambda *args: next(calls))
    with pytest.raises(AssertionError):
        run_benchmark(ProblemSpec(8), config, repetitions=2)


def test_cli_solve_text(capsys):
    assert cli.main(["solve", "--n", "64"]) == 0
    out = capsys.readouterr().out
    assert "reason=Converged" in out
    assert "solver=otf" in out
    assert "|r|" in out


def test_cli_solve_json(capsys):
    assert cli.main(["solve", "--n", "64", "--strategy", "ip", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n"] == 64
    assert payload["solver"] == "ip"
    assert payload["reason"] == "Converged"
    assert len(payload["residual_norms"]) == payload["iterations"] + 1


def test_cli_solve_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "singular.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 4\n1 1 1.0\n1 2 1.0\n2 1 1.0\n2 2 1.0\n"
    )
    assert cli.main(["solve", "--matrix", str(path)]) == 1
    assert "reason=SolveFailure" in capsys.readouterr().out


def test_cli_solve_loads_matrix_files(tmp_path, capsys):
    path = tmp_path / "ok.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real general\n"
        "2 2 4\n1 1 4.0\n1 2 1.0\n2 1 1.0\n2 2 3.0\n"
    )
    assert cli.main(["solve", "--matrix", str(path)]) == 0
    assert "n=2" in capsys.readouterr().out


def test_cli_table_writes_records(tmp_path, capsys):
    out_path = tmp_path / "records.json"
    code = cli.main(
        ["table", "--sizes", "16,32", "--reps", "1", "--format", "csv", "--out", str(out_path)]
    )
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "N,LU,OTF,IP,OTF-IR,its,IP-IR,its"
    assert len(lines) == 3
    records = parse_records(out_path.read_text())
    assert len(records) == 4  # two sizes, two solvers
    assert {r.n for r in records} == {16, 32}
    assert {r.solver for r in records} == {"otf", "ip"}


def test_cli_table_parallel_marks_records(tmp_path):
    out_path = tmp_path / "par.json"
    code = cli.main(
        ["table", "--sizes", "16", "--reps", "1", "--parallel", "--out", str(out_path)]
    )
    assert code == 0
    assert all(r.parallel for r in parse_records(out_path.read_text()))


def test_cli_table_rejects_bad_sizes(capsys):
    assert cli.main(["table", "--sizes", "abc"]) == 2
    assert cli.main(["table", "--sizes", ","]) == 2


def test_cli_bad_values_exit_two_without_traceback(tmp_path, capsys):
    # user mistakes surface as one stderr line, never a traceback
    assert cli.main(["solve", "--n", "0"]) == 2
    assert "n >= 3" in capsys.readouterr().err

    assert cli.main(["solve", "--tf", "double", "--tw", "single"]) == 2
    capsys.readouterr()

    missing = tmp_path / "missing.mtx"
    assert cli.main(["solve", "--matrix", str(missing)]) == 2
    assert "missing.mtx" in capsys.readouterr().err

    bad = tmp_path / "bad.mtx"
    bad.write_text("junk\n")
    assert cli.main(["solve", "--matrix", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "bad.mtx" in err and "line 1" in err

    assert cli.main(["table", "--sizes", "2"]) == 2
    assert "n >= 3" in capsys.readouterr().err

    assert cli.main(["table", "--sizes", "16", "--reps", "0"]) == 2
    capsys.readouterr()


def test_cli_usage_errors_exit_two():
    with pytest.raises(SystemExit) as info:
        cli.main(["bogus"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info2:
        cli.main(["solve", "--no-such-flag"])
    assert info2.value.code == 2


def _fake_checks(results):
    captured = {}

    def fake(level="fast", seed=1729, criteria=None, cache=None):
        captured["level"] = level
        captured["seed"] = seed
        return results

    return fake, captured


def test_cli_check_exit_codes(monkeypatch, capsys):
    ok = CheckResult(number=1, name="something", passed=True, detail="fine", seconds=0.0)
    bad = CheckResult(number=2, name="other", passed=False, detail="broken", seconds=0.0)
    monkeypatch.delenv("MPIR_CHECK_LEVEL", raising=False)
    fake, _ = _fake_checks([ok])
    monkeypatch.setattr("mpir.cli.run_checks", fake)
    assert cli.main(["check"]) == 0
    assert "1 checks at level fast: 1 ok, 0 failed" in capsys.readouterr().out
    fake2, _ = _fake_checks([ok, bad])
    monkeypatch.setattr("mpir.cli.run_checks", fake2)
    assert cli.main(["check"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "broken" in out


def test_cli_check_level_resolution(monkeypatch, capsys):
    ok = CheckResult(number=1, name="x", passed=True, detail="", seconds=0.0)
    fake, captured = _fake_checks([ok])
    monkeypatch.setattr("mpir.cli.run_checks", fake)
    monkeypatch.delenv("MPIR_CHECK_LEVEL", raising=False)
    cli.main(["check", "--level", "full"])
    assert captured["level"] == "full"
    # the environment variable wins over the flag
    monkeypatch.setenv("MPIR_CHECK_LEVEL", "fast")
    cli.main(["check", "--level", "full"])
    assert captured["level"] == "fast"
    monkeypatch.setenv("MPIR_CHECK_LEVEL", "turbo")
    assert cli.main(["check"]) == 2
    capsys.readouterr()


def test_run_checks_validates_level():
    with pytest.raises(ValueError):
        run_checks(level="turbo")


def test_run_checks_subset_runs_only_requested():
    results = run_checks(level="fast", criteria=[9])
    assert len(results) == 1
    assert results[0].number == 9
    assert results[0].passed


def test_corrupted_condition_oracle_is_caught(monkeypatch):
    # criterion 7 must actually consult the independent condition number:
    # faking that route to a benign value has to flip the verdict
    import mpir.checks as checks

    monkeypatch.setattr(checks, "cond_inf_exact", lambda a: 1.0)
    results = run_checks(level="fast", criteria=[7])
    assert not results[0].passed


def test_corrupted_eigenvalue_oracle_is_caught(monkeypatch):
    import mpir.checks as checks

    monkeypatch.setattr(checks, "dominant_eigenvalue", lambda g: 0.2)
    results = run_checks(level="fast", criteria=[8])
    assert not results[0].passed
