"""Self-contained acceptance checks, runnable from the CLI and the tests.

Each criterion builds what it needs (with light caching of the kernel
problems), measures, and reports pass or fail with the measured numbers
in the detail string. Criterion 10 never fails: solve-time ratios
depend on the host, so it only warns when the expected direction does
not show. The fast level trims the problem sizes; full runs everything
at the stated dimensions.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bench import run_benchmark
from .counters import count_transfers
from .factor import lu_factor, promote_factors, solve_inplace, solve_otf, solve_plain
from .ir import IRConfig, IRResult, Policy, Reason, Solver, error_bound, ir_solve
from .mparray import PMatrix, PVector, bitwise_equal, cast_matrix, cast_vector, norm_inf, residual
from .precision import Precision
from .problems import ProblemSpec, RhsKind, build_operator, cond_inf_exact, dominant_eigenvalue, greens_matrix, make_rhs

__all__ = ["CheckResult", "CheckCache", "run_checks"]

H, S, D = Precision.HALF, Precision.SINGLE, Precision.DOUBLE

# per-dimension iteration counts the refinement is expected to land on,
# (otf, ip), tolerance plus or minus one
_EXPECTED_ITS = {200: (3, 3), 400: (4, 5), 800: (5, 5), 1600: (4, 4)}

_KAPPA_TARGET = 18_253.0
_EIGEN_TARGET = 0.10132118364233778  # 1 / pi^2


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    warned: bool = False


class CheckCache:
    """Shared kernel problems and memoized refinement runs.

    Criteria 1, 2, and 7 revisit the same operators; building each
    dimension once keeps the whole suite quick. Determinism checks
    bypass the memoized runs on purpose.
    """

    def __init__(self) -> None:
        self._ops: dict[int, PMatrix] = {}
        self._runs: dict[tuple[int, Solver], IRResult] = {}

    def operator(self, n: int) -> PMatrix:
        if n not in self._ops:
            self._ops[n] = build_operator(ProblemSpec(n))
        return self._ops[n]

    def refined(self, n: int, solver: Solver) -> IRResult:
        key = (n, solver)
        if key not in self._runs:
            a = self.operator(n)
            b, _ = make_rhs(a, RhsKind.ONES)
            config = IRConfig(tf=S, tw=D, tr=D, solver=solver)
            self._runs[key] = ir_solve(a, b, config)
        return self._runs[key]


def _sizes(level: str, full_sizes: Sequence[int]) -> list[int]:
    if level == "full":
        return list(full_sizes)
    return [n for n in full_sizes if n <= 400]


def _check_its(cache: CheckCache, level: str, solver: Solver) -> tuple[bool, str]:
    sizes = _sizes(level, (200, 400, 800, 1600))
    slot = 0 if solver is Solver.OTF else 1
    measured = {}
    ok = True
    for n in sizes:
        result = cache.refined(n, solver)
        measured[n] = result.iterations
        expected = _EXPECTED_ITS[n][slot]
        if abs(result.iterations - expected) > 1:
            ok = False
    details = ", ".join(
        f"n={n}: {measured[n]} (want {_EXPECTED_ITS[n][slot]}±1)" for n in sizes
    )
    if solver is Solver.IP:
        for n in sizes:
            otf_its = cache.refined(n, Solver.OTF).iterations
            if measured[n] > otf_its + 1:
                ok = False
                details += f"; n={n}: ip {measured[n]} exceeds otf {otf_its} by more than 1"
    return ok, details


def _check_kappa(cache: CheckCache, level: str, _seed: int) -> tuple[bool, str, bool]:
    sizes = _sizes(level, (200, 400, 800))
    ok = True
    parts = []
    for n in sizes:
        kappa = cond_inf_exact(cache.operator(n))
        rel = abs(kappa - _KAPPA_TARGET) / _KAPPA_TARGET
        parts.append(f"n={n}: {kappa:.1f} (off by {rel:.0%})")
        if rel > 0.05:
            ok = False
    return ok, f"target {_KAPPA_TARGET:.0f} within 5%; " + "; ".join(parts), False


def _check_promoted_pair(cache: CheckCache, level: str, _seed: int) -> tuple[bool, str, bool]:
    ok = True
    parts = []
    for n in (50, 200):
        base = cache.operator(n)
        a_s, _ = cast_matrix(base, S)
        b_s, _ = make_rhs(a_s, RhsKind.ONES)
        a_d, _ = cast_matrix(a_s, D)  # exact widening of the working data
        b_d, _ = cast_vector(b_s, D)
        for tf in (S, H):
            three = ir_solve(a_s, b_s, IRConfig(tf=tf, tw=S, tr=D))
            two = ir_solve(a_d, b_d, IRConfig(tf=tf, tw=D, tr=D))
            same = (
                bitwise_equal(three.x, two.x)
                and three.iterations == two.iterations
                and three.reason is two.reason
            )
            parts.append(f"n={n} tf={tf.value}: {'equal' if same else 'DIFFER'} ({three.iterations} its)")
            if not same:
                ok = False
    return ok, "; ".join(parts), False


def _random_factors(rng: np.random.Generator, n: int, tf: Precision):
    base = rng.uniform(-1.0, 1.0, (n, n)) + np.eye(n) * float(n)
    return lu_factor(PMatrix(base, tf))


def _check_otf_equiv(cache: CheckCache, level: str, seed: int) -> tuple[bool, str, bool]:
    rng = np.random.default_rng(seed)
    pairs = [(H, H), (H, S), (H, D), (S, S), (S, D), (D, D)]
    failures = 0
    trials = 200
    for trial in range(trials):
        tf, tr = pairs[trial % len(pairs)]
        n = int(rng.integers(2, 65))
        factors = _random_factors(rng, n, tf)
        r = PVector(rng.uniform(-1.0, 1.0, n), tr)
        direct = solve_otf(factors, r)
        staged = solve_plain(promote_factors(factors, tr), r)
        if not bitwise_equal(direct, staged):
            failures += 1
    return failures == 0, f"{trials} instances across {len(pairs)} tag pairs, {failures} mismatches", False


def _check_ip_scaling(cache: CheckCache, level: str, seed: int) -> tuple[bool, str, bool]:
    rng = np.random.default_rng(seed + 1)
    # tr = HALF is excluded: scaled corrections can land subnormal there,
    # where a power of two no longer commutes with the final rounding
    pairs = [(H, S), (H, D), (S, S), (S, D), (D, D)]
    failures = 0
    trials = 200
    for trial in range(trials):
        tf, tr = pairs[trial % len(pairs)]
        n = int(rng.integers(2, 65))
        factors = _random_factors(rng, n, tf)
        signs = rng.choice((-1.0, 1.0), n)
        body = rng.uniform(0.25, 1.0, n) * signs  # bounded away from zero so scaling stays exact
        r = PVector(body, tr)
        k = int(rng.integers(-8, 9))
        two_k = tr.dtype.type(2.0**k)
        scaled = PVector._wrap(np.array(r.data * two_k), tr)
        plain = solve_inplace(factors, r)
        shifted = solve_inplace(factors, scaled)
        want = PVector._wrap(np.array(plain.vector.data * two_k), tr)
        same = bitwise_equal(shifted.vector, want) and (
            shifted.underflow_to_zero == plain.underflow_to_zero
        )
        if not same:
            failures += 1
    return failures == 0, f"{trials} instances, k in [-8, 8], {failures} mismatches", False


def _check_error_bound(cache: CheckCache, level: str, _seed: int) -> tuple[bool, str, bool]:
    sizes = _sizes(level, (200, 400, 800))
    ok = True
    parts = []
    for n in sizes:
        a = cache.operator(n)
        b, _ = make_rhs(a, RhsKind.MANUFACTURED)
        kappa = cond_inf_exact(a)
        x_star = np.linalg.solve(a.data, b.data)
        norm_b = norm_inf(b)
        # The manufactured solution sits at unit scale, so the default
        # success threshold lands under the noise floor of a double
        # residual evaluation and every run stagnates short of it. A
        # looser constant stops the run once the residual is genuinely
        # small; the bound is checked against the residual actually
        # achieved, so nothing below is slackened by it.
        for solver in (Solver.OTF, Solver.IP):
            config = IRConfig(tf=S, tw=D, tr=D, solver=solver, c_success=1e3)
            result = ir_solve(a, b, config)
            if result.reason is not Reason.CONVERGED:
                ok = False
                parts.append(f"n={n} {solver.value}: no convergence ({result.reason.value})")
                continue
            tau = norm_inf(residual(a, b, result.x)) / norm_b
            bound = error_bound(tau, kappa)
            rel = float(np.max(np.abs(result.x.data - x_star)) / np.max(np.abs(x_star)))
            parts.append(f"n={n} {solver.value}: err {rel:.2e} vs bound {bound:.2e}")
            if rel > bound:
                ok = False
    return ok, "; ".join(parts), False


def _check_eigenvalue(cache: CheckCache, level: str, _seed: int) -> tuple[bool, str, bool]:
    n = 400
    lam = dominant_eigenvalue(greens_matrix(n))
    err = abs(lam - _EIGEN_TARGET)
    tol = 10.0 / (n * n)
    return err <= tol, f"lambda {lam:.10f}, target {_EIGEN_TARGET:.10f}, |err| {err:.2e} <= {tol:.2e}", False


def _check_transfer_counts(cache: CheckCache, level: str, _seed: int) -> tuple[bool, str, bool]:
    n = 128
    a_s, _ = cast_matrix(cache.operator(n), S)
    factors = lu_factor(a_s)
    r, _ = cast_vector(make_rhs(a_s, RhsKind.ONES)[0], D)
    with count_transfers() as otf_counter:
        solve_otf(factors, r)
    with count_transfers() as ip_counter:
        solve_inplace(factors, r)
    want_promotes = n * n + n
    want_casts = 2 * n
    ok = (
        otf_counter.promotes == want_promotes
        and otf_counter.casts == 0
        and ip_counter.casts == want_casts
        and ip_counter.promotes == 0
    )
    detail = (
        f"otf: {otf_counter.promotes} promotes (want exactly {want_promotes}), "
        f"{otf_counter.casts} casts; ip: {ip_counter.casts} casts (want exactly {want_casts}), "
        f"{ip_counter.promotes} promotes"
    )
    return ok, detail, False


def _check_timing(cache: CheckCache, level: str, _seed: int) -> tuple[bool, str, bool]:
    if level != "full":
        return True, "skipped at fast level (timing comparison runs at n >= 800)", False
    n = 800
    otf = run_benchmark(ProblemSpec(n), IRConfig(tf=S, tw=D, tr=D, solver=Solver.OTF), repetitions=3)
    ip = run_benchmark(ProblemSpec(n), IRConfig(tf=S, tw=D, tr=D, solver=Solver.IP), repetitions=3)
    ratio = ip.solve_seconds / otf.solve_seconds
    detail = f"n={n}: ip/otf solve ratio {ratio:.2f} (direction target <= 0.70)"
    if ratio <= 0.7:
        return True, detail, False
    return True, detail + "; host-dependent, warning only", True


def _check_determinism(cache: CheckCache, level: str, _seed: int) -> tuple[bool, str, bool]:
    sizes = _sizes(level, (200, 400, 800))
    ok = True
    parts = []
    for n in sizes:
        a = cache.operator(n)
        b, _ = make_rhs(a, RhsKind.ONES)
        config = IRConfig(tf=S, tw=D, tr=D, solver=Solver.OTF)
        runs = [ir_solve(a, b, config) for _ in range(3)]
        same = all(
            bitwise_equal(r.x, runs[0].x)
            and r.history.residual_norms == runs[0].history.residual_norms
            and r.reason is runs[0].reason
            for r in runs[1:]
        )
        parts.append(f"n={n}: {'stable' if same else 'UNSTABLE'} ({runs[0].iterations} its)")
        if not same:
            ok = False
    return ok, "; ".join(parts), False


def _crit_1(cache: CheckCache, level: str, seed: int) -> tuple[bool, str, bool]:
    ok, detail = _check_its(cache, level, Solver.OTF)
    return ok, detail, False


def _crit_2(cache: CheckCache, level: str, seed: int) -> tuple[bool, str, bool]:
    ok, detail = _check_its(cache, level, Solver.IP)
    return ok, detail, False


_CRITERIA: list[tuple[int, str, Callable[[CheckCache, str, int], tuple[bool, str, bool]]]] = [
    (1, "refinement iteration counts, widening solver", _crit_1),
    (2, "refinement iteration counts, narrowing solver", _crit_2),
    (3, "condition number of the kernel operator", _check_kappa),
    (4, "promoted-pair bitwise equality", _check_promoted_pair),
    (5, "widening solve equals promote-then-solve", _check_otf_equiv),
    (6, "narrowing solve scale invariance", _check_ip_scaling),
    (7, "forward error inside the residual bound", _check_error_bound),
    (8, "dominant eigenvalue of the kernel", _check_eigenvalue),
    (9, "transfer event counts", _check_transfer_counts),
    (10, "solve timing direction", _check_timing),
    (11, "refinement determinism", _check_determinism),
]


def run_checks(
    level: str = "fast",
    seed: int = 1729,
    criteria: Sequence[int] | None = None,
    cache: CheckCache | None = None,
) -> list[CheckResult]:
    """Run the acceptance criteria and return one result per criterion.

    level is "fast" (sizes capped at 400, timing comparison skipped) or
    "full". criteria selects a subset by number; cache lets callers
    share problem construction across invocations.
    """
    if level not in ("fast", "full"):
        raise ValueError(f"unknown check level {level!r}")
    if cache is None:
        cache = CheckCache()
    wanted = set(criteria) if criteria is not None else None
    results = []
    for number, name, fn in _CRITERIA:
        if wanted is not None and number not in wanted:
            continue
        t0 = time.perf_counter()
        passed, detail, warned = fn(cache, level, seed)
        seconds = time.perf_counter() - t0
        results.append(
            CheckResult(number=number, name=name, passed=passed, detail=detail, seconds=seconds, warned=warned)
        )
    return results
