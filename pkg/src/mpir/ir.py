"""The refinement driver: factor narrow, iterate corrections wide.

ir_solve runs iterative refinement with three precision knobs. TF is
where the matrix is factored, TW is where the problem lives, TR is
where residuals and corrections accumulate; the solver field picks how
the triangular solves bridge TF and TR (widen the factors on the fly,
or push the residual down into TF). Termination lives in small pure
functions over the norm history so it can be tested away from the loop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .factor import FactorError, LUFactors, lu_factor, promote_factors, solve_inplace, solve_otf, solve_plain
from .mparray import PMatrix, PVector, cast_matrix, cast_vector, matrix_norm_inf, matvec_promoted, norm_inf, residual
from .precision import Precision

__all__ = [
    "Solver",
    "Policy",
    "Reason",
    "IRConfig",
    "IRHistory",
    "IRResult",
    "ir_solve",
    "terminate_residual",
    "terminate_rate_estimate",
    "error_bound",
    "iteration_matrices",
]

# safety net so an unbounded run can never spin forever
_HARD_CAP = 1000


class Solver(enum.Enum):
    """How the triangular solves bridge the factor and residual tags."""

    OTF = "otf"
    IP = "ip"


class Policy(enum.Enum):
    """Which termination rule drives the loop."""

    RESIDUAL = "residual"
    RATE = "rate"


class Reason(enum.Enum):
    CONVERGED = "Converged"
    STAGNATED = "Stagnated"
    ITERATION_LIMIT = "IterationLimit"
    SOLVE_FAILURE = "SolveFailure"


@dataclass(frozen=True)
class IRConfig:
    """Precision triple plus solver, policy, and termination constants.

    tf <= tw <= tr is enforced: factor at most as wide as the working
    precision, accumulate at least as wide. max_iters of None means no
    user bound (a hard internal cap still applies). rate_target of None
    defaults to the working precision's unit roundoff.
    """

    tf: Precision
    tw: Precision
    tr: Precision
    solver: Solver = Solver.OTF
    policy: Policy = Policy.RESIDUAL
    alpha: float = 0.9
    c_success: float = 1.0
    max_iters: int | None = None
    rate_target: float | None = None

    def __post_init__(self) -> None:
        if not (self.tf <= self.tw <= self.tr):
            raise ValueError("precision order must be tf <= tw <= tr")
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie strictly inside (0, 1)")
        if not (self.c_success > 0.0):
            raise ValueError("c_success must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1 when given")
        if self.rate_target is not None and not (self.rate_target > 0.0):
            raise ValueError("rate_target must be positive when given")


@dataclass(frozen=True)
class IRHistory:
    """Per-iteration record of one refinement run.

    residual_norms has one entry per accepted residual, the initial one
    included, so its length is iterations + 1. correction_norms and
    underflow_counts carry one entry per completed iteration; the
    underflow column is all zeros under the OTF solver.
    """

    residual_norms: tuple[float, ...]
    correction_norms: tuple[float, ...]
    underflow_counts: tuple[int, ...]
    reason: Reason


@dataclass(frozen=True)
class IRResult:
    """Final iterate, the loop's verdict, and the full history."""

    x: PVector
    iterations: int
    reason: Reason
    history: IRHistory
    config: IRConfig


def terminate_residual(
    rn_new: float,
    rn_old: float,
    iteration: int,
    norm_a: float,
    norm_x: float,
    norm_b: float,
    config: IRConfig,
    limit: int,
) -> Reason | None:
    """Verdict of the residual policy after an iteration, or None to continue.

    The checks run in a fixed order: success against the scaled roundoff
    threshold first, then stagnation against the previous residual norm,
    then the iteration budget. Passing rn_old = inf disables the
    stagnation test, which is how the state before the first iteration
    is encoded.
    """
    threshold = config.c_success * config.tr.unit_roundoff * (norm_a * norm_x + norm_b)
    if rn_new <= threshold:
        return Reason.CONVERGED
    if rn_new >= config.alpha * rn_old:
        return Reason.STAGNATED
    if iteration >= limit:
        return Reason.ITERATION_LIMIT
    return None


def terminate_rate_estimate(correction_norms: Sequence[float], target: float) -> Reason | None:
    """Stop once the geometric tail of the corrections drops below target.

    With sigma the ratio of the last two correction norms, the error
    still ahead is modeled as d * sigma / (1 - sigma). Contraction is
    required: sigma >= 1, or fewer than two entries of history, means
    keep going. A zero last correction is immediate convergence.
    """
    if not correction_norms:
        return None
    d = correction_norms[-1]
    if d == 0.0:
        return Reason.CONVERGED
    if len(correction_norms) < 2:
        return None
    prev = correction_norms[-2]
    if prev == 0.0:
        return None
    sigma = d / prev
    if sigma >= 1.0:
        return None
    if d * sigma / (1.0 - sigma) <= target:
        return Reason.CONVERGED
    return None


def error_bound(tau: float, kappa: float) -> float:
    """Forward relative error bound tau * kappa for a terminal residual ratio tau."""
    if not (math.isfinite(tau) and math.isfinite(kappa)) or tau < 0 or kappa < 0:
        raise ValueError("tau and kappa must be finite and nonnegative")
    return tau * kappa


def ir_solve(a: PMatrix, b: PVector, config: IRConfig) -> IRResult:
    """Solve a x = b by mixed-precision iterative refinement.

    a and b must live at config.tw. The matrix is cast down to config.tf
    and factored once; corrections then accumulate at config.tr until
    the configured policy stops the loop. A factorization failure
    reports SolveFailure with zero iterations and x = 0; a failure
    inside a later triangular solve reports SolveFailure with the last
    accepted iterate. When stagnation strictly increased the residual
    norm, the iterate from before that step is returned.
    """
    rows, cols = a.data.shape
    if rows != cols:
        raise ValueError("matrix must be square")
    if a.tag is not config.tw or b.tag is not config.tw:
        raise ValueError("matrix and right-hand side must live at config.tw")
    if len(b) != rows:
        raise ValueError("dimension mismatch between matrix and right-hand side")

    n = rows
    tr = config.tr
    limit = min(config.max_iters or _HARD_CAP, _HARD_CAP)
    target = config.rate_target if config.rate_target is not None else config.tw.unit_roundoff

    norm_a = matrix_norm_inf(a)
    norm_b = norm_inf(b)

    x = PVector._wrap(np.zeros(n, dtype=tr.dtype), tr)
    r, _ = cast_vector(b, tr)
    rn = norm_inf(r)

    residual_norms = [rn]
    correction_norms: list[float] = []
    underflow_counts: list[int] = []

    def decide(rn_new: float, rn_old: float, norm_x: float, iteration: int) -> Reason | None:
        if config.policy is Policy.RESIDUAL:
            return terminate_residual(rn_new, rn_old, iteration, norm_a, norm_x, norm_b, config, limit)
        # the rate policy keeps the residual success test, then the tail estimate
        threshold = config.c_success * tr.unit_roundoff * (norm_a * norm_x + norm_b)
        if rn_new <= threshold:
            return Reason.CONVERGED
        verdict = terminate_rate_estimate(correction_norms, target)
        if verdict is not None:
            return verdict
        if iteration >= limit:
            return Reason.ITERATION_LIMIT
        return None

    narrow, _ = cast_matrix(a, config.tf)
    try:
        factors = lu_factor(narrow)
    except FactorError:
        history = IRHistory(tuple(residual_norms), (), (), Reason.SOLVE_FAILURE)
        return IRResult(x=x, iterations=0, reason=Reason.SOLVE_FAILURE, history=history, config=config)

    iterations = 0
    reason = decide(rn, math.inf, 0.0, 0)
    while reason is None:
        try:
            if config.solver is Solver.OTF:
                d = solve_otf(factors, r)
                underflow = 0
            else:
                step = solve_inplace(factors, r)
                d = step.vector
                underflow = step.underflow_to_zero
        except FactorError:
            reason = Reason.SOLVE_FAILURE
            break
        x_next = x + d
        r_next = residual(a, b, x_next)
        rn_next = norm_inf(r_next)
        iterations += 1
        correction_norms.append(norm_inf(d))
        underflow_counts.append(underflow)
        residual_norms.append(rn_next)
        reason = decide(rn_next, rn, norm_inf(x_next), iterations)
        if reason is Reason.STAGNATED and rn_next > rn:
            break  # the last step made things worse; keep the previous iterate
        x, r, rn = x_next, r_next, rn_next

    history = IRHistory(
        tuple(residual_norms),
        tuple(correction_norms),
        tuple(underflow_counts),
        reason,
    )
    return IRResult(x=x, iterations=iterations, reason=reason, history=history, config=config)


def iteration_matrices(a: PMatrix, factors: LUFactors, tr: Precision) -> tuple[PMatrix, PMatrix]:
    """Error and residual propagation operators of one refinement sweep.

    The first matrix is I - solve(promote(a) columns): it multiplies the
    error between iterates. The second is I - promote(a) @ solve(unit
    vectors): it multiplies the residual. Both are built column by
    column with the same kernels the loop uses, at tag tr. Dense and
    cubic, meant for small diagnostic problems.
    """
    rows, cols = a.data.shape
    if rows != cols:
        raise ValueError("matrix must be square")
    if factors.n != rows:
        raise ValueError("factor order must match the matrix")
    if tr < a.tag or tr < factors.tag:
        raise ValueError("tr must be at least as wide as the matrix and factor tags")
    n = rows
    dt = tr.dtype
    wide = promote_factors(factors, tr)
    a_wide, _ = cast_matrix(a, tr)
    eye = np.eye(n, dtype=dt)
    m_err = np.empty((n, n), dtype=dt)
    m_res = np.empty((n, n), dtype=dt)
    with np.errstate(all="ignore"):
        for j in range(n):
            col = PVector._wrap(np.ascontiguousarray(a_wide.data[:, j]), tr)
            v = solve_plain(wide, col)
            m_err[:, j] = eye[:, j] - v.data
            e = PVector._wrap(eye[:, j].copy(), tr)
            w = solve_plain(wide, e)
            u = matvec_promoted(a, w)
            m_res[:, j] = eye[:, j] - u.data
    return PMatrix._wrap(m_err, tr), PMatrix._wrap(m_res, tr)
