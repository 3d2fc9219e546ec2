"""Right-looking LU with partial pivoting and the two refinement solves.

The elimination is the plain textbook loop: at step k pick the largest
magnitude entry in the pivot column (smallest row index on ties), swap,
scale the column below the pivot, apply the rank-1 update. No blocking,
no fused multiply-add, one rounding per scalar operation. That fixes the
factors bit for bit across runs.

Two substitution paths solve with the packed factors. solve_otf keeps
the factors narrow and widens each element as the sweeps touch it, so
the arithmetic runs at the residual's precision. solve_inplace scales
the residual down into the factors' precision, solves there, and scales
back, so the arithmetic runs narrow. solve_plain is the same-precision
substitution both of those are measured against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .counters import record_downcasts, record_promotes, record_upcasts
from .mparray import PMatrix, PVector, _count_flags, cast_matrix
from .precision import Precision

__all__ = [
    "FactorError",
    "ZeroPivotError",
    "NonFiniteError",
    "LUFactors",
    "InplaceSolve",
    "lu_factor",
    "promote_factors",
    "solve_plain",
    "solve_otf",
    "solve_inplace",
]


class FactorError(Exception):
    """Factorization or substitution failure, with the elimination step."""

    def __init__(self, k: int, message: str):
        super().__init__(message)
        self.k = k


class ZeroPivotError(FactorError):
    def __init__(self, k: int):
        super().__init__(k, f"exact zero pivot at elimination step {k}")


class NonFiniteError(FactorError):
    def __init__(self, k: int):
        super().__init__(k, f"non-finite value in column {k}")


@dataclass(frozen=True, eq=False)
class LUFactors:
    """Packed LU of a row-permuted matrix.

    packed holds U on and above the diagonal and the multipliers of the
    unit lower factor strictly below it. pivots[k] is the row swapped
    into position k at step k; every entry satisfies k <= pivots[k] < n.
    """

    packed: PMatrix
    pivots: np.ndarray

    def __post_init__(self) -> None:
        piv = np.array(self.pivots, dtype=np.int64)
        rows, cols = self.packed.data.shape
        if rows != cols:
            raise ValueError("packed factors must be square")
        if piv.shape != (rows,):
            raise ValueError("pivot vector length must match the matrix order")
        steps = np.arange(rows)
        if np.any(piv < steps) or np.any(piv >= rows):
            raise ValueError("pivots must satisfy k <= pivots[k] < n")
        piv.flags.writeable = False
        object.__setattr__(self, "pivots", piv)

    @property
    def tag(self) -> Precision:
        return self.packed.tag

    @property
    def n(self) -> int:
        return self.packed.data.shape[0]


def lu_factor(a: PMatrix) -> LUFactors:
    """Factor a square matrix at its own precision.

    Raises ZeroPivotError when a pivot column is exactly zero and
    NonFiniteError when overflow or an invalid operation contaminates
    the factors (a live risk at HALF). Ties in the pivot search resolve
    to the smallest row index so reruns pivot identically.
    """
    rows, cols = a.data.shape
    if rows != cols:
        raise ValueError(f"matrix must be square, got {a.data.shape}")
    n = rows
    buf = np.array(a.data)  # the working copy, eliminated in place
    pivots = np.empty(n, dtype=np.int64)
    with np.errstate(all="ignore"):
        for k in range(n):
            col = np.abs(buf[k:, k])
            p = k + int(np.argmax(col))  # argmax lands on a NaN if present
            piv = buf[p, k]
            if not np.isfinite(piv):
                raise NonFiniteError(k)
            if piv == 0:
                raise ZeroPivotError(k)
            pivots[k] = p
            if p != k:
                buf[[k, p], :] = buf[[p, k], :]
            if k + 1 < n:
                buf[k + 1 :, k] /= buf[k, k]
                buf[k + 1 :, k + 1 :] -= np.outer(buf[k + 1 :, k], buf[k, k + 1 :])
    if not np.isfinite(buf).all():
        good = np.isfinite(buf).all(axis=0)
        raise NonFiniteError(int(np.argmin(good)))
    return LUFactors(packed=PMatrix._wrap(buf, a.tag), pivots=pivots)


def promote_factors(f: LUFactors, target: Precision) -> LUFactors:
    """Widen the packed factors exactly; pivots carry over unchanged."""
    if target < f.tag:
        raise ValueError("factors can only be promoted to a wider tag")
    wide, _ = cast_matrix(f.packed, target)
    return LUFactors(packed=wide, pivots=f.pivots)


def _pivot_permutation(pivots: np.ndarray) -> np.ndarray:
    perm = np.arange(pivots.shape[0])
    for k, p in enumerate(pivots):
        if p != k:
            perm[k], perm[p] = perm[p], perm[k]
    return perm


def solve_plain(f: LUFactors, r: PVector) -> PVector:
    """Substitution at the factors' own precision.

    Applies the pivots to r, then a forward sweep in ascending column
    order with the unit diagonal left implicit, then a backward sweep in
    descending column order dividing by the stored diagonal. One
    rounding per multiply and per subtract.
    """
    if r.tag is not f.tag:
        raise ValueError("solve_plain needs the residual at the factor tag")
    n = f.n
    if len(r) != n:
        raise ValueError(f"length mismatch: {len(r)} against order {n}")
    packed = f.packed.data
    y = r.data[_pivot_permutation(f.pivots)]
    with np.errstate(all="ignore"):
        for j in range(n - 1):
            y[j + 1 :] -= packed[j + 1 :, j] * y[j]
        for j in range(n - 1, -1, -1):
            y[j] = y[j] / packed[j, j]
            if j:
                y[:j] -= packed[:j, j] * y[j]
    return PVector._wrap(y, f.tag)


def solve_otf(f: LUFactors, r: PVector) -> PVector:
    """Substitution at the residual's tag, widening factors at the moment of use.

    Each factor element, the implicit unit diagonal of the lower factor
    included, is promoted exactly once per solve: n * (n + 1) promote
    events for the forward and backward sweeps together when the tags
    differ, none when they coincide. The arithmetic matches solve_plain
    on promoted factors bit for bit, because dividing by an exactly
    promoted 1.0 changes nothing and every other operation runs in the
    same order at the same width.
    """
    if r.tag < f.tag:
        raise ValueError("residual tag must not be narrower than the factor tag")
    n = f.n
    if len(r) != n:
        raise ValueError(f"length mismatch: {len(r)} against order {n}")
    packed = f.packed.data
    wide = r.tag.dtype
    one = f.tag.dtype.type(1.0)
    y = r.data[_pivot_permutation(f.pivots)]
    events = 0
    with np.errstate(all="ignore"):
        for j in range(n):
            y[j] = y[j] / wide.type(one)
            events += 1
            if j + 1 < n:
                col = packed[j + 1 :, j].astype(wide)
                events += n - j - 1
                y[j + 1 :] -= col * y[j]
        for j in range(n - 1, -1, -1):
            y[j] = y[j] / wide.type(packed[j, j])
            events += 1
            if j:
                col = packed[:j, j].astype(wide)
                events += j
                y[:j] -= col * y[j]
    if f.tag is not r.tag:
        record_promotes(events)
    return PVector._wrap(y, r.tag)


class InplaceSolve(NamedTuple):
    """Correction from the narrow solve plus the downcast underflow tallies."""

    vector: PVector
    underflow_to_zero: int
    underflow_to_subnormal: int


def solve_inplace(f: LUFactors, r: PVector) -> InplaceSolve:
    """Scale the residual into the factor precision, solve there, scale back.

    The scale is the max norm of the residual, so the narrow solve sees
    entries in [-1, 1]. Scaling r by a power of two changes the output
    by exactly that power of two: the scale absorbs it without rounding
    and everything in between is bitwise identical. 2n transfer events
    per call when the tags differ (n down, n up). Raises NonFiniteError
    when the residual is not finite or the narrow solve overflows; a
    zero residual short-circuits to a zero correction.
    """
    if r.tag < f.tag:
        raise ValueError("residual tag must not be narrower than the factor tag")
    n = f.n
    if len(r) != n:
        raise ValueError(f"length mismatch: {len(r)} against order {n}")
    finite = np.isfinite(r.data)
    if not finite.all():
        raise NonFiniteError(int(np.argmin(finite)))
    tr = r.tag
    scale = np.max(np.abs(r.data))
    if scale == 0:
        zero = PVector._wrap(np.zeros(n, dtype=tr.dtype), tr)
        return InplaceSolve(zero, 0, 0)
    with np.errstate(all="ignore"):
        w = r.data / scale
        narrow = w.astype(f.tag.dtype)
    if f.tag is tr:
        under_zero = under_sub = 0
    else:
        record_downcasts(narrow.size)
        report = _count_flags(w, narrow, f.tag)
        under_zero = report.underflow_to_zero
        under_sub = report.underflow_to_subnormal
    z = solve_plain(f, PVector._wrap(narrow, f.tag))
    z_finite = np.isfinite(z.data)
    if not z_finite.all():
        raise NonFiniteError(int(np.argmin(z_finite)))
    if f.tag is tr:
        back = np.array(z.data)
    else:
        back = z.data.astype(tr.dtype)
        record_upcasts(back.size)
    with np.errstate(all="ignore"):
        d = back * scale
    return InplaceSolve(PVector._wrap(d, tr), under_zero, under_sub)
