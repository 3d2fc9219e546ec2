"""Precision-tagged dense arrays and the counted casts between them.

PVector and PMatrix pin a numpy array to a Precision tag and freeze it.
Casting between tags is explicit: cast_vector and cast_matrix return a
fresh tagged array plus a report of what the rounding did. The promoted
matrix-vector product and the residual evaluate with one rounding per
scalar operation and a pinned accumulation order, so identical inputs
give bitwise identical outputs on every run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counters import record_downcasts, record_promotes, record_upcasts
from .precision import Precision

__all__ = [
    "PVector",
    "PMatrix",
    "CastReport",
    "cast_vector",
    "cast_matrix",
    "matvec_promoted",
    "residual",
    "norm_inf",
    "matrix_norm_inf",
    "bitwise_equal",
]


@dataclass(frozen=True, eq=False)
class PVector:
    """Immutable 1-D array at a fixed precision.

    Construction rounds the input once to the tag's format and freezes
    the storage; empty vectors are rejected. Same-tag addition and
    subtraction work elementwise, mixed tags must transfer explicitly.
    """

    data: np.ndarray
    tag: Precision

    def __post_init__(self) -> None:
        with np.errstate(all="ignore"):
            arr = np.array(self.data, dtype=self.tag.dtype)
        if arr.ndim != 1:
            raise ValueError(f"vector must be 1-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("empty vector")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def _wrap(cls, arr: np.ndarray, tag: Precision) -> "PVector":
        # take ownership of a freshly allocated buffer of the right dtype
        obj = object.__new__(cls)
        arr.flags.writeable = False
        object.__setattr__(obj, "data", arr)
        object.__setattr__(obj, "tag", tag)
        return obj

    def __len__(self) -> int:
        return self.data.shape[0]

    def __add__(self, other: "PVector") -> "PVector":
        if not isinstance(other, PVector):
            return NotImplemented
        if other.tag is not self.tag:
            raise ValueError("mixed-tag add; transfer one operand explicitly first")
        with np.errstate(all="ignore"):
            return PVector._wrap(self.data + other.data, self.tag)

    def __sub__(self, other: "PVector") -> "PVector":
        if not isinstance(other, PVector):
            return NotImplemented
        if other.tag is not self.tag:
            raise ValueError("mixed-tag subtract; transfer one operand explicitly first")
        with np.errstate(all="ignore"):
            return PVector._wrap(self.data - other.data, self.tag)


@dataclass(frozen=True, eq=False)
class PMatrix:
    """Immutable 2-D array at a fixed precision."""

    data: np.ndarray
    tag: Precision

    def __post_init__(self) -> None:
        with np.errstate(all="ignore"):
            arr = np.array(self.data, dtype=self.tag.dtype, order="C")
        if arr.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("empty matrix")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def _wrap(cls, arr: np.ndarray, tag: Precision) -> "PMatrix":
        obj = object.__new__(cls)
        arr.flags.writeable = False
        object.__setattr__(obj, "data", arr)
        object.__setattr__(obj, "tag", tag)
        return obj

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class CastReport:
    """Element counts describing one bulk cast."""

    elements: int
    inexact: int = 0
    underflow_to_subnormal: int = 0
    underflow_to_zero: int = 0
    overflow_to_infinity: int = 0

    @property
    def exact(self) -> int:
        return self.elements - self.inexact


def _count_flags(src: np.ndarray, dst: np.ndarray, target: Precision) -> CastReport:
    """Aggregate downcast flags over an array, mirroring the scalar rules."""
    back = dst.astype(src.dtype)
    nan_pass = np.isnan(src) & np.isnan(dst)
    inexact = np.count_nonzero(~((back == src) | nan_pass))
    overflow = np.count_nonzero(np.isinf(dst) & np.isfinite(src))
    under_zero = np.count_nonzero((dst == 0) & (src != 0) & np.isfinite(src))
    tiny = np.finfo(target.dtype).tiny
    under_sub = np.count_nonzero((dst != 0) & np.isfinite(dst) & (np.abs(dst) < tiny))
    return CastReport(
        elements=src.size,
        inexact=int(inexact),
        underflow_to_subnormal=int(under_sub),
        underflow_to_zero=int(under_zero),
        overflow_to_infinity=int(overflow),
    )


def cast_vector(v: PVector, target: Precision) -> tuple[PVector, CastReport]:
    """Cast every element to target, counting the transfer.

    Upcasts are exact and report no flags. Downcasts round to nearest
    and the report breaks down what the rounding did. Casting to the
    same tag returns the input and counts nothing.
    """
    if target is v.tag:
        return v, CastReport(elements=len(v))
    with np.errstate(all="ignore"):
        out = v.data.astype(target.dtype)
    if target > v.tag:
        record_upcasts(out.size)
        report = CastReport(elements=out.size)
    else:
        record_downcasts(out.size)
        report = _count_flags(v.data, out, target)
    return PVector._wrap(out, target), report


def cast_matrix(a: PMatrix, target: Precision) -> tuple[PMatrix, CastReport]:
    """Elementwise cast of a matrix; same contract as cast_vector."""
    if target is a.tag:
        return a, CastReport(elements=a.data.size)
    with np.errstate(all="ignore"):
        out = a.data.astype(target.dtype)
    if target > a.tag:
        record_upcasts(out.size)
        report = CastReport(elements=out.size)
    else:
        record_downcasts(out.size)
        report = _count_flags(a.data, out, target)
    return PMatrix._wrap(out, target), report


def matvec_promoted(a: PMatrix, x: PVector) -> PVector:
    """Product promote(a) @ x evaluated at the tag of x.

    Every matrix element is promoted to x's tag at the moment of use
    (and counted when the tags differ), each multiply rounds once, and
    each row sum accumulates strictly left to right. That pins the
    result bit for bit.
    """
    if x.tag < a.tag:
        raise ValueError("matvec target must not be narrower than the matrix tag")
    m, n = a.data.shape
    if n != len(x):
        raise ValueError(f"shape mismatch: {a.data.shape} against length {len(x)}")
    if a.tag is x.tag:
        wide = a.data
    else:
        wide = a.data.astype(x.tag.dtype)
        record_promotes(wide.size)
    with np.errstate(all="ignore"):
        prod = wide * x.data[np.newaxis, :]
        acc = np.add.accumulate(prod, axis=1)
    return PVector._wrap(np.ascontiguousarray(acc[:, -1]), x.tag)


def residual(a: PMatrix, b: PVector, x: PVector) -> PVector:
    """r = promote(b) - promote(a) @ x, evaluated at the tag of x."""
    if b.tag is not a.tag:
        raise ValueError("right-hand side must share the matrix tag")
    bp, _ = cast_vector(b, x.tag)
    ax = matvec_promoted(a, x)
    with np.errstate(all="ignore"):
        return PVector._wrap(bp.data - ax.data, x.tag)


def norm_inf(v: PVector) -> float:
    """Exact max |v_i| as a double.

    Taking absolute values and the maximum introduces no rounding, and
    widening the winner to double is exact, so this observer never
    perturbs a computation and never counts a transfer.
    """
    return float(np.max(np.abs(v.data)))


def matrix_norm_inf(a: PMatrix) -> float:
    """Max absolute row sum, accumulated at DOUBLE regardless of the tag."""
    wide = np.abs(a.data.astype(np.float64))
    return float(wide.sum(axis=1).max())


def bitwise_equal(a: PVector | PMatrix, b: PVector | PMatrix) -> bool:
    """True when tags, shapes, and every stored bit pattern agree."""
    return (
        type(a) is type(b)
        and a.tag is b.tag
        and a.data.shape == b.data.shape
        and a.data.tobytes() == b.data.tobytes()
    )
