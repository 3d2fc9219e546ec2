"""Precision formats and the primitives that move values between them.

Everything in this package that changes the precision of a number goes
through this module, so every interprecision transfer has one auditable
implementation. Upcasts never round. Downcasts round to nearest, ties to
even, and report what happened through flags.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Final

import numpy as np

__all__ = [
    "Precision",
    "CastFlag",
    "TaggedScalar",
    "upcast",
    "downcast",
    "promote_op",
    "half_op",
]


class Precision(enum.Enum):
    """IEEE binary format tags, totally ordered HALF < SINGLE < DOUBLE.

    The enum value is the serialized name used by configs, records, and
    the command line.
    """

    HALF = "half"
    SINGLE = "single"
    DOUBLE = "double"

    @property
    def dtype(self) -> np.dtype:
        return _DTYPES[self]

    @property
    def unit_roundoff(self) -> float:
        # eps is the gap from 1.0 to the next float; round to nearest halves it
        return float(np.finfo(self.dtype).eps) / 2.0

    @property
    def max_finite(self) -> float:
        return float(np.finfo(self.dtype).max)

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, Precision):
            return NotImplemented
        return _RANK[self] < _RANK[other]

    def __le__(self, other: object) -> bool:
        if not isinstance(other, Precision):
            return NotImplemented
        return _RANK[self] <= _RANK[other]

    def __gt__(self, other: object) -> bool:
        if not isinstance(other, Precision):
            return NotImplemented
        return _RANK[self] > _RANK[other]

    def __ge__(self, other: object) -> bool:
        if not isinstance(other, Precision):
            return NotImplemented
        return _RANK[self] >= _RANK[other]


_DTYPES: Final = {
    Precision.HALF: np.dtype(np.float16),
    Precision.SINGLE: np.dtype(np.float32),
    Precision.DOUBLE: np.dtype(np.float64),
}

_RANK: Final = {Precision.HALF: 0, Precision.SINGLE: 1, Precision.DOUBLE: 2}


class CastFlag(enum.Enum):
    """What a downcast did to one value.

    EXACT and INEXACT partition every event; the remaining flags tag the
    special cases and ride along with whichever of the two applies. A
    value that lands exactly on a subnormal is EXACT and
    UNDERFLOW_TO_SUBNORMAL at the same time.
    """

    EXACT = "exact"
    INEXACT = "inexact"
    UNDERFLOW_TO_SUBNORMAL = "underflow-to-subnormal"
    UNDERFLOW_TO_ZERO = "underflow-to-zero"
    OVERFLOW_TO_INFINITY = "overflow-to-infinity"


@dataclass(frozen=True)
class TaggedScalar:
    """A scalar pinned to a precision.

    Construction coerces the given value with one round-to-nearest step
    at the tag's format, so a TaggedScalar always holds a value the
    format can represent (possibly infinity after overflow).
    """

    value: np.floating
    tag: Precision

    def __post_init__(self) -> None:
        with np.errstate(all="ignore"):
            object.__setattr__(self, "value", self.tag.dtype.type(self.value))

    def __float__(self) -> float:
        return float(self.value)

    def bits(self) -> int:
        """Raw encoding of the stored value, for bitwise comparisons."""
        return int.from_bytes(self.value.tobytes(), "little")


def upcast(x: TaggedScalar, target: Precision) -> TaggedScalar:
    """Move x to a wider or equal format. Exact: the value never changes."""
    if target < x.tag:
        raise ValueError(f"cannot upcast {x.tag.value} to narrower {target.value}")
    return TaggedScalar(x.value, target)


def downcast(x: TaggedScalar, target: Precision) -> tuple[TaggedScalar, frozenset[CastFlag]]:
    """Move x to a narrower or equal format, rounding to nearest, ties to even.

    Returns the rounded scalar together with the flags describing the
    event. NaN passes through and reports EXACT.
    """
    if target > x.tag:
        raise ValueError(f"cannot downcast {x.tag.value} to wider {target.value}")
    with np.errstate(all="ignore"):
        y = target.dtype.type(x.value)
    return TaggedScalar(y, target), _scalar_flags(x.value, y, target)


def _scalar_flags(src: np.floating, dst: np.floating, target: Precision) -> frozenset[CastFlag]:
    if np.isnan(src):
        return frozenset({CastFlag.EXACT})
    flags = set()
    back = src.dtype.type(dst)  # widening back is exact, so this tests round-trip identity
    flags.add(CastFlag.EXACT if back == src else CastFlag.INEXACT)
    if np.isinf(dst) and np.isfinite(src):
        flags.add(CastFlag.OVERFLOW_TO_INFINITY)
    if dst == 0 and src != 0:
        flags.add(CastFlag.UNDERFLOW_TO_ZERO)
    if dst != 0 and np.isfinite(dst) and abs(dst) < np.finfo(target.dtype).tiny:
        flags.add(CastFlag.UNDERFLOW_TO_SUBNORMAL)
    return frozenset(flags)


_OPS: Final = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
}


def promote_op(a: TaggedScalar, b: TaggedScalar, op: str) -> TaggedScalar:
    """Combine two tagged scalars: promote the narrower operand, then operate.

    The promotion is exact and the operation rounds once at the wider
    tag, which is also the result tag. This is the one sanctioned way to
    mix tags in arithmetic; overflow and division by zero follow IEEE
    semantics silently (inf and NaN results, no exception).
    """
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}, expected one of + - * /") from None
    target = a.tag if b.tag < a.tag else b.tag
    av = upcast(a, target).value
    bv = upcast(b, target).value
    with np.errstate(all="ignore"):
        return TaggedScalar(fn(av, bv), target)


def half_op(a: TaggedScalar | float, b: TaggedScalar | float, op: str) -> TaggedScalar:
    """Binary op with both operands and the result at HALF.

    Plain floats are rounded to HALF on entry; tagged operands must
    already carry the HALF tag. numpy evaluates binary16 arithmetic by
    widening to binary32, operating, and rounding back; for + - * / that
    double rounding is invisible because binary32 carries more than
    2 * 11 + 2 significant bits, so the result is the correctly rounded
    binary16 value.
    """
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}, expected one of + - * /") from None
    av = _as_half(a)
    bv = _as_half(b)
    with np.errstate(all="ignore"):
        return TaggedScalar(fn(av, bv), Precision.HALF)


def _as_half(x: TaggedScalar | float) -> np.float16:
    if isinstance(x, TaggedScalar):
        if x.tag is not Precision.HALF:
            raise ValueError("half_op operands must be HALF; downcast explicitly first")
        return x.value
    with np.errstate(all="ignore"):
        return np.float16(x)
