"""Accounting of interprecision transfer events.

A transfer event is one scalar element changing format. Kernels report
events here; nothing is recorded unless a count_transfers scope is
active on the calling thread. Scopes nest, and every enclosing scope
sees the events of everything it encloses.

Only data that flows into the computation is tracked. Casting to the
same tag moves nothing and counts nothing, and read-only observers such
as the norms never count.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator

__all__ = ["TransferCounter", "count_transfers"]


@dataclass(eq=False)
class TransferCounter:
    """Tally of transfer events, split by kind.

    Identity equality on purpose: scopes find their own counter on the
    stack even when two scopes have seen identical tallies.

    promotes counts elements widened one at a time at the moment of use
    inside a kernel. upcasts and downcasts count elements moved by
    explicit bulk casts.
    """

    promotes: int = 0
    upcasts: int = 0
    downcasts: int = 0

    @property
    def casts(self) -> int:
        """Bulk cast events in either direction."""
        return self.upcasts + self.downcasts

    @property
    def total(self) -> int:
        return self.promotes + self.upcasts + self.downcasts


_local = threading.local()


def _stack() -> list[TransferCounter]:
    try:
        return _local.stack
    except AttributeError:
        _local.stack = []
        return _local.stack


@contextmanager
def count_transfers() -> Iterator[TransferCounter]:
    """Collect transfer events on this thread until the scope exits."""
    counter = TransferCounter()
    stack = _stack()
    stack.append(counter)
    try:
        yield counter
    finally:
        stack.remove(counter)


def record_promotes(n: int) -> None:
    for counter in _stack():
        counter.promotes += n


def record_upcasts(n: int) -> None:
    for counter in _stack():
        counter.upcasts += n


def record_downcasts(n: int) -> None:
    for counter in _stack():
        counter.downcasts += n
