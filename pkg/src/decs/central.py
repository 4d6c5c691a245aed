"""Applying whole multi-op lists to the central stack with one head swap."""
from __future__ import annotations

from typing import Callable, Optional

from .atomic import VersionedRef
from .core import EMPTY_CELL, FINISHED, Cell, MultiOp

Signal = Optional[Callable[[MultiOp], None]]


def _release_waiters(mop: MultiOp) -> None:
    cur = mop.next
    while cur is not None:
        nxt = cur.next
        cur.status = FINISHED
        cur = nxt


def c_multi_push(head: VersionedRef[Cell], mop: MultiOp, before_signal: Signal = None) -> bool:
    """Chain the delegate's cell list onto the stack; signal waiters on success."""
    top, ver = head.get()
    mop.last.cell.next = top
    if not head.compare_and_set(top, ver, mop.cell):
        return False
    if before_signal is not None:
        before_signal(mop)
    _release_waiters(mop)
    return True


def c_multi_pop(head: VersionedRef[Cell], mop: MultiOp, before_signal: Signal = None) -> bool:
    """Pop min(length, depth) cells in one swap and hand them out in list order.

    Records beyond the stack depth get EMPTY_CELL. The size walk may read a
    stale chain; only the head swap decides.
    """
    top, ver = head.get()
    if top is None:
        cur: Optional[MultiOp] = mop
        while cur is not None:
            nxt = cur.next
            cur.cell = EMPTY_CELL
            cur.status = FINISHED
            cur = nxt
        return True
    ntop = top.next
    m = 1
    length = mop.length
    while ntop is not None and m < length:
        ntop = ntop.next
        m += 1
    if not head.compare_and_set(top, ver, ntop):
        return False
    mop.cell = top
    top = top.next
    if before_signal is not None:
        before_signal(mop)
    cur = mop.next
    for _ in range(m - 1):
        nxt = cur.next
        cur.cell = top
        top = top.next
        cur.status = FINISHED
        cur = nxt
    while cur is not None:
        nxt = cur.next
        cur.cell = EMPTY_CELL
        cur.status = FINISHED
        cur = nxt
    return True
