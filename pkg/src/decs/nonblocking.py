"""NB-DECS: the lock-free variant.

Waiters give up after a bounded wait and cancel their descriptor with a
test-and-set on ``invalid``. Delegates therefore claim every popped cell and
every eliminated partner with test-and-set before handing anything out, and
multi-pops take cells from the central stack one at a time.
"""
from __future__ import annotations

from typing import Any, Optional

from .atomic import clear_flag, test_and_set
from .central import c_multi_push
from .core import (
    EMPTY_CELL,
    EXCHANGE,
    FINISHED,
    INIT,
    POP,
    PUSH,
    RETRY,
    Cell,
    MultiOp,
    init_multi_op,
)
from .elimination import DECSStack


def delegate_pop(mop: MultiOp, cell: Cell) -> bool:
    """Give ``cell`` to the first live waiter in ``mop``'s list.

    Cancelled waiters met on the way are unlinked. False means nobody was
    left waiting and the cell belongs to the delegate.
    """
    nxt = mop.next
    while nxt is not None:
        nxt.cell = cell
        mop.next = nxt.next
        if mop.next is None:
            mop.last = mop
        mop.length -= 1
        nxt.status = FINISHED
        if not test_and_set(nxt):
            return True
        nxt = mop.next
    return False


def nb_multi_eliminate(a: MultiOp, p: MultiOp) -> None:
    """Pair records through ``other`` and signal EXCHANGE; hand the residue on.

    The two delegates at the head of the lists cannot cancel, so their
    exchange is completed here directly. Waiter pairs settle the exchange
    themselves by claiming each other.
    """
    if a.op == POP:
        a.cell = p.cell
    acur: Optional[MultiOp] = a
    pcur: Optional[MultiOp] = p
    while acur is not None and pcur is not None:
        anext, pnext = acur.next, pcur.next
        acur.other = pcur
        pcur.other = acur
        acur.status = EXCHANGE
        pcur.status = EXCHANGE
        a.length -= 1
        p.length -= 1
        acur, pcur = anext, pnext
    if acur is not None:
        _promote_residue(a, acur)
    elif pcur is not None:
        _promote_residue(p, pcur)


def _promote_residue(inf: MultiOp, cur: Optional[MultiOp]) -> None:
    while cur is not None:
        nxt = cur.next
        cur.length = inf.length
        cur.last = inf.last
        cur.status = RETRY
        if not test_and_set(cur):
            return
        inf.length -= 1
        cur = nxt


class NBDECSStack(DECSStack):
    """Lock-free DECS.

    ``bounded_await_spins`` caps how many status checks a waiter makes
    before it tries to cancel.
    """

    name = "nb-decs"

    def __init__(self, max_threads: int = 16, *, bounded_await_spins: int = 16384, **kw) -> None:
        super().__init__(max_threads, **kw)
        self.bounded_await_spins = bounded_await_spins

    def push(self, data: Any) -> None:
        st = self._state()
        mop = init_multi_op(st.id, PUSH, data)
        st.waited = False
        head = self.head
        while True:
            if c_multi_push(head, mop, self._before_signal):
                st.central += 1
                return
            if self.collide(mop):
                self._credit(st)
                return
            if mop.invalid:
                mop = init_multi_op(st.id, PUSH, data)
                st.waited = False

    def pop(self) -> Any:
        st = self._state()
        mop = init_multi_op(st.id, POP)
        st.waited = False
        while True:
            if self.c_multi_pop(mop):
                st.central += 1
                return mop.cell.data
            if self.collide(mop):
                self._credit(st)
                return mop.cell.data
            if mop.invalid:
                mop = init_multi_op(st.id, POP)
                st.waited = False

    def c_multi_pop(self, mop: MultiOp) -> bool:
        head = self.head
        for _ in range(mop.length):
            top, ver = head.get()
            if top is None:
                if self.stall_hook is not None and mop.next is not None:
                    self.stall_hook("before_signal", mop.id)
                cur: Optional[MultiOp] = mop
                while cur is not None:
                    nxt = cur.next
                    cur.cell = EMPTY_CELL
                    cur.status = FINISHED
                    test_and_set(cur)
                    cur = nxt
                return True
            if head.compare_and_set(top, ver, top.next):
                if not test_and_set(top):
                    if mop.next is not None and self.stall_hook is not None:
                        self.stall_hook("before_signal", mop.id)
                    if not delegate_pop(mop, top):
                        mop.cell = top
                        return True
        return False

    def eliminate(self, a: MultiOp, p: MultiOp) -> None:
        if self.stall_hook is not None:
            self.stall_hook("before_signal", a.id)
        nb_multi_eliminate(a, p)

    def _bounded_await(self, p: MultiOp) -> bool:
        limit = self.bounded_await_spins
        yield_after = self.yield_after
        n = 0
        while p.status == INIT:
            n += 1
            if n >= limit:
                return False
            if n >= yield_after or n & 63 == 0:
                self._yield()
        return True

    def passive_collide(self, p: MultiOp) -> bool:
        location = self.layer.location
        a = location.get(p.id)
        location.set(p.id, None)
        if p.op != a.op:
            if p.op == POP:
                p.cell = a.cell
            return True
        st = self._states[p.id]
        st.waited = True
        if not self._bounded_await(p):
            st.timeouts += 1
            return self._settle(self.wakeup(p), p)
        status = p.status
        if status == FINISHED:
            return True
        if status == EXCHANGE:
            other = p.other
            if not test_and_set(other):
                if p.op == POP:
                    p.cell = other.cell
                return True
            # partner cancelled; this descriptor is retired for a fresh one
            test_and_set(p)
            st.waited = False
            return False
        # RETRY: the eliminator claims us right after signalling; if we win
        # the claim instead, it skips us and we restart with a new record
        if test_and_set(p):
            clear_flag(p)
            p.status = INIT
        st.waited = False
        return False

    def _settle(self, done: bool, p: MultiOp) -> bool:
        if not done:
            self._states[p.id].waited = False
        return done

    def wakeup(self, mop: MultiOp) -> bool:
        """Resolve a bounded wait that expired with the status still INIT."""
        if mop.op == POP:
            if not test_and_set(mop):
                return False
            if mop.status == RETRY:
                clear_flag(mop)
                mop.status = INIT
                return False
            if mop.other is not None:
                mop.cell = mop.other.cell
            return True
        # record first: a RETRY claim must not cost us our cell
        if test_and_set(mop):
            if mop.status == RETRY:
                mop.status = INIT
                clear_flag(mop)
                return False
            return True
        return test_and_set(mop.cell)
