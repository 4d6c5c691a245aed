"""The blocking DECS stack: central stack plus the elimination-combining layer."""
from __future__ import annotations

from typing import Any, Optional

from .central import c_multi_pop, c_multi_push
from .core import (
    EMPTY_SLOT,
    FINISHED,
    INIT,
    POP,
    PUSH,
    RETRY,
    EliminationLayer,
    MultiOp,
    StackBase,
    init_multi_op,
)


def combine(a: MultiOp, p: MultiOp) -> None:
    """Append ``p``'s list to ``a``'s; ``a`` becomes delegate of both."""
    if a.op == PUSH:
        a.last.cell.next = p.cell
    a.last.next = p
    a.last = p.last
    a.length += p.length


def multi_eliminate(a: MultiOp, p: MultiOp) -> None:
    """Match reverse-kind records pairwise; promote the residue head with RETRY."""
    a_pop = a.op == POP
    acur: Optional[MultiOp] = a
    pcur: Optional[MultiOp] = p
    while acur is not None and pcur is not None:
        anext, pnext = acur.next, pcur.next
        if a_pop:
            acur.cell = pcur.cell
        else:
            pcur.cell = acur.cell
        acur.status = FINISHED
        pcur.status = FINISHED
        a.length -= 1
        p.length -= 1
        acur, pcur = anext, pnext
    if acur is not None:
        acur.length = a.length
        acur.last = a.last
        acur.status = RETRY
    elif pcur is not None:
        pcur.length = p.length
        pcur.last = p.last
        pcur.status = RETRY


class DECSStack(StackBase):
    """Dynamic elimination-combining stack (blocking).

    ``collision_width`` defaults to ``max_threads``. ``wait_spins`` is how
    long a registered delegate lingers in the layer before deregistering;
    ``yield_after`` is how many status checks a waiter makes before it starts
    yielding the interpreter between checks.
    """

    name = "decs"
    combining = True

    def __init__(
        self,
        max_threads: int = 16,
        *,
        collision_width: Optional[int] = None,
        wait_spins: int = 128,
        yield_after: int = 1024,
        seed: int = 0,
        interleave: bool = False,
    ) -> None:
        super().__init__(max_threads, seed, interleave)
        self.layer = EliminationLayer(max_threads, collision_width)
        self.wait_spins = wait_spins
        # under interleaving each status poll is a scheduling point and the
        # layer wait passes control every 8 spins
        self.yield_after = 0 if interleave else yield_after
        self._wait_yield_every = 8 if interleave else 16

    # -- entry points -------------------------------------------------

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

    def pop(self) -> Any:
        st = self._state()
        mop = init_multi_op(st.id, POP)
        st.waited = False
        head = self.head
        while True:
            if c_multi_pop(head, mop, self._before_signal):
                st.central += 1
                return mop.cell.data
            if self.collide(mop):
                self._credit(st)
                return mop.cell.data

    @staticmethod
    def _credit(st) -> None:
        if st.waited:
            st.comb += 1
        else:
            st.elim += 1

    def _before_signal(self, mop: MultiOp) -> None:
        if self.stall_hook is not None and mop.next is not None:
            self.stall_hook("before_signal", mop.id)

    # -- collision layer ----------------------------------------------

    def random_index(self, tid: int) -> int:
        st = self._states[tid]
        return int(st.rng.random() * self.layer.width)

    def register_op(self, mop: MultiOp) -> None:
        self.layer.location.set(mop.id, mop)

    def rendezvous_swap(self, index: int, tid: int) -> int:
        collision = self.layer.collision
        him = collision.get(index)
        while not collision.compare_and_set(index, him, tid):
            him = collision.get(index)
        return him

    def _eligible(self, mop: MultiOp, other: Optional[MultiOp], him: int) -> bool:
        if other is None or other.id == mop.id or other.id != him:
            return False
        return self.combining or other.op != mop.op

    def _wait(self, mop: MultiOp) -> None:
        loc = self.layer.location
        tid = mop.id
        every = self._wait_yield_every
        for i in range(self.wait_spins):
            if loc.get(tid) is not mop:
                return
            if i % every == 0:
                self._yield()

    def collide(self, mop: MultiOp) -> bool:
        """Try to finish ``mop`` in the layer; False means go back to the central stack."""
        tid = mop.id
        location = self.layer.location
        self.register_op(mop)
        him = self.rendezvous_swap(self.random_index(tid), tid)
        if him != EMPTY_SLOT:
            other = location.get(him)
            if self._eligible(mop, other, him):
                if location.compare_and_set(tid, mop, None):
                    return self.active_collide(mop, other)
                return self.passive_collide(mop)
        self._wait(mop)
        if not location.compare_and_set(tid, mop, None):
            return self.passive_collide(mop)
        return False

    def active_collide(self, a: MultiOp, p: MultiOp) -> bool:
        if not self.layer.location.compare_and_set(p.id, p, a):
            return False
        if a.op == p.op:
            combine(a, p)
            self._stall("after_combine", a.id)
            return False
        self.eliminate(a, p)
        return True

    def eliminate(self, a: MultiOp, p: MultiOp) -> None:
        if self.stall_hook is not None:
            self.stall_hook("before_signal", a.id)
        multi_eliminate(a, p)

    def _await_status(self, p: MultiOp) -> None:
        n = 0
        limit = self.yield_after
        while p.status == INIT:
            n += 1
            if n >= limit:
                self._yield()

    def passive_collide(self, p: MultiOp) -> bool:
        location = self.layer.location
        a = location.get(p.id)
        location.set(p.id, None)
        if p.op != a.op:
            if p.op == POP:
                p.cell = a.cell
            return True
        self._states[p.id].waited = True
        self._await_status(p)
        if p.status == FINISHED:
            return True
        self._states[p.id].waited = False
        p.status = INIT
        return False

