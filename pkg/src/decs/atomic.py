"""Lock-backed atomic primitives.

CPython exposes no compare-and-swap instruction, so every read-modify-write
below is a short critical section. Plain attribute loads and stores are
already atomic under the interpreter lock, which is what the algorithms rely
on for status signalling.
"""
from __future__ import annotations

import itertools
import os
import random
import threading
import time
from threading import Lock
from typing import Any, Generic, Optional, Tuple, TypeVar

T = TypeVar("T")

_STRIPES = tuple(Lock() for _ in range(256))


# time.sleep(0) releases the GIL but the releasing thread nearly always
# takes it straight back; sched_yield lets a waiting thread in.
yield_cpu = getattr(os, "sched_yield", lambda: time.sleep(0))


def _stripe(obj: Any) -> Lock:
    return _STRIPES[(id(obj) >> 4) & 255]


def test_and_set(obj: Any) -> bool:
    """Set ``obj.invalid`` and return its previous value."""
    with _stripe(obj):
        old = obj.invalid
        obj.invalid = True
        return old


def clear_flag(obj: Any) -> None:
    with _stripe(obj):
        obj.invalid = False


def pause(spins: int, yield_every: int = 32, switch=None) -> None:
    """Busy-wait ``spins`` iterations, handing the interpreter over now and then."""
    switch = switch or yield_cpu
    for i in range(spins):
        if i % yield_every == 0:
            switch()


class AtomicCounter:
    # itertools.count.__next__ runs without releasing the GIL
    def __init__(self, start: int = 0) -> None:
        self._it = itertools.count(start)

    def next(self) -> int:
        return next(self._it)


class VersionedRef(Generic[T]):
    """A (reference, version) pair swapped as one unit.

    The version increases by one on every successful update, which is the
    tag technique used against ABA.
    """

    __slots__ = ("_pair", "_lock")

    def __init__(self, ref: Optional[T] = None) -> None:
        self._pair: Tuple[Optional[T], int] = (ref, 0)
        self._lock = Lock()

    def get(self) -> Tuple[Optional[T], int]:
        return self._pair

    @property
    def ref(self) -> Optional[T]:
        return self._pair[0]

    @property
    def version(self) -> int:
        return self._pair[1]

    def compare_and_set(self, expected: Optional[T], version: int, new: Optional[T]) -> bool:
        with self._lock:
            ref, ver = self._pair
            if ref is expected and ver == version:
                self._pair = (new, ver + 1)
                return True
            return False


class AtomicArray:
    """Fixed-size array of slots with per-slot compare-and-set."""

    __slots__ = ("_items", "_locks")

    def __init__(self, size: int, initial: Any = None) -> None:
        self._items = [initial] * size
        self._locks = [Lock() for _ in range(size)]

    def __len__(self) -> int:
        return len(self._items)

    def get(self, i: int) -> Any:
        return self._items[i]

    def set(self, i: int, value: Any) -> None:
        self._items[i] = value

    def compare_and_set(self, i: int, expected: Any, new: Any) -> bool:
        with self._locks[i]:
            cur = self._items[i]
            if cur is expected or cur == expected:
                self._items[i] = new
                return True
            return False


class Turnstile:
    """Baton for emulating parallel execution on one core.

    Member threads run one at a time and hand the baton to a randomly chosen
    live member at every ``switch``. Under the GIL, threads otherwise run long
    uninterrupted stretches, so two of them rarely sit between a read and the
    matching compare-and-set at once. Passing the baton at shared-memory
    steps restores that overlap. A waiter that does not get the baton within
    ``patience`` seconds runs anyway, so a stalled member cannot freeze the
    ring. The choice is random because a fixed order lets whoever won the
    last compare-and-set win every following one.
    """

    def __init__(self, patience: float = 0.005, seed: int = 0) -> None:
        self.patience = patience
        self._rng = random.Random(seed)
        self._lock = Lock()
        self._members: list = []
        self._local = threading.local()

    def join(self) -> None:
        if getattr(self._local, "sem", None) is not None:
            return
        sem = threading.Semaphore(0)
        self._local.sem = sem
        with self._lock:
            self._members.append((threading.current_thread(), sem))
            alone = len(self._members) == 1
        if not alone:
            sem.acquire(timeout=self.patience)

    def leave(self) -> None:
        sem = getattr(self._local, "sem", None)
        if sem is None:
            return
        self._local.sem = None
        with self._lock:
            i = self._index(sem)
            del self._members[i]
            self._wake_after(i - 1)

    def switch(self) -> None:
        sem = getattr(self._local, "sem", None)
        if sem is None:
            yield_cpu()
            return
        with self._lock:
            alone = len(self._members) == 1
            if not alone:
                self._wake_after(self._index(sem))
        if alone:
            # let threads that have not joined yet get going
            yield_cpu()
        else:
            sem.acquire(timeout=self.patience)

    def _index(self, sem) -> int:
        for i, (_, s) in enumerate(self._members):
            if s is sem:
                return i
        raise RuntimeError("thread is not a member")

    def _wake_after(self, i: int) -> None:
        # i is the caller's index, or -1 after it left; it is picked last
        members = self._members
        n = len(members)
        if n == 0:
            return
        start = self._rng.randrange(n)
        for k in range(n):
            j = (start + k) % n
            if j == i:
                continue
            thread, sem = members[j]
            if thread.is_alive():
                sem.release()
                return
        if 0 <= i < n:
            members[i][1].release()


class InterleavedRef(VersionedRef[T]):
    """VersionedRef that hands control to another thread after each read."""

    __slots__ = ("_switch",)

    def __init__(self, ref: Optional[T] = None, switch=yield_cpu) -> None:
        super().__init__(ref)
        self._switch = switch

    def get(self) -> Tuple[Optional[T], int]:
        pair = self._pair
        self._switch()
        return pair
