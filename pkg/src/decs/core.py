"""Shared data model: cells, multi-op descriptors, the elimination layer."""
from __future__ import annotations

import enum
import random
import threading
from dataclasses import dataclass
from typing import Any, Callable, List, Optional

from .atomic import AtomicArray, InterleavedRef, Turnstile, VersionedRef, yield_cpu


class OpKind(enum.IntEnum):
    PUSH = 0
    POP = 1


class Status(enum.IntEnum):
    INIT = 0
    FINISHED = 1
    RETRY = 2
    EXCHANGE = 3


PUSH = OpKind.PUSH
POP = OpKind.POP
INIT = Status.INIT
FINISHED = Status.FINISHED
RETRY = Status.RETRY
EXCHANGE = Status.EXCHANGE


class _Empty:
    """Result of a pop linearized against an empty stack."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EMPTY"

    def __reduce__(self):
        return (_Empty, ())


EMPTY = _Empty()


class Cell:
    __slots__ = ("data", "next", "invalid")

    def __init__(self, data: Any, next: Optional["Cell"] = None) -> None:
        self.data = data
        self.next = next
        self.invalid = False

    def __repr__(self) -> str:
        return f"Cell({self.data!r})"


EMPTY_CELL = Cell(EMPTY)


def sentinel_empty_cell() -> Cell:
    return EMPTY_CELL


_NO_PAYLOAD = object()


class MultiOp:
    """Descriptor of one operation; also the head of a multi-op list.

    ``status`` and ``invalid`` are the only fields touched by threads other
    than the list's current delegate.
    """

    __slots__ = ("id", "op", "length", "status", "cell", "next", "last", "other", "invalid")

    def __init__(self, tid: int, op: OpKind, cell: Cell) -> None:
        self.id = tid
        self.op = op
        self.length = 1
        self.status = INIT
        self.cell = cell
        self.next: Optional[MultiOp] = None
        self.last: MultiOp = self
        self.other: Optional[MultiOp] = None
        self.invalid = False

    def __repr__(self) -> str:
        return f"MultiOp(id={self.id}, op={self.op.name}, length={self.length}, status={self.status.name})"

    def records(self) -> List["MultiOp"]:
        """Nodes reachable through ``next``, this one first."""
        out = []
        cur: Optional[MultiOp] = self
        while cur is not None:
            out.append(cur)
            cur = cur.next
        return out


def init_multi_op(tid: int, kind: OpKind, payload: Any = _NO_PAYLOAD) -> MultiOp:
    if kind == PUSH:
        if payload is _NO_PAYLOAD:
            raise ValueError("a push needs a payload")
        return MultiOp(tid, PUSH, Cell(payload))
    if payload is not _NO_PAYLOAD:
        raise ValueError("a pop takes no payload")
    return MultiOp(tid, POP, EMPTY_CELL)


EMPTY_SLOT = 0


class EliminationLayer:
    """The ``location`` and ``collision`` arrays.

    Thread ids are 1..threads; index 0 of ``location`` is unused.
    """

    def __init__(self, threads: int, width: Optional[int] = None) -> None:
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self.width = width if width is not None else threads
        if self.width < 1:
            raise ValueError("collision width must be >= 1")
        self.location = AtomicArray(threads + 1, None)
        self.collision = AtomicArray(self.width, EMPTY_SLOT)


@dataclass(frozen=True)
class AlgoMetrics:
    central_ops: int = 0
    elim_ops: int = 0
    comb_ops: int = 0

    @property
    def total(self) -> int:
        return self.central_ops + self.elim_ops + self.comb_ops

    def __add__(self, other: "AlgoMetrics") -> "AlgoMetrics":
        return AlgoMetrics(
            self.central_ops + other.central_ops,
            self.elim_ops + other.elim_ops,
            self.comb_ops + other.comb_ops,
        )


class ThreadState:
    __slots__ = ("id", "rng", "central", "elim", "comb", "waited", "timeouts")

    def __init__(self, tid: int, seed: int) -> None:
        self.id = tid
        self.rng = random.Random(f"{seed}:{tid}")
        self.central = 0
        self.elim = 0
        self.comb = 0
        self.waited = False
        self.timeouts = 0


StallHook = Callable[[str, int], None]


class StackBase:
    """Common surface: ``push``, ``pop``, ``metrics`` and per-thread ids.

    A thread gets the next free id the first time it touches the stack;
    ``max_threads`` bounds how many distinct threads may do so.
    """

    name = "base"

    def __init__(self, max_threads: int = 16, seed: int = 0, interleave: bool = False) -> None:
        if max_threads < 1:
            raise ValueError("max_threads must be >= 1")
        self.max_threads = max_threads
        self.seed = seed
        self.interleave = interleave
        if interleave:
            self.turnstile: Optional[Turnstile] = Turnstile(seed=seed)
            self._yield = self.turnstile.switch
            self.head: VersionedRef[Cell] = InterleavedRef(switch=self._yield)
        else:
            self.turnstile = None
            self._yield = yield_cpu
            self.head = VersionedRef()
        self._states: List[Optional[ThreadState]] = [None] * (max_threads + 1)
        self._next_id = 0
        self._reg_lock = threading.Lock()
        self._local = threading.local()
        self.stall_hook: Optional[StallHook] = None

    def register(self, tid: Optional[int] = None) -> int:
        """Bind the calling thread to an id (the next free one by default)."""
        with self._reg_lock:
            if tid is None:
                self._next_id += 1
                tid = self._next_id
            if not 1 <= tid <= self.max_threads:
                raise RuntimeError(f"thread id {tid} outside 1..{self.max_threads}")
            if self._states[tid] is not None:
                raise RuntimeError(f"thread id {tid} already registered")
            self._next_id = max(self._next_id, tid)
            st = ThreadState(tid, self.seed)
            self._states[tid] = st
        self._local.state = st
        if self.turnstile is not None:
            self.turnstile.join()
        return tid

    def retire(self) -> None:
        """Tell the stack the calling thread will issue no more operations.

        Only matters with ``interleave``: the thread leaves the baton ring.
        """
        if self.turnstile is not None:
            self.turnstile.leave()

    def _state(self) -> ThreadState:
        try:
            return self._local.state
        except AttributeError:
            self.register()
            return self._local.state

    def thread_id(self) -> int:
        return self._state().id

    def metrics(self) -> AlgoMetrics:
        m = AlgoMetrics()
        for st in self._states:
            if st is not None:
                m = m + AlgoMetrics(st.central, st.elim, st.comb)
        return m

    def await_timeouts(self) -> int:
        return sum(st.timeouts for st in self._states if st is not None)

    def load(self, values) -> None:
        """Place ``values`` on the stack without going through the algorithm.

        The last value ends on top. Meant for prepopulating before threads start.
        """
        old, ver = self.head.get()
        top = old
        for v in values:
            top = Cell(v, top)
        if not self.head.compare_and_set(old, ver, top):
            raise RuntimeError("stack modified during load")

    def snapshot(self) -> list:
        """Values currently reachable from the head, top first (quiescent use only)."""
        out = []
        cur = self.head.ref
        while cur is not None:
            if not cur.invalid:
                out.append(cur.data)
            cur = cur.next
        return out

    def _stall(self, point: str, tid: int) -> None:
        hook = self.stall_hook
        if hook is not None:
            hook(point, tid)

    def push(self, data: Any) -> None:
        raise NotImplementedError

    def pop(self) -> Any:
        raise NotImplementedError
