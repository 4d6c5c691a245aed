"""Operation histories and the checkers that judge them.

A ``RecordingStack`` wraps any stack and logs an INVOKE and a RESPOND event
per operation, ordered by one global ticket counter. ``check_pool`` accepts
the relaxed pool semantics and scales to long stress histories;
``check_linearizable`` searches exhaustively for a legal LIFO order and is
meant for histories of a dozen operations.
"""
from __future__ import annotations

import bisect
import csv
import enum
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .atomic import AtomicCounter
from .core import EMPTY, OpKind

PUSH = OpKind.PUSH
POP = OpKind.POP

OK = "ok"
"""Result the sequential oracle reports for a push."""


class HistoryError(ValueError):
    """The history is malformed or outside what a checker accepts."""


class Phase(enum.Enum):
    INVOKE = "INVOKE"
    RESPOND = "RESPOND"


INVOKE = Phase.INVOKE
RESPOND = Phase.RESPOND


@dataclass(frozen=True, slots=True)
class Event:
    seq: int
    thread: int
    phase: Phase
    kind: OpKind
    value: Any = None


@dataclass(frozen=True, slots=True)
class Operation:
    """An INVOKE/RESPOND pair; ``value`` is the pushed item or the popped result."""

    thread: int
    kind: OpKind
    value: Any
    invoke: int
    respond: int


@dataclass
class Verdict:
    ok: bool
    requirement: Optional[int] = None
    message: str = "PASS"
    witness: Any = None

    def __bool__(self) -> bool:
        return self.ok


PASS = Verdict(True)


@dataclass
class History:
    events: List[Event] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def validate(self) -> None:
        """Raise HistoryError unless sequence numbers increase and every thread alternates phases."""
        last_seq = None
        pending: Dict[int, Event] = {}
        for ev in self.events:
            if last_seq is not None and ev.seq <= last_seq:
                raise HistoryError(f"seq {ev.seq} does not increase (previous {last_seq})")
            last_seq = ev.seq
            open_ev = pending.get(ev.thread)
            if ev.phase is INVOKE:
                if open_ev is not None:
                    raise HistoryError(f"thread {ev.thread} invokes at seq {ev.seq} with seq {open_ev.seq} still open")
                pending[ev.thread] = ev
            else:
                if open_ev is None:
                    raise HistoryError(f"thread {ev.thread} responds at seq {ev.seq} without an invoke")
                if open_ev.kind != ev.kind:
                    raise HistoryError(f"thread {ev.thread} responds {ev.kind.name} to a {open_ev.kind.name} at seq {ev.seq}")
                del pending[ev.thread]

    def operations(self, require_complete: bool = True) -> List[Operation]:
        """Pair events into operations, in invoke order."""
        self.validate()
        pending: Dict[int, Event] = {}
        ops: List[Tuple[int, Operation]] = []
        for ev in self.events:
            if ev.phase is INVOKE:
                pending[ev.thread] = ev
                continue
            inv = pending.pop(ev.thread)
            value = inv.value if ev.kind == PUSH else ev.value
            ops.append((inv.seq, Operation(ev.thread, ev.kind, value, inv.seq, ev.seq)))
        if pending and require_complete:
            t, ev = next(iter(pending.items()))
            raise HistoryError(f"thread {t} has an operation without a response (seq {ev.seq})")
        ops.sort(key=lambda x: x[0])
        return [op for _, op in ops]

    @classmethod
    def from_operations(cls, ops: Iterable[Tuple[int, OpKind, Any, int, int]]) -> "History":
        """Build a history from ``(thread, kind, value, invoke_seq, respond_seq)`` tuples."""
        events = []
        for thread, kind, value, inv, resp in ops:
            events.append(Event(inv, thread, INVOKE, kind, value if kind == PUSH else None))
            events.append(Event(resp, thread, RESPOND, kind, value if kind == POP else None))
        events.sort(key=lambda e: e.seq)
        return cls(events)


class RecordingStack:
    """Wraps a stack and records every push and pop.

    The ticket is taken right before the call and right after it returns, so
    the recorded intervals contain the real ones. Each thread appends to its
    own buffer; ``history`` merges them and must only run at quiescence.
    """

    def __init__(self, stack) -> None:
        self.stack = stack
        self._ticket = AtomicCounter()
        self._local = threading.local()
        self._buffers: List[List[Event]] = []
        self._lock = threading.Lock()

    def _buffer(self) -> List[Event]:
        try:
            return self._local.buf
        except AttributeError:
            buf: List[Event] = []
            with self._lock:
                self._buffers.append(buf)
            self._local.buf = buf
            return buf

    def push(self, value: Any) -> None:
        buf = self._buffer()
        tid = self.stack.thread_id()
        buf.append(Event(self._ticket.next(), tid, INVOKE, PUSH, value))
        self.stack.push(value)
        buf.append(Event(self._ticket.next(), tid, RESPOND, PUSH))

    def pop(self) -> Any:
        buf = self._buffer()
        tid = self.stack.thread_id()
        buf.append(Event(self._ticket.next(), tid, INVOKE, POP))
        value = self.stack.pop()
        buf.append(Event(self._ticket.next(), tid, RESPOND, POP, value))
        return value

    def __getattr__(self, name):
        return getattr(self.stack, name)

    def history(self) -> History:
        with self._lock:
            events = [ev for buf in self._buffers for ev in buf]
        events.sort(key=lambda e: e.seq)
        return History(events)


# -- pool semantics -----------------------------------------------------------


def check_pool(h: History, initial: Sequence[Any] = ()) -> Verdict:
    """Check the three pool requirements; return the first violation found.

    1. A pop that returned EMPTY although more items were certainly present
       than pops could have taken. Counted soundly: pushes that completed
       before the pop was invoked (plus ``initial``) against non-empty pops
       invoked before it responded.
    2. A popped item that was never pushed, or whose push was invoked only
       after the pop responded.
    3. An item popped more than once.

    Pushed values (and ``initial``) must be distinct.
    """
    ops = h.operations()
    pushed: Dict[Any, Optional[Operation]] = {}
    for v in initial:
        if v in pushed:
            raise HistoryError(f"initial value {v!r} is not unique")
        pushed[v] = None
    pushes = [op for op in ops if op.kind == PUSH]
    pops = [op for op in ops if op.kind == POP]
    for op in pushes:
        if op.value in pushed or op.value is EMPTY:
            raise HistoryError(f"pushed value {op.value!r} is not unique; pool checking needs distinct items")
        pushed[op.value] = op

    taken: Dict[Any, Operation] = {}
    for op in sorted(pops, key=lambda o: o.respond):
        if op.value is EMPTY:
            continue
        if op.value not in pushed:
            return Verdict(False, 2, f"pop by thread {op.thread} at seq {op.respond} returned {op.value!r}, which was never pushed", op)
        src = pushed[op.value]
        if src is not None and src.invoke > op.respond:
            return Verdict(False, 2, f"pop at seq {op.respond} returned {op.value!r} before its push was invoked at seq {src.invoke}", op)
        if op.value in taken:
            first = taken[op.value]
            return Verdict(False, 3, f"{op.value!r} popped twice (seq {first.respond} and {op.respond})", (first, op))
        taken[op.value] = op

    push_done = sorted(op.respond for op in pushes)
    full_pop_starts = sorted(op.invoke for op in pops if op.value is not EMPTY)
    base = len(initial)
    for op in pops:
        if op.value is not EMPTY:
            continue
        present = base + bisect.bisect_left(push_done, op.invoke)
        could_take = bisect.bisect_left(full_pop_starts, op.respond)
        if present > could_take:
            return Verdict(
                False,
                1,
                f"pop by thread {op.thread} at seq {op.respond} returned EMPTY while at least "
                f"{present - could_take} item(s) remained",
                op,
            )
    return PASS


# -- linearizability ----------------------------------------------------------

DEFAULT_BOUND = 12


def check_linearizable(h: History, initial: Sequence[Any] = (), bound: int = DEFAULT_BOUND) -> Verdict:
    """Search for a sequential LIFO order consistent with real-time order.

    ``initial`` lists the stack contents top first. Histories longer than
    ``bound`` operations are refused. On success ``witness`` holds the order.
    """
    ops = h.operations()
    n = len(ops)
    if n > bound:
        raise HistoryError(f"history has {n} operations; the exhaustive check is limited to {bound}")
    # op i may go next only once every op that responded before i was invoked is placed
    must_precede = [0] * n
    for i, a in enumerate(ops):
        for j, b in enumerate(ops):
            if b.respond < a.invoke:
                must_precede[i] |= 1 << j
    full = (1 << n) - 1
    seen = set()
    order: List[int] = []

    def dfs(done: int, stack: Tuple[Any, ...]) -> bool:
        if done == full:
            return True
        key = (done, stack)
        if key in seen:
            return False
        seen.add(key)
        for i in range(n):
            bit = 1 << i
            if done & bit or must_precede[i] & ~done:
                continue
            op = ops[i]
            if op.kind == PUSH:
                nxt = (op.value,) + stack
            elif stack:
                if op.value is EMPTY or op.value != stack[0]:
                    continue
                nxt = stack[1:]
            else:
                if op.value is not EMPTY:
                    continue
                nxt = stack
            order.append(i)
            if dfs(done | bit, nxt):
                return True
            order.pop()
        return False

    if dfs(0, tuple(initial)):
        return Verdict(True, witness=[ops[i] for i in order])
    return Verdict(False, None, "no legal sequential stack order respects real-time order", ops)


def sequential_oracle(ops: Iterable[Tuple], initial: Sequence[Any] = ()) -> Tuple[List[Any], List[Any]]:
    """Run ``ops`` on a plain sequential stack.

    Each op is ``(PUSH, value)`` or ``(POP,)``. Stacks are listed top first.
    Returns the per-op results (``OK`` for pushes) and the final stack.
    """
    stack = list(initial)
    results: List[Any] = []
    for op in ops:
        kind = op[0]
        if kind == PUSH:
            stack.insert(0, op[1])
            results.append(OK)
        elif kind == POP:
            results.append(stack.pop(0) if stack else EMPTY)
        else:
            raise ValueError(f"unknown operation {op!r}")
    return results, stack


# -- history files ------------------------------------------------------------


def _format_value(ev: Event) -> str:
    if ev.kind == PUSH and ev.phase is INVOKE:
        return str(ev.value)
    if ev.kind == POP and ev.phase is RESPOND:
        return "EMPTY" if ev.value is EMPTY else str(ev.value)
    return ""


def _parse_value(text: str) -> Any:
    if text == "EMPTY":
        return EMPTY
    try:
        return int(text)
    except ValueError:
        return text


def write_history(h: History, path) -> None:
    """One event per line: ``seq,thread,phase,kind,value``."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for ev in h.events:
            w.writerow([ev.seq, ev.thread, ev.phase.value, ev.kind.name, _format_value(ev)])


def read_history(path) -> History:
    """Parse a history file; integer-looking values come back as ints."""
    events = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), 1):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != 5:
                raise HistoryError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            seq, thread, phase, kind, value = row
            try:
                ev_phase = Phase(phase)
                ev_kind = OpKind[kind]
                ev = Event(int(seq), int(thread), ev_phase, ev_kind)
            except (ValueError, KeyError) as exc:
                raise HistoryError(f"{path}:{lineno}: {exc}") from None
            carries = (ev_kind == PUSH and ev_phase is INVOKE) or (ev_kind == POP and ev_phase is RESPOND)
            if carries:
                if value == "":
                    raise HistoryError(f"{path}:{lineno}: missing value")
                ev = Event(ev.seq, ev.thread, ev_phase, ev_kind, _parse_value(value))
            elif value != "":
                raise HistoryError(f"{path}:{lineno}: unexpected value {value!r}")
            events.append(ev)
    h = History(events)
    h.validate()
    return h
