"""Reference stacks: Treiber with exponential backoff, and the HSY elimination-backoff stack."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .atomic import pause
from .core import EMPTY, Cell, StackBase
from .elimination import DECSStack


@dataclass(frozen=True)
class BackoffPolicy:
    initial_spins: int = 32
    multiplier: float = 2.0
    max_spins: int = 8192

    def __post_init__(self):
        if self.initial_spins < 1:
            raise ValueError("initial_spins must be >= 1")
        if self.multiplier <= 1:
            raise ValueError("multiplier must be > 1")
        if self.max_spins < self.initial_spins:
            raise ValueError("max_spins must be >= initial_spins")

    def spins(self, failures: int) -> int:
        """Spin budget after ``failures`` consecutive failed swaps (0 = first failure)."""
        return int(min(self.initial_spins * self.multiplier ** failures, self.max_spins))


class TreiberStack(StackBase):
    """Single-cell head swaps; back off exponentially on contention."""

    name = "treiber"

    def __init__(self, max_threads: int = 16, *, backoff: BackoffPolicy = BackoffPolicy(), seed: int = 0, interleave: bool = False
    ) -> None:
        super().__init__(max_threads, seed, interleave)
        self.backoff = backoff
        # one baton pass per 32 spins keeps backoff time comparable when interleaving
        self._backoff_every = 32

    def _backoff(self, failures: int) -> None:
        pause(self.backoff.spins(failures), self._backoff_every, self._yield)

    def push(self, data: Any) -> None:
        st = self._state()
        cell = Cell(data)
        head = self.head
        failures = 0
        while True:
            top, ver = head.get()
            cell.next = top
            if head.compare_and_set(top, ver, cell):
                st.central += 1
                return
            self._backoff(failures)
            failures += 1

    def pop(self) -> Any:
        st = self._state()
        head = self.head
        failures = 0
        while True:
            top, ver = head.get()
            if top is None:
                st.central += 1
                return EMPTY
            if head.compare_and_set(top, ver, top.next):
                st.central += 1
                return top.data
            self._backoff(failures)
            failures += 1


class HSYStack(DECSStack):
    """Elimination-backoff stack: the DECS layer with combining switched off.

    Every multi-op stays a singleton, and a collision between two operations
    of the same kind is never attempted; both go back to the central stack.
    """

    name = "hsy"
    combining = False
