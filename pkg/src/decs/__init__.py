"""Concurrent stacks built on elimination and software combining.

``DECSStack`` and ``NBDECSStack`` are the dynamic elimination-combining
stacks; ``TreiberStack`` and ``HSYStack`` are the baselines.
"""
from .baselines import BackoffPolicy, HSYStack, TreiberStack
from .core import (
    EMPTY,
    EMPTY_CELL,
    AlgoMetrics,
    Cell,
    MultiOp,
    OpKind,
    Status,
    init_multi_op,
    sentinel_empty_cell,
)
from .elimination import DECSStack
from .nonblocking import NBDECSStack

ALGORITHMS = {
    "treiber": TreiberStack,
    "hsy": HSYStack,
    "decs": DECSStack,
    "nb-decs": NBDECSStack,
}


def make_stack(algo: str, max_threads: int = 16, **knobs):
    """Build a stack by name, passing along only the knobs it understands."""
    try:
        cls = ALGORITHMS[algo]
    except KeyError:
        raise ValueError(f"unknown algorithm {algo!r}; expected one of {sorted(ALGORITHMS)}") from None
    allowed = {"seed", "interleave"}
    if cls is TreiberStack:
        allowed |= {"backoff"}
    else:
        allowed |= {"collision_width", "wait_spins", "yield_after"}
    if cls is NBDECSStack:
        allowed |= {"bounded_await_spins"}
    return cls(max_threads, **{k: v for k, v in knobs.items() if k in allowed and v is not None})


__all__ = [
    "ALGORITHMS",
    "AlgoMetrics",
    "BackoffPolicy",
    "Cell",
    "DECSStack",
    "EMPTY",
    "EMPTY_CELL",
    "HSYStack",
    "MultiOp",
    "NBDECSStack",
    "OpKind",
    "Status",
    "TreiberStack",
    "init_multi_op",
    "make_stack",
    "sentinel_empty_cell",
]
