import itertools
import math

import pytest

from decs import DECSStack, HSYStack, OpKind, Status, init_multi_op
from decs.core import EMPTY_SLOT
from decs.elimination import combine, multi_eliminate


def make_list(kind, n, tid0, value0=0):
    mops = []
    for i in range(n):
        if kind == OpKind.PUSH:
            mops.append(init_multi_op(tid0 + i, kind, value0 + i))
        else:
            mops.append(init_multi_op(tid0 + i, kind))
    for m in mops[1:]:
        combine(mops[0], m)
    return mops


def test_combine_push_lists_chain_cells_and_records():
    a = make_list(OpKind.PUSH, 2, 1, 10)
    p = make_list(OpKind.PUSH, 3, 3, 20)
    combine(a[0], p[0])
    head = a[0]
    assert head.length == 5 and head.last is p[-1]
    assert [m.cell.data for m in head.records()] == [10, 11, 20, 21, 22]
    cells, cur = [], head.cell
    for _ in range(5):
        cells.append(cur.data)
        cur = cur.next
    assert cells == [10, 11, 20, 21, 22]


def test_combine_pop_lists_only_links_records():
    a = make_list(OpKind.POP, 1, 1)
    p = make_list(OpKind.POP, 2, 2)
    combine(a[0], p[0])
    assert a[0].length == 3 and a[0].last is p[-1]
    assert a[0].records() == a + p


@pytest.mark.parametrize(
    "la,lp,a_kind",
    [(la, lp, k) for la, lp in itertools.product(range(1, 5), repeat=2) for k in (OpKind.PUSH, OpKind.POP)],
)
def test_multi_eliminate_matrix(la, lp, a_kind):
    p_kind = OpKind.POP if a_kind == OpKind.PUSH else OpKind.PUSH
    a = make_list(a_kind, la, 1, 100)
    p = make_list(p_kind, lp, 10, 200)
    push_side = a if a_kind == OpKind.PUSH else p
    pop_side = p if a_kind == OpKind.PUSH else a
    pushed = [m.cell for m in push_side]
    multi_eliminate(a[0], p[0])
    m = min(la, lp)
    for i in range(m):
        assert pop_side[i].cell is pushed[i]
    statuses = [x.status for x in a + p]
    assert statuses.count(Status.FINISHED) == 2 * m
    longer = a if la > lp else p
    if la == lp:
        assert Status.RETRY not in statuses
        return
    residue = longer[m]
    assert residue.status == Status.RETRY
    assert residue.length == abs(la - lp)
    assert residue.last is longer[-1]
    assert residue.records() == longer[m:]
    assert statuses.count(Status.INIT) == abs(la - lp) - 1


def test_random_index_is_uniform():
    width = 64
    stack = DECSStack(1, collision_width=width, seed=7)
    tid = stack.thread_id()
    draws = 10 ** 6
    counts = [0] * width
    for _ in range(draws):
        counts[stack.random_index(tid)] += 1
    expected = draws / width
    sigma = math.sqrt(draws * (1 / width) * (1 - 1 / width))
    assert all(abs(c - expected) <= 5 * sigma for c in counts)
    chi2 = sum((c - expected) ** 2 / expected for c in counts)
    # 63 degrees of freedom; 110 is far beyond the 0.999 quantile (~103)
    assert chi2 < 110


def setup_passive(stack, kind, tid=2, value=7, index=0):
    """Place a registered partner in the layer as if its thread were waiting."""
    p = init_multi_op(tid, kind, value) if kind == OpKind.PUSH else init_multi_op(tid, kind)
    stack.register_op(p)
    stack.layer.collision.set(index, tid)
    return p


def test_active_collision_with_reverse_kind_eliminates():
    stack = DECSStack(2, collision_width=1)
    stack.register(1)
    p = setup_passive(stack, OpKind.PUSH, value="v")
    a = init_multi_op(1, OpKind.POP)
    assert stack.collide(a)
    assert a.cell is p.cell and a.cell.data == "v"
    assert p.status == Status.FINISHED
    # the active side left its own id in the slot and took the partner's location
    assert stack.layer.collision.get(0) == 1
    assert stack.layer.location.get(2) is a
    assert stack.layer.location.get(1) is None


def test_active_collision_with_same_kind_combines_and_returns_to_central():
    stack = DECSStack(2, collision_width=1)
    stack.register(1)
    p = setup_passive(stack, OpKind.POP)
    a = init_multi_op(1, OpKind.POP)
    assert not stack.collide(a)
    assert a.length == 2 and a.next is p and p.status == Status.INIT


def test_hsy_does_not_collide_same_kind():
    stack = HSYStack(2, collision_width=1, wait_spins=1)
    stack.register(1)
    p = setup_passive(stack, OpKind.POP)
    a = init_multi_op(1, OpKind.POP)
    assert not stack.collide(a)
    assert a.length == 1 and a.next is None
    assert stack.layer.location.get(2) is p


def test_empty_slot_means_no_partner():
    stack = DECSStack(2, collision_width=1, wait_spins=2)
    stack.register(1)
    a = init_multi_op(1, OpKind.PUSH, 1)
    assert stack.rendezvous_swap(0, 1) == EMPTY_SLOT
    assert not stack.collide(a)
    assert stack.layer.location.get(1) is None


def test_passive_side_of_an_elimination_takes_the_cell():
    stack = DECSStack(2, collision_width=1)
    stack.register(1)
    p = init_multi_op(1, OpKind.POP)
    a = init_multi_op(2, OpKind.PUSH, "x")
    stack.layer.location.set(1, a)
    assert stack.passive_collide(p)
    assert p.cell is a.cell
    assert stack.layer.location.get(1) is None


def test_passive_waiter_released_by_finished_and_counted_as_combined():
    stack = DECSStack(2, collision_width=1)
    stack.register(1)
    p = init_multi_op(1, OpKind.POP)
    a = init_multi_op(2, OpKind.POP)
    stack.layer.location.set(1, a)
    stack.yield_after = 1

    def finish():
        p.cell = a.cell
        p.status = Status.FINISHED

    stack._yield = finish
    assert stack.passive_collide(p)
    assert stack._states[1].waited


def test_passive_waiter_told_to_retry_resets_status():
    stack = DECSStack(2, collision_width=1)
    stack.register(1)
    p = init_multi_op(1, OpKind.POP)
    a = init_multi_op(2, OpKind.POP)
    stack.layer.location.set(1, a)
    stack.yield_after = 1

    def retry():
        p.status = Status.RETRY

    stack._yield = retry
    assert not stack.passive_collide(p)
    assert p.status == Status.INIT and not stack._states[1].waited


def test_stall_hook_fires_after_combine():
    stack = DECSStack(2, collision_width=1)
    stack.register(1)
    seen = []
    stack.stall_hook = lambda point, tid: seen.append((point, tid))
    setup_passive(stack, OpKind.PUSH, value=1)
    a = init_multi_op(1, OpKind.PUSH, 2)
    stack.collide(a)
    assert ("after_combine", 1) in seen
