import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcsmr import AtomicStrongRef, AtomicWeakRef, Managed, MemorySafetyError, ProperExecutionError, WeakRef
from rcsmr.structures import make_domain
from rcsmr.verification.audit import audit_rc

SCHEMES = ("rc-ebr", "rc-ibr", "rc-hp")


class Node(Managed):
    __slots__ = ("val", "next", "back")
    _strong_cells = ("next",)
    _weak_cells = ("back",)

    def __init__(self, d, val=0):
        self.canary = 0
        self.val = val
        self.next = AtomicStrongRef(d)
        self.back = AtomicWeakRef(d)


def counts(d, ref):
    return d.strong_count(ref.handle), d.weak_count(ref.handle)


@pytest.fixture(params=SCHEMES)
def dom(request):
    d = make_domain(request.param, max_threads=4, debug=True, **({"slots": 2} if request.param == "rc-hp" else {}))
    with d.thread():
        yield d
        d.collect()
        assert d.ledger.live == 0


def test_strong_lifecycle(dom):
    a = dom.make_shared(Node(dom, 1))
    assert counts(dom, a) == (1, 1)
    b = a.copy()
    assert counts(dom, a) == (2, 1)
    b.release()
    cell = dom.atomic_shared(a)
    a.release()
    with dom.critical_section():
        c = cell.load()
    assert c.get().val == 1
    c.release()
    cell.store(None)
    dom.collect()
    assert dom.ledger.live == 0


def test_weak_upgrade_after_expiry(dom):
    a = dom.make_shared(Node(dom, 7))
    w = WeakRef.from_ref(a)
    assert counts(dom, a) == (1, 2)
    up = w.upgrade()
    assert up and up.get().val == 7
    up.release()
    a.release()
    dom.collect()
    assert w.expired()
    assert not w.upgrade()
    assert dom.ledger.live == 1  # block held by the weak ref
    w.release()


def test_weak_back_pointer_cycle_is_freed(dom):
    a = dom.make_shared(Node(dom, 1))
    b = dom.make_shared(Node(dom, 2))
    with dom.critical_section():
        a.get().next.store(b)
        b.get().back.store(a)
    b.release()
    a.release()
    dom.collect()
    assert dom.ledger.live == 0


def test_snapshot_outlives_overwrite(dom):
    a = dom.make_shared(Node(dom, 1))
    cell = dom.atomic_shared(a)
    a.release()
    dom.begin_critical_section()
    snap = cell.get_snapshot()
    cell.store(None)
    dom.collect()
    assert snap.get().val == 1  # still protected
    snap.release()
    dom.end_critical_section()
    dom.collect()
    assert dom.ledger.live == 0


def test_snapshot_released_twice(dom):
    cell = dom.atomic_shared(None)
    with dom.critical_section():
        s = cell.get_snapshot()
        assert not s
        s.release()
        with pytest.raises(ProperExecutionError):
            s.release()


def test_fast_path_has_no_count_traffic():
    d = make_domain("rc-ebr", max_threads=2)
    with d.thread():
        a = d.make_shared(Node(d))
        cell = d.atomic_shared(a)
        a.release()
        before = d.strong_updates()
        with d.critical_section():
            for _ in range(10):
                s = cell.get_snapshot()
                assert s.guard is not None
                s.release()
        assert d.strong_updates() == before
        assert d.slow_snapshots() == 0
        cell.store(None)
        d.collect()


def test_slow_path_when_slots_run_out():
    d = make_domain("rc-hp", max_threads=2, slots=2)
    with d.thread():
        a = d.make_shared(Node(d))
        cell = d.atomic_shared(a)
        snaps = [cell.get_snapshot() for _ in range(3)]
        assert [s.guard is None for s in snaps] == [False, False, True]
        assert d.slow_snapshots() == 1
        assert d.strong_count(a.handle) == 3  # the owner, the cell, the slow snapshot
        for s in snaps:
            s.release()
        a.release()
        cell.store(None)
        d.collect()
        assert d.ledger.live == 0


def test_weak_snapshot(dom):
    a = dom.make_shared(Node(dom, 3))
    wc = dom.atomic_weak(a)
    dom.begin_critical_section()
    s = wc.get_snapshot()
    assert s.get().val == 3
    a.release()  # expires now, payload kept by the snapshot
    assert s.get().val == 3
    s.release()
    dom.end_critical_section()
    dom.collect()
    with dom.critical_section():
        s = wc.get_snapshot()
        assert not s  # expired and unchanged
        s.release()
    wc.store(None)


def test_poisoned_read_is_detected(dom):
    a = dom.make_shared(Node(dom, 1))
    h = a.handle
    a.release()
    dom.collect()
    before = dom.ledger.poison_reads
    with pytest.raises(MemorySafetyError):
        dom.heap.deref(h)
    assert dom.ledger.poison_reads == before + 1


def test_compare_and_swap(dom):
    a = dom.make_shared(Node(dom, 1))
    b = dom.make_shared(Node(dom, 2))
    cell = dom.atomic_shared(a)
    with dom.critical_section():
        assert not cell.compare_and_swap(b, b)
        assert cell.compare_and_swap(a, b)
        s = cell.get_snapshot()
        assert s.get().val == 2
        s.release()
    assert dom.strong_count(b.handle) == 2
    cell.store(None)
    a.release()
    b.release()


class _Roots:
    def __init__(self, cells, refs):
        self.cells, self.refs = cells, refs

    def roots(self):
        return self.cells

    def owned(self):
        return [r.handle for r in self.refs if r]


ref_ops = st.lists(
    st.tuples(st.sampled_from(["make", "copy", "drop", "store", "weak", "load", "link", "back", "clear"]), st.integers(0, 7), st.integers(0, 3)),
    max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(SCHEMES), ref_ops)
def test_random_ref_programs_audit_and_drain(scheme, ops):
    """Arbitrary owner/cell/link histories keep the count rule and drain to zero."""
    d = make_domain(scheme, max_threads=2, debug=True)
    with d.thread():
        refs, serial = [], itertools.count()
        cells = [d.atomic_shared() for _ in range(2)] + [d.atomic_weak() for _ in range(2)]
        roots = _Roots(cells, refs)
        for op, i, c in ops:
            r = refs[i % len(refs)] if refs else None
            with d.critical_section():
                if op == "make" or r is None:
                    refs.append(d.make_shared(Node(d, next(serial))))
                elif op == "copy":
                    refs.append(r.copy())
                elif op == "drop":
                    r.release()
                    refs.remove(r)
                elif op == "store":
                    cells[c].store(r)
                elif op == "weak":
                    cells[2 + c % 2].store(r)
                elif op == "load":
                    got = cells[c].load()
                    if isinstance(got, WeakRef):
                        w, got = got, got.upgrade()
                        w.release()
                    if got:
                        refs.append(got)
                elif op == "link":
                    # strong edges only point to older objects, so no strong cycles
                    t = refs[c % len(refs)]
                    if t.get().val < r.get().val:
                        r.get().next.store(t)
                elif op == "back":
                    r.get().back.store(r)
                else:
                    cells[c].store(None)
        rep = audit_rc(roots, d)
        assert rep.ok, rep.violations[:3]
        for r in refs:
            r.release()
        for c in cells:
            c.store(None)
        d.collect()
        assert d.ledger.live == 0
