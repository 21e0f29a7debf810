import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcsmr import ConfigError
from rcsmr.structures import (
    MAX_KEY,
    SCHEMES,
    SequentialMap,
    SequentialQueue,
    bucket_of,
    make_domain,
    make_structure,
)
from rcsmr.verification.audit import audit

MAPS = ("list", "hash", "bst")


def _build(scheme):
    return make_domain(scheme, max_threads=3, debug=True)


map_ops = st.lists(
    st.tuples(st.sampled_from(["ins", "rem", "get", "rq"]), st.integers(0, 40), st.integers(1, 12)),
    max_size=80,
)


@settings(max_examples=25, deadline=None)
@given(ops=map_ops)
@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("structure", MAPS)
def test_map_matches_oracle(structure, scheme, ops):
    d = _build(scheme)
    with d.thread():
        s = make_structure(structure, d, buckets=4)
        o = SequentialMap()
        for op, k, n in ops:
            if op == "ins":
                assert s.insert(k, k * 1000 + n) == o.insert(k, k * 1000 + n)
            elif op == "rem":
                assert s.remove(k) == o.remove(k)
            elif op == "get":
                assert s.lookup(k) == o.lookup(k)
            elif structure != "hash":
                assert s.range_query(k, n) == o.range_query(k, n)
        assert s.items() == o.items()
        assert audit(s, d).ok
        s.destroy()
        d.collect()
        assert d.ledger.live == 0


@settings(max_examples=25, deadline=None)
@given(ops=st.lists(st.one_of(st.integers(0, 2**64 - 1), st.none()), max_size=80))
@pytest.mark.parametrize("scheme", SCHEMES)
def test_queue_matches_oracle(scheme, ops):
    d = _build(scheme)
    with d.thread():
        q = make_structure("dlqueue", d)
        o = SequentialQueue()
        for v in ops:
            if v is None:
                assert q.dequeue() == o.dequeue()
            else:
                q.enqueue(v)
                o.enqueue(v)
        assert q.items() == o.items()
        assert audit(q, d).ok
        q.destroy()
        d.collect()
        assert d.ledger.live == 0


def test_sequential_oracles():
    m = SequentialMap([(5, 50), (1, 10), (9, 90)])
    assert m.range_query(2, 10) == [50, 90]
    assert m.range_query(0, 2) == [10]
    assert not m.insert(5, 0) and m.lookup(5) == 50
    q = SequentialQueue([1, 2])
    assert q.dequeue() == 1 and q.dequeue() == 2 and q.dequeue() is None


@pytest.mark.parametrize("scheme", SCHEMES)
def test_hash_has_no_range_query(scheme):
    d = _build(scheme)
    with d.thread():
        s = make_structure("hash", d, buckets=8)
        with pytest.raises(NotImplementedError):
            s.range_query(0, 4)
        s.destroy()


@pytest.mark.parametrize("scheme", SCHEMES)
def test_bst_key_bounds(scheme):
    d = _build(scheme)
    with d.thread():
        s = make_structure("bst", d)
        assert s.insert(MAX_KEY, 1)
        with pytest.raises(ValueError):
            s.insert(MAX_KEY + 1, 1)
        with pytest.raises(ValueError):
            s.lookup(-1)
        s.destroy()
        d.collect()


def test_unknown_structure():
    d = make_domain("ebr")
    with d.thread(), pytest.raises(ConfigError):
        make_structure("skiplist", d)


def test_bucket_spread():
    counts = [0] * 16
    for k in range(16_000):
        counts[bucket_of(k, 16)] += 1
    assert min(counts) > 800


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("structure", MAPS)
def test_concurrent_disjoint_updates(structure, scheme):
    """Four threads on disjoint key sets end in the union of their sequential results."""
    d = make_domain(scheme, max_threads=5, debug=True)
    with d.thread():
        s = make_structure(structure, d, buckets=16)
    errors = []

    def worker(t):
        try:
            with d.thread():
                keys = range(t, 400, 4)
                for k in keys:
                    assert s.insert(k, k)
                for k in keys:
                    if k % 3 == 0:
                        assert s.remove(k)
                for k in keys:
                    assert s.lookup(k) == (None if k % 3 == 0 else k)
        except BaseException as e:  # noqa: BLE001
            errors.append(e)

    ts = [threading.Thread(target=worker, args=(t,)) for t in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert not errors, errors[0]
    with d.thread():
        assert s.keys() == [k for k in range(400) if k % 3]
        assert audit(s, d).ok
        s.destroy()
        d.collect()
    assert d.ledger.live == 0
    assert d.ledger.poison_reads == 0


@pytest.mark.parametrize("scheme", SCHEMES)
def test_queue_concurrent_fifo(scheme):
    """Each producer's values come out in the order it enqueued them."""
    d = make_domain(scheme, max_threads=6, debug=True)
    with d.thread():
        q = make_structure("dlqueue", d)
    out = [[] for _ in range(2)]
    done = threading.Event()
    errors = []

    def producer(p):
        try:
            with d.thread():
                for i in range(300):
                    q.enqueue(p << 32 | i)
        except BaseException as e:  # noqa: BLE001
            errors.append(e)

    def consumer(c):
        try:
            with d.thread():
                while True:
                    v = q.dequeue()
                    if v is None:
                        if done.is_set():
                            v = q.dequeue()
                            if v is None:
                                return
                        else:
                            continue
                    out[c].append(v)
        except BaseException as e:  # noqa: BLE001
            errors.append(e)

    ps = [threading.Thread(target=producer, args=(p,)) for p in range(2)]
    cs = [threading.Thread(target=consumer, args=(c,)) for c in range(2)]
    for t in ps + cs:
        t.start()
    for t in ps:
        t.join()
    done.set()
    for t in cs:
        t.join()
    assert not errors, errors[0]
    got = out[0] + out[1]
    assert sorted(got) == sorted(p << 32 | i for p in range(2) for i in range(300))
    for c in range(2):
        for p in range(2):
            seq = [v & 0xFFFFFFFF for v in out[c] if v >> 32 == p]
            assert seq == sorted(seq)
    with d.thread():
        q.destroy()
        d.collect()
    assert d.ledger.live == 0
