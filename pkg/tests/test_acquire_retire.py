import threading

import pytest

from rcsmr import ConfigError, ProperExecutionError, RegistrationError, make_backend
from rcsmr.atomics import AtomicWord
from rcsmr.backends.ebr import EbrAcquireRetire
from rcsmr.backends.hp import HpAcquireRetire
from rcsmr.ledger import Payload
from rcsmr.verification.contract import SCENARIOS, contract_suite

BACKENDS = ("ebr", "ibr", "hp")


def _drain(ar):
    out = []
    h = ar.eject(force=True)
    while h is not None:
        out.append(h)
        h = ar.eject(force=True)
    return out


def test_unknown_and_unimplemented_backends():
    with pytest.raises(ConfigError, match="unknown"):
        make_backend("rcu")
    with pytest.raises(ConfigError, match="not implemented"):
        make_backend("hyaline")
    with pytest.raises(ConfigError):
        make_backend("hp", slots=0)
    with pytest.raises(ConfigError):
        make_backend("ebr", epoch_freq=0)


def test_registry_limit():
    b = make_backend("ebr", max_threads=1)
    with b.thread():
        with pytest.raises(RegistrationError, match="already"):
            b.register()
        err = []

        def other():
            try:
                b.register()
            except RegistrationError as e:
                err.append(e)

        t = threading.Thread(target=other)
        t.start()
        t.join()
        assert err


@pytest.mark.parametrize("name", BACKENDS)
def test_unprotected_retire_is_ejected(name):
    b = make_backend(name, max_threads=4)
    ar = b.instance()
    with b.thread():
        h = ar.alloc(Payload())
        ar.retire(h)
        assert _drain(ar) == [h]
        assert ar.pending() == 0


@pytest.mark.parametrize("name", BACKENDS)
def test_protection_blocks_eject(name):
    b = make_backend(name, max_threads=4)
    ar = b.instance()
    cell = AtomicWord()
    released = threading.Event()
    acquired = threading.Event()
    with b.thread():
        h = ar.alloc(Payload())
        cell.store(h)

        def reader():
            with b.thread(), b.critical_section():
                got, g = ar.acquire(cell)
                assert got == h
                acquired.set()
                released.wait()
                ar.release(g)

        t = threading.Thread(target=reader)
        t.start()
        acquired.wait()
        b.begin_critical_section()
        b.end_critical_section()
        if name != "hp":
            # push the epoch past the retire
            for _ in range(3 * b.epoch_freq):
                ar.alloc(Payload(), counted=False)
        ar.retire(h)
        assert _drain(ar) == []
        released.set()
        t.join()
        assert _drain(ar) == [h]


def test_hp_multiplicity():
    """k announcements of h pin exactly k of its retired copies."""
    b = make_backend("hp", max_threads=2, slots=4)
    ar = b.instance()
    cell = AtomicWord()
    with b.thread():
        h = ar.alloc(Payload())
        cell.store(h)
        guards = [ar.try_acquire(cell)[1] for _ in range(2)]
        for _ in range(3):
            ar.retire(h)
        assert _drain(ar) == [h]
        assert ar.pending() == 2
        ar.release(guards.pop())
        assert _drain(ar) == [h]
        ar.release(guards.pop())
        assert _drain(ar) == [h]


def test_hp_slot_exhaustion_and_reserved_slot():
    b = make_backend("hp", max_threads=2, slots=2)
    ar = b.instance()
    cell = AtomicWord(8)
    with b.thread():
        g1 = ar.try_acquire(cell)
        g2 = ar.try_acquire(cell)
        assert g1 and g2
        assert ar.try_acquire(cell) is None
        _, r = ar.acquire(cell)  # reserved slot still available
        ar.release(r)
        ar.release(g1[1])
        assert ar.try_acquire(cell) is not None


@pytest.mark.parametrize("name", BACKENDS)
def test_debug_double_release(name):
    b = make_backend(name, max_threads=2, debug=True)
    ar = b.instance()
    cell = AtomicWord()
    with b.thread(), b.critical_section():
        _, g = ar.try_acquire(cell)
        ar.release(g)
        with pytest.raises(ProperExecutionError):
            ar.release(g)


@pytest.mark.parametrize("name", ("ebr", "ibr"))
def test_debug_region_rules(name):
    b = make_backend(name, max_threads=2, debug=True)
    ar = b.instance()
    cell = AtomicWord()
    with b.thread():
        with pytest.raises(ProperExecutionError, match="outside"):
            ar.acquire(cell)
        b.begin_critical_section()
        with pytest.raises(ProperExecutionError, match="nested"):
            b.begin_critical_section()
        _, g = ar.acquire(cell)
        with pytest.raises(ProperExecutionError, match="active"):
            ar.acquire(cell)
        with pytest.raises(ProperExecutionError, match="active acquires"):
            b.end_critical_section()
        ar.release(g)
        b.end_critical_section()
        with pytest.raises(ProperExecutionError):
            b.end_critical_section()
        with pytest.raises(ProperExecutionError, match="non-canonical"):
            ar.retire(0)


def test_orphans_are_adopted():
    """Entries left by an exiting thread, scanned or not, reach the next ejector."""
    b = make_backend("ebr", max_threads=4)
    ar = b.instance()
    handles = []

    def worker():
        with b.thread():
            hs = [ar.alloc(Payload()) for _ in range(6)]
            for h in hs[:3]:
                ar.retire(h)
            assert ar.eject(force=True) is not None  # leaves scanned entries behind
            for h in hs[3:]:
                ar.retire(h)
            handles.extend(hs)

    t = threading.Thread(target=worker)
    t.start()
    t.join()
    with b.thread():
        assert ar.pending() == 5
        got = _drain(ar)
    assert len(got) == 5 and set(got) <= set(handles)


@pytest.mark.parametrize("name", BACKENDS)
def test_contract_suite_passes(name):
    rep = contract_suite(name, scenarios=["overlap", "multiplicity", "quiet"], max_preemptions=1)
    assert rep.ok, rep.failures[:2]
    assert set(rep.schedules) == {"overlap", "multiplicity", "quiet"}


def test_contract_catches_eager_region_scan(monkeypatch):
    def eager(self, st, retired):
        st.ready[self.index].extend(e[0] for e in retired)
        retired.clear()

    monkeypatch.setattr(EbrAcquireRetire, "_scan", eager)
    rep = contract_suite("ebr", scenarios=["overlap"], max_preemptions=2)
    assert rep.failures


def test_contract_catches_hp_without_multiplicity(monkeypatch):
    def one_pin(self, st, retired):
        # keeps a single copy per announced handle, however many slots hold it
        announced = self.announced()
        keep = []
        for h in retired:
            if announced.get(h) and h not in keep:
                keep.append(h)
            else:
                st.ready[self.index].append(h)
        retired[:] = keep

    monkeypatch.setattr(HpAcquireRetire, "_scan", one_pin)
    rep = contract_suite("hp", scenarios=["multiplicity"], max_preemptions=2)
    assert rep.failures


def test_scenarios_listed():
    assert {"overlap", "multiplicity", "three_way", "epoch_race", "reacquire", "quiet"} <= set(SCENARIOS)
