"""Bounded-schedule contract tests for acquire-retire backends.

Each scenario is a handful of simulated threads calling one acquire-retire
instance.  Every schedule (up to a preemption bound) is run and its event log
checked:

* an acquire returns the word its location held at the acquire's last load;
* per handle, ejects never outnumber retires at any prefix;
* the mapping property: for *every* map ``f`` of acquires to later retires of
  the same handle (or to nothing) there is an injective map ``g`` of ejects to
  earlier retires of the same handle such that ``f(A) == g(E)`` only when A
  was released before E returned.  ``f`` is enumerated, ``g`` is found by
  bipartite matching;
* after every thread has left, draining ejects each retired copy exactly once.

The same scenarios run unchanged against every backend.
"""

from __future__ import annotations

import collections
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..atomics import AtomicWord
from ..backends import make_backend
from ..ledger import Payload
from . import sched

__all__ = ["ContractReport", "SCENARIOS", "check_log", "contract_suite"]


class _Obj(Payload):
    __slots__ = ("touch",)

    def __init__(self) -> None:
        self.canary = 0
        self.touch = AtomicWord(0)


class TracedCell(AtomicWord):
    """An atomic word that remembers its writes and each thread's last load."""

    __slots__ = ("writes", "last_load")

    def __init__(self, value: int = 0) -> None:
        super().__init__(value)
        self.writes = [(0, value)]
        self.last_load: dict[int, tuple[int, int]] = {}

    def load(self) -> int:
        v = super().load()
        self.last_load[sched.current_thread()] = (sched.step_count(), v)
        return v

    def store(self, value: int) -> None:
        super().store(value)
        self.writes.append((sched.step_count(), value))

    def exchange(self, value: int) -> int:
        old = super().exchange(value)
        self.writes.append((sched.step_count(), value))
        return old

    def value_at(self, seq: int) -> int:
        v = self.writes[0][1]
        for s, w in self.writes:
            if s > seq:
                break
            v = w
        return v


@dataclass
class _Acq:
    tid: int
    cell: TracedCell
    value: int
    lin: int
    guard: Any
    released: Optional[int] = None


class Harness:
    """Instrumented access to one acquire-retire instance."""

    def __init__(self, backend: str, threads: int) -> None:
        self.backend = make_backend(backend, max_threads=threads + 1, debug=True)
        self.ar = self.backend.instance("contract")
        self.acquires: list[_Acq] = []
        self.retires: list[tuple[int, int]] = []  # (seq, handle)
        self.ejects: list[tuple[int, int]] = []
        self.drained: list[int] = []

    def alloc(self) -> int:
        b = self.backend
        birth = b.epoch.load() if hasattr(b, "epoch") else 0
        return b.heap.allocate(_Obj(), birth, counted=False).handle

    # thread-side operations

    def section(self):
        return self.backend.critical_section()

    def _acq(self, cell: TracedCell, result) -> Optional[_Acq]:
        if result is None:
            return None
        value, guard = result
        tid = sched.current_thread()
        lin = cell.last_load[tid][0]
        a = _Acq(tid, cell, value, lin, guard)
        self.acquires.append(a)
        return a

    def acquire(self, cell: TracedCell) -> _Acq:
        return self._acq(cell, self.ar.acquire(cell))

    def try_acquire(self, cell: TracedCell) -> Optional[_Acq]:
        return self._acq(cell, self.ar.try_acquire(cell))

    def use(self, a: Optional[_Acq]) -> None:
        """A shared-memory step while the guard is held, so others can run inside it."""
        if a is not None and a.value:
            self.backend.heap.deref(a.value).touch.load()

    def release(self, a: Optional[_Acq]) -> None:
        if a is None:
            return
        self.ar.release(a.guard)
        a.released = sched.tick()

    def retire(self, h: int) -> None:
        sched.point()
        self.ar.retire(h)
        self.retires.append((sched.tick(), h))

    def eject(self, n: int = 1) -> None:
        for _ in range(n):
            sched.point()
            h = self.ar.eject(force=True)
            if h is not None:
                self.ejects.append((sched.tick(), h))

    def advance(self) -> None:
        epoch = getattr(self.backend, "epoch", None)
        if epoch is not None:
            epoch.fetch_add(1)

    def run_thread(self, body: Callable[[], None]) -> Callable[[], None]:
        def wrapped() -> None:
            with self.backend.thread():
                body()

        return wrapped

    def drain(self) -> None:
        with self.backend.thread():
            while True:
                h = self.ar.eject(force=True)
                if h is None:
                    break
                self.drained.append(h)


def _matching(ejects, retires, blocked) -> bool:
    """Injective eject -> retire assignment avoiding ``blocked`` pairs."""
    cand = []
    for ei, (et, eh) in enumerate(ejects):
        cand.append([ri for ri, (rt, rh) in enumerate(retires) if rh == eh and rt < et and (ei, ri) not in blocked])
    owner: dict[int, int] = {}

    def augment(ei: int, seen: set) -> bool:
        for ri in cand[ei]:
            if ri in seen:
                continue
            seen.add(ri)
            if ri not in owner or augment(owner[ri], seen):
                owner[ri] = ei
                return True
        return False

    return all(augment(ei, set()) for ei in range(len(ejects)))


def check_log(h: Harness, max_maps: int = 100_000) -> Optional[str]:
    """All contract checks over one completed run; None when they hold."""
    for a in h.acquires:
        held = a.cell.value_at(a.lin)
        if a.value != held:
            return f"acquire by t{a.tid} returned {a.value:#x} but the cell held {held:#x}"
        if a.released is None:
            return f"acquire by t{a.tid} never released"
    events = sorted([(t, 0, x) for t, x in h.retires] + [(t, 1, x) for t, x in h.ejects])
    balance: collections.Counter = collections.Counter()
    for _, kind, x in events:
        balance[x] += 1 if kind == 0 else -1
        if balance[x] < 0:
            return f"handle {x:#x} ejected more often than retired"
    # Every f: each acquire picks a later retire of its value, or nothing.
    options = []
    for a in h.acquires:
        opts = [None] + [ri for ri, (rt, rh) in enumerate(h.retires) if a.value and rh == a.value and rt > a.lin]
        options.append(opts)
    n_maps = 1
    for o in options:
        n_maps *= len(o)
    if n_maps > max_maps:
        return f"{n_maps} acquire maps exceed the search budget"
    for f in itertools.product(*options):
        blocked = set()
        for ai, ri in enumerate(f):
            if ri is None:
                continue
            rel = h.acquires[ai].released
            for ei, (et, _) in enumerate(h.ejects):
                if not rel < et:
                    blocked.add((ei, ri))
        if not _matching(h.ejects, h.retires, blocked):
            return f"no eject mapping exists for acquire map {f}"
    got = collections.Counter(x for _, x in h.ejects) + collections.Counter(h.drained)
    want = collections.Counter(x for _, x in h.retires)
    if got != want:
        return f"after draining, ejected {dict(got)} but retired {dict(want)}"
    return None


# -- scenarios ---------------------------------------------------------------
# Each returns (harness, bodies, extra check); the extra check sees the harness.


def _overlap(backend: str):
    """A retire lands while a reader's section is open."""
    h = Harness(backend, 2)
    p, q = h.alloc(), h.alloc()
    cell = TracedCell(p)

    def reader():
        with h.section():
            a = h.acquire(cell)
            h.use(a)
            h.release(a)

    def writer():
        cell.store(q)
        h.retire(p)
        h.eject(3)

    return h, [reader, writer], None


def _multiplicity(backend: str):
    """k protections, k + m retires of one handle: at most m ejects while protected."""
    k, m = 2, 1
    h = Harness(backend, 2)
    p = h.alloc()
    cell = TracedCell(p)
    def reader():
        with h.section():
            guards = [h.try_acquire(cell) for _ in range(k)]
            for g in guards:
                h.release(g)

    def retirer():
        for _ in range(k + m):
            h.retire(p)
        h.eject(k + m)

    def extra(h: Harness) -> Optional[str]:
        # Ejects while every acquire is active and already holds p.
        starts = [a.lin for a in h.acquires if a.value == p]
        if len(starts) < k:
            return None
        lo = max(starts)
        hi = min(a.released for a in h.acquires)
        retired_before = sum(1 for t, _ in h.retires if t < lo)
        inside = sum(1 for t, x in h.ejects if lo < t < hi and x == p)
        # Copies retired before the acquires linearized are not pinned by them.
        if inside > m + retired_before:
            return f"{inside} ejects of a handle protected {k} times with {k + m} retires"
        return None

    return h, [reader, retirer], extra


def _three_way(backend: str):
    """Two readers and a writer that swaps the cell, retires, then ejects."""
    h = Harness(backend, 3)
    p, q = h.alloc(), h.alloc()
    cell = TracedCell(p)

    def r1():
        with h.section():
            a = h.acquire(cell)
            h.use(a)
            h.release(a)

    def r2():
        with h.section():
            a = h.try_acquire(cell)
            h.use(a)
            h.release(a)

    def writer():
        old = cell.exchange(q)
        h.retire(old)
        h.eject(2)

    return h, [r1, r2, writer], None


def _epoch_race(backend: str):
    """A reader, a retirer, and a thread pushing the epoch forward."""
    h = Harness(backend, 3)
    p, q = h.alloc(), h.alloc()
    cell = TracedCell(p)

    def reader():
        with h.section():
            a = h.acquire(cell)
            h.use(a)
            h.release(a)

    def writer():
        cell.store(q)
        h.retire(p)
        h.eject()
        h.eject()

    def ticker():
        h.advance()
        h.advance()

    return h, [reader, writer, ticker], None


def _reacquire(backend: str):
    """Retire before unlinking, with a reader acquiring twice meanwhile."""
    h = Harness(backend, 2)
    p, q = h.alloc(), h.alloc()
    cell = TracedCell(p)

    def reader():
        with h.section():
            a = h.acquire(cell)
            h.use(a)
            h.release(a)
            b = h.try_acquire(cell)
            h.release(b)

    def writer():
        h.retire(p)
        cell.store(q)
        h.eject(2)

    return h, [reader, writer], None


def _quiet(backend: str):
    """No protection at all: the retired copy must be ejectable right away."""
    h = Harness(backend, 2)
    p = h.alloc()
    marks = {"eject": 0, "idle_end": float("inf")}

    def retirer():
        h.retire(p)
        marks["eject"] = sched.tick()
        h.eject()

    def idle():
        with h.section():
            pass
        marks["idle_end"] = sched.tick()

    def extra(h: Harness) -> Optional[str]:
        if marks["idle_end"] < marks["eject"] and not h.ejects:
            return "eject withheld a handle nobody could be protecting"
        return None

    return h, [retirer, idle], extra


SCENARIOS: dict[str, Callable] = {
    "overlap": _overlap,
    "multiplicity": _multiplicity,
    "three_way": _three_way,
    "epoch_race": _epoch_race,
    "reacquire": _reacquire,
    "quiet": _quiet,
}


@dataclass
class ContractReport:
    backend: str
    schedules: dict[str, int] = field(default_factory=dict)
    failures: list[dict] = field(default_factory=list)
    truncated: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and not self.truncated

    def as_dict(self) -> dict:
        return {
            "backend": self.backend,
            "ok": self.ok,
            "schedules": self.schedules,
            "failures": self.failures,
            "truncated": self.truncated,
        }


def contract_suite(
    backend: str,
    *,
    scenarios: Optional[list[str]] = None,
    max_preemptions: int = 2,
    max_schedules: int = 50_000,
) -> ContractReport:
    report = ContractReport(backend)
    for name in scenarios or list(SCENARIOS):
        make = SCENARIOS[name]

        def setup(make=make):
            h, bodies, extra = make(backend)

            def check() -> Optional[str]:
                h.drain()
                msg = check_log(h)
                if msg is None and extra is not None:
                    msg = extra(h)
                return msg

            return [h.run_thread(b) for b in bodies], check

        res = sched.explore(setup, max_preemptions=max_preemptions, max_schedules=max_schedules)
        report.schedules[name] = res.schedules
        if res.truncated:
            report.truncated.append(name)
        for f in res.failures:
            report.failures.append({"scenario": name, **f})
    return report
