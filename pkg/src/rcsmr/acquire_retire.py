"""Generalized acquire-retire: the contract every reclamation backend satisfies.

An ``AcquireRetire`` instance defers an arbitrary action on a handle until no
acquire can still observe the handle through the retirement being paid off.
``retire`` never performs the action and ``eject`` never performs it either:
eject only hands back a handle whose protection has lapsed, and the caller
applies the action outside of eject so that cascades cannot re-enter it.

A ``Backend`` owns everything that is shared between instances: the thread
registry, the global clock and announcement arrays, and the allocator hook.
Several instances may share one backend (reference counting uses three), in
which case a single critical section covers all of them.
"""

from __future__ import annotations

import collections
from contextlib import contextmanager
from contextvars import ContextVar
from threading import Lock
from typing import Any, Iterator, Optional, Protocol

from .ledger import MARK_MASK, NULL, Heap, canonical, mark_of

__all__ = [
    "DEFAULT_MAX_THREADS",
    "EMPTY_ANN",
    "UNIT",
    "AcquireRetire",
    "Backend",
    "ConfigError",
    "DebugGuard",
    "Location",
    "ProperExecutionError",
    "RegistrationError",
    "ThreadState",
    "canonical",
    "mark_of",
    "with_mark",
    "MARK_MASK",
    "NULL",
]

DEFAULT_MAX_THREADS = 128
# "Not in a critical section"; larger than any epoch.
EMPTY_ANN = (1 << 63) - 1


def with_mark(word: int, mark: int) -> int:
    return (word & ~MARK_MASK) | (mark & MARK_MASK)


class ConfigError(ValueError):
    pass


class RegistrationError(RuntimeError):
    pass


class ProperExecutionError(AssertionError):
    """Misuse of the interface detected in debug mode."""


class Location(Protocol):
    def load(self) -> int: ...


class _Unit:
    """The guard of backends whose acquires need no per-pointer state."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "UNIT"


UNIT = _Unit()


class DebugGuard:
    """Unit guard that remembers whether it was released (debug mode only)."""

    __slots__ = ("instance", "reserved", "released")

    def __init__(self, instance: AcquireRetire, reserved: bool) -> None:
        self.instance = instance
        self.reserved = reserved
        self.released = False


class ThreadState:
    """Per (backend, thread) bookkeeping; only its owner mutates it."""

    __slots__ = (
        "pid",
        "in_cs",
        "draining",
        "alloc_counter",
        "prev_epoch",
        "retired",
        "ready",
        "scan_mark",
        "free_slots",
        "held",
        "reserved_active",
        "strong_updates",
        "slow_snapshots",
    )

    def __init__(self, pid: int, n_instances: int) -> None:
        self.pid = pid
        self.in_cs = False
        self.draining = False
        self.alloc_counter = 0
        self.prev_epoch = EMPTY_ANN
        self.retired: list[list[Any]] = [[] for _ in range(n_instances)]
        self.ready: list[collections.deque[int]] = [collections.deque() for _ in range(n_instances)]
        self.scan_mark = [0] * n_instances
        self.free_slots: list[list[int]] = [[] for _ in range(n_instances)]
        # debug: outstanding try_acquire guards, per instance
        self.held = [0] * n_instances
        self.reserved_active = [False] * n_instances
        self.strong_updates = 0
        self.slow_snapshots = 0

    def add_instance(self) -> None:
        self.retired.append([])
        self.ready.append(collections.deque())
        self.scan_mark.append(0)
        self.free_slots.append([])
        self.held.append(0)
        self.reserved_active.append(False)


class Backend:
    """Shared state of one reclamation scheme plus its thread registry."""

    name = "abstract"
    region = True  # protected-region scheme (critical sections protect)
    default_epoch_freq = 10
    default_scan_threshold = 64

    def __init__(
        self,
        max_threads: int = DEFAULT_MAX_THREADS,
        *,
        epoch_freq: int | None = None,
        scan_threshold: int | None = None,
        debug: bool = False,
        heap: Heap | None = None,
    ) -> None:
        if max_threads < 1:
            raise ConfigError("max_threads must be positive")
        self.max_threads = max_threads
        self.epoch_freq = epoch_freq if epoch_freq is not None else self.default_epoch_freq
        if self.epoch_freq < 1:
            raise ConfigError("epoch_freq must be positive")
        self.scan_threshold = (
            scan_threshold if scan_threshold is not None else self.default_scan_threshold
        )
        self.debug = debug
        self.heap = heap if heap is not None else Heap()
        self.instances: list[AcquireRetire] = []
        self._var: ContextVar[Optional[ThreadState]] = ContextVar(f"rcsmr-{self.name}-{id(self)}")
        self._lock = Lock()
        self._free_ids = list(range(max_threads - 1, -1, -1))
        self.states: list[Optional[ThreadState]] = [None] * max_threads
        # one past the highest id ever handed out; scans stop here
        self.high = 0
        # Entries left behind by unregistered threads, per instance: stamped
        # retired entries, and handles already found unprotected.
        self._orphans: list[list[Any]] = []
        self._orphans_ready: list[list[int]] = []
        self._retired_stats = [0, 0]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(P={self.max_threads}, epoch_freq={self.epoch_freq})"

    # -- registry -------------------------------------------------------

    def thread_state(self) -> ThreadState:
        st = self._var.get(None)
        if st is None:
            st = self.register()
        return st

    def register(self) -> ThreadState:
        if self._var.get(None) is not None:
            raise RegistrationError("thread already registered")
        with self._lock:
            if not self._free_ids:
                raise RegistrationError(f"more than P={self.max_threads} threads registered")
            pid = self._free_ids.pop()
            st = ThreadState(pid, len(self.instances))
            self.states[pid] = st
            self.high = max(self.high, pid + 1)
        for inst in self.instances:
            inst._on_register(st)
        self._var.set(st)
        return st

    def unregister(self) -> None:
        st = self._var.get(None)
        if st is None:
            return
        if st.in_cs:
            raise ProperExecutionError("unregister inside a critical section")
        for inst in self.instances:
            inst._on_unregister(st)
        with self._lock:
            for i, inst in enumerate(self.instances):
                self._orphans_ready[i].extend(st.ready[i])
                self._orphans[i].extend(st.retired[i])
            self._retired_stats[0] += st.strong_updates
            self._retired_stats[1] += st.slow_snapshots
            self.states[st.pid] = None
            self._free_ids.append(st.pid)
            self._free_ids.sort(reverse=True)
        self._var.set(None)

    @contextmanager
    def thread(self) -> Iterator[ThreadState]:
        """Register the calling thread for the duration of the block."""
        st = self.register()
        try:
            yield st
        finally:
            self.unregister()

    def active_states(self) -> list[ThreadState]:
        return [s for s in self.states[: self.high] if s is not None]

    def _adopt_orphans(self, st: ThreadState, index: int) -> None:
        if self._orphans[index] or self._orphans_ready[index]:
            with self._lock:
                entries, self._orphans[index] = self._orphans[index], []
                ready, self._orphans_ready[index] = self._orphans_ready[index], []
            st.retired[index].extend(entries)
            st.ready[index].extend(ready)

    def strong_updates(self) -> int:
        return self._retired_stats[0] + sum(s.strong_updates for s in self.active_states())

    def slow_snapshots(self) -> int:
        return self._retired_stats[1] + sum(s.slow_snapshots for s in self.active_states())

    # -- instances ------------------------------------------------------

    instance_class: type[AcquireRetire]

    def instance(self, tag: str = "default") -> AcquireRetire:
        with self._lock:
            inst = self.instance_class(self, len(self.instances), tag)
            self.instances.append(inst)
            self._orphans.append([])
            self._orphans_ready.append([])
            for st in self.states:
                if st is not None:
                    st.add_instance()
        for st in self.states:
            if st is not None:
                inst._on_register(st)
        return inst

    # -- allocation and critical sections -------------------------------

    def alloc(self, payload: Any, counted: bool = True) -> int:
        return self.heap.allocate(payload, 0, counted).handle

    def begin_critical_section(self) -> None:
        st = self.thread_state()
        if st.in_cs:
            raise ProperExecutionError("nested begin_critical_section")
        st.in_cs = True

    def end_critical_section(self) -> None:
        st = self.thread_state()
        if not st.in_cs:
            raise ProperExecutionError("end_critical_section without begin")
        if self.debug:
            for i, inst in enumerate(self.instances):
                if st.held[i] or st.reserved_active[i]:
                    raise ProperExecutionError(
                        f"critical section ended with active acquires on {inst.tag!r}"
                    )
        st.in_cs = False

    @contextmanager
    def critical_section(self) -> Iterator[None]:
        self.begin_critical_section()
        try:
            yield
        finally:
            self.end_critical_section()

    def announcements(self) -> list[Any]:
        """Current announcement state, for diagnostics and tests."""
        return []


class AcquireRetire:
    """One acquire-retire instance; retired lists are private to it."""

    def __init__(self, backend: Backend, index: int, tag: str) -> None:
        self.backend = backend
        self.index = index
        self.tag = tag

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.tag!r} on {self.backend!r}>"

    def _on_register(self, st: ThreadState) -> None:
        pass

    def _on_unregister(self, st: ThreadState) -> None:
        pass

    # -- interface ------------------------------------------------------

    def alloc(self, payload: Any, counted: bool = True) -> int:
        return self.backend.alloc(payload, counted)

    def begin_critical_section(self) -> None:
        self.backend.begin_critical_section()

    def end_critical_section(self) -> None:
        self.backend.end_critical_section()

    def acquire(self, src: Location) -> tuple[int, Any]:
        raise NotImplementedError

    def try_acquire(self, src: Location) -> Optional[tuple[int, Any]]:
        raise NotImplementedError

    def release(self, guard: Any) -> None:
        raise NotImplementedError

    def retire(self, handle: int) -> None:
        if self.backend.debug and (handle == NULL or handle & MARK_MASK):
            raise ProperExecutionError(f"retire of non-canonical handle {handle:#x}")
        st = self.backend.thread_state()
        st.retired[self.index].append(self._stamp(handle))

    def eject(self, force: bool = False) -> Optional[int]:
        """Pop one unprotected retired handle, scanning if the policy says so."""
        st = self.backend.thread_state()
        i = self.index
        ready = st.ready[i]
        if ready:
            return ready.popleft()
        self.backend._adopt_orphans(st, i)
        if ready:
            return ready.popleft()
        retired = st.retired[i]
        if retired and (force or self._should_scan(st, retired)):
            self._scan(st, retired)
            st.scan_mark[i] = len(st.retired[i])
            if ready:
                return ready.popleft()
        return None

    def pending(self) -> int:
        """Retired-but-not-ejected entries across all threads (quiescent use only)."""
        return sum(
            len(st.retired[self.index]) + len(st.ready[self.index])
            for st in self.backend.active_states()
        ) + len(self.backend._orphans[self.index]) + len(self.backend._orphans_ready[self.index])

    def pending_handles(self) -> collections.Counter[int]:
        """Multiset of pending handles (quiescent use only)."""
        out: collections.Counter[int] = collections.Counter()
        for st in self.backend.active_states():
            out.update(self._entry_handle(e) for e in st.retired[self.index])
            out.update(st.ready[self.index])
        out.update(self._entry_handle(e) for e in self.backend._orphans[self.index])
        out.update(self.backend._orphans_ready[self.index])
        return out

    # -- backend hooks --------------------------------------------------

    def _stamp(self, handle: int) -> Any:
        return handle

    @staticmethod
    def _entry_handle(entry: Any) -> int:
        return entry if isinstance(entry, int) else entry[0]

    def _should_scan(self, st: ThreadState, retired: list[Any]) -> bool:
        return len(retired) - st.scan_mark[self.index] >= self.backend.scan_threshold

    def _scan(self, st: ThreadState, retired: list[Any]) -> None:
        raise NotImplementedError

    # -- debug checks shared by region backends --------------------------

    def _check_acquire(self, st: ThreadState, reserved: bool) -> None:
        if not st.in_cs and self.backend.region:
            raise ProperExecutionError(f"acquire on {self.tag!r} outside a critical section")
        if reserved and st.reserved_active[self.index]:
            raise ProperExecutionError(f"acquire on {self.tag!r} while the previous one is active")
