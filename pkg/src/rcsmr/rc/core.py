"""Deferred reference counting over three acquire-retire instances.

Strong decrements, weak decrements and disposals are each deferred through
their own instance of one backend.  They share the backend's clock and
announcements, so one critical section protects all three.

The deferred actions are applied by ``_drain``: it pulls ejected handles
until all three instances are empty.  An action that itself retires
something (a decrement reaching zero schedules a dispose, a dispose drops its
children) only appends to a retired list while a drain is already running on
the thread, so cascades run iteratively, never recursively.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Any, Iterator

from ..acquire_retire import Backend
from ..ledger import MARK_MASK, POISON, Block, Payload
from .strong import AtomicStrongRef, SnapshotRef, StrongRef
from .weak import AtomicWeakRef, WeakRef, WeakSnapshotRef

__all__ = ["RcDomain", "Managed"]


class Managed(Payload):
    """Payload whose ``_strong_cells`` / ``_weak_cells`` are dropped on dispose."""

    __slots__ = ()
    _strong_cells: tuple[str, ...] = ()
    _weak_cells: tuple[str, ...] = ()


class RcDomain:
    """Reference-counting runtime bound to one reclamation backend."""

    automatic = True

    def __init__(self, backend: Backend) -> None:
        self.backend = backend
        self.heap = backend.heap
        self.ledger = backend.heap.ledger
        self.strong_ar = backend.instance("strong")
        self.weak_ar = backend.instance("weak")
        self.dispose_ar = backend.instance("dispose")
        self.region = backend.region
        self.debug = backend.debug

    def __repr__(self) -> str:
        return f"RcDomain({self.backend!r})"

    # -- threads and critical sections -----------------------------------

    def thread(self):
        return self.backend.thread()

    def begin_critical_section(self) -> None:
        self.backend.begin_critical_section()

    def end_critical_section(self) -> None:
        self.backend.end_critical_section()

    @contextmanager
    def critical_section(self) -> Iterator[None]:
        self.backend.begin_critical_section()
        try:
            yield
        finally:
            self.backend.end_critical_section()

    # -- constructors ----------------------------------------------------

    def make_shared(self, payload: Any) -> StrongRef:
        """Allocate a managed object with strong = 1, weak = 1."""
        return StrongRef(self, self.strong_ar.alloc(payload))

    def atomic_shared(self, initial: StrongRef | SnapshotRef | None = None) -> AtomicStrongRef:
        cell = AtomicStrongRef(self)
        if initial:
            cell.store(initial)
        return cell

    def atomic_weak(self, initial: WeakRef | StrongRef | SnapshotRef | None = None) -> AtomicWeakRef:
        cell = AtomicWeakRef(self)
        if initial:
            cell.store(initial)
        return cell

    def null_strong(self) -> StrongRef:
        return StrongRef(self, 0)

    # -- primitives ------------------------------------------------------

    def block(self, handle: int) -> Block:
        return self.heap.block(handle)

    def increment(self, handle: int) -> bool:
        """Strong increment-if-not-zero; False means the object expired."""
        self.backend.thread_state().strong_updates += 1
        return self.heap.block(handle).strong.increment_if_not_zero()

    def add_strong(self, handle: int) -> None:
        """Plain strong FAA for a caller that holds a unit or a guard."""
        self.backend.thread_state().strong_updates += 1
        self.heap.block(handle).strong.increment()

    def weak_increment(self, handle: int) -> None:
        # Zero weak count means the block is already gone; nothing to check.
        self.heap.block(handle).weak.increment_if_not_zero()

    def decrement(self, handle: int) -> None:
        self.backend.thread_state().strong_updates += 1
        if self.heap.block(handle).strong.decrement():
            self.delayed_dispose(handle)

    def weak_decrement(self, handle: int) -> None:
        block = self.heap.block(handle)
        if block.weak.decrement():
            self.heap.free(block)

    def dispose(self, handle: int) -> None:
        """Destroy the payload, dropping the references it holds."""
        block = self.heap.block(handle)
        payload = block.payload
        strong = [getattr(payload, n).take() for n in payload._strong_cells]
        weak = [getattr(payload, n).take() for n in payload._weak_cells]
        self.heap.dispose(block)
        for word in strong:
            h = word & ~MARK_MASK
            if h and word != POISON:
                self.decrement(h)
        for word in weak:
            h = word & ~MARK_MASK
            if h and word != POISON:
                self.weak_decrement(h)
        self.weak_decrement(handle)

    def expired(self, handle: int) -> bool:
        return self.heap.block(handle).strong.load() == 0

    # -- deferral --------------------------------------------------------

    def delayed_decrement(self, handle: int) -> None:
        self.strong_ar.retire(handle)
        self._drain()

    def delayed_weak_decrement(self, handle: int) -> None:
        self.weak_ar.retire(handle)
        self._drain()

    def delayed_dispose(self, handle: int) -> None:
        self.dispose_ar.retire(handle)
        self._drain()

    def _drain(self, force: bool = False) -> None:
        st = self.backend.thread_state()
        if st.draining:
            return
        st.draining = True
        try:
            strong_ar, dispose_ar, weak_ar = self.strong_ar, self.dispose_ar, self.weak_ar
            progress = True
            while progress:
                progress = False
                h = strong_ar.eject(force)
                while h is not None:
                    progress = True
                    self.decrement(h)
                    h = strong_ar.eject(force)
                h = dispose_ar.eject(force)
                while h is not None:
                    progress = True
                    self.dispose(h)
                    h = dispose_ar.eject(force)
                h = weak_ar.eject(force)
                while h is not None:
                    progress = True
                    self.weak_decrement(h)
                    h = weak_ar.eject(force)
        finally:
            st.draining = False

    def collect(self) -> None:
        """Apply every deferred action that is currently unprotected.

        Meant for quiescent points (tests, teardown): scans are forced
        regardless of the amortization threshold, and orphaned entries left by
        unregistered threads are adopted by the caller.
        """
        self._drain(force=True)

    # -- diagnostics -----------------------------------------------------

    def strong_count(self, handle: int) -> int:
        return self.heap.block(handle).strong.load()

    def weak_count(self, handle: int) -> int:
        return self.heap.block(handle).weak.load()

    def strong_updates(self) -> int:
        return self.backend.strong_updates()

    def slow_snapshots(self) -> int:
        return self.backend.slow_snapshots()
