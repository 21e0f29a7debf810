"""Manual memory reclamation over a single acquire-retire instance.

This is the baseline the reference-counted structures are measured against:
the data structure calls ``retire`` itself after unlinking a node, and an
ejected handle is disposed and freed on the spot.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Any, Iterator, Optional

from .acquire_retire import Backend, Location
from .atomics import AtomicWord

__all__ = ["ManualDomain", "SlotsExhausted"]


class SlotsExhausted(RuntimeError):
    """A manual structure asked for more protections than the backend has."""


class ManualDomain:
    """Explicit retire/free runtime bound to one reclamation backend."""

    automatic = False

    def __init__(self, backend: Backend) -> None:
        self.backend = backend
        self.heap = backend.heap
        self.ledger = backend.heap.ledger
        self.ar = backend.instance("manual")
        self.region = backend.region

    def __repr__(self) -> str:
        return f"ManualDomain({self.backend!r})"

    def thread(self):
        return self.backend.thread()

    @contextmanager
    def critical_section(self) -> Iterator[None]:
        self.backend.begin_critical_section()
        try:
            yield
        finally:
            self.backend.end_critical_section()

    def alloc(self, payload: Any) -> int:
        return self.ar.alloc(payload, counted=False)

    def cell(self, word: int = 0) -> AtomicWord:
        return AtomicWord(word)

    def protect(self, src: Location) -> tuple[int, Any]:
        got = self.ar.try_acquire(src)
        if got is None:
            raise SlotsExhausted(f"no free protection slot on {self.backend.name}")
        return got

    def release(self, guard: Optional[Any]) -> None:
        if guard is not None:
            self.ar.release(guard)

    def deref(self, handle: int) -> Any:
        return self.heap.deref(handle)

    def free_unpublished(self, handle: int) -> None:
        """Free a node that no other thread could ever have seen."""
        block = self.heap.block(handle)
        self.heap.dispose(block)
        self.heap.free(block)

    def retire(self, handle: int) -> None:
        self.ar.retire(handle)
        self._drain()

    def _drain(self, force: bool = False) -> None:
        heap, ar = self.heap, self.ar
        h = ar.eject(force)
        while h is not None:
            block = heap.block(h)
            heap.dispose(block)
            heap.free(block)
            h = ar.eject(force)

    def collect(self) -> None:
        """Free every retired node that is no longer protected."""
        self._drain(force=True)

    def strong_updates(self) -> int:
        return 0

    def slow_snapshots(self) -> int:
        return 0
