"""Two-global-epoch interval-based reclamation (2GEIBR).

Each allocation is stamped with its birth epoch.  A thread reserves the
epoch interval ``[begin, end]`` it may be reading from; ``acquire`` widens
``end`` whenever it notices the global epoch moved.  A retired entry with
lifetime ``[birth, retire]`` is unprotected once no reservation intersects it.
"""

from __future__ import annotations

from typing import Any, Optional

from ..acquire_retire import EMPTY_ANN, Location, ThreadState
from ..atomics import AtomicWord, Register
from .ebr import EbrAcquireRetire, EbrBackend

__all__ = ["IbrBackend", "IbrAcquireRetire"]


class IbrAcquireRetire(EbrAcquireRetire):
    backend: IbrBackend

    def _stamp(self, handle: int) -> tuple[int, int, int]:
        backend = self.backend
        return (handle, backend.heap.block(handle).birth, backend.epoch.load())

    def _protect(self, src: Location, st: ThreadState) -> int:
        epoch = self.backend.epoch
        end_ann = self.backend.end_ann[st.pid]
        while True:
            word = src.load()
            cur = epoch.load()
            if st.prev_epoch == cur:
                return word
            end_ann.store(cur)
            st.prev_epoch = cur

    def acquire(self, src: Location) -> tuple[int, Any]:
        guard = self._guard(True)
        return self._protect(src, self.backend.thread_state()), guard

    def try_acquire(self, src: Location) -> Optional[tuple[int, Any]]:
        # never fails
        guard = self._guard(False)
        return self._protect(src, self.backend.thread_state()), guard

    def _scan(self, st: ThreadState, retired: list[Any]) -> None:
        reservations = self.backend.reservations()
        ready = st.ready[self.index]
        keep = []
        for entry in retired:
            _, birth, retired_at = entry
            for lo, hi in reservations:
                if birth <= hi and lo <= retired_at:
                    keep.append(entry)
                    break
            else:
                ready.append(entry[0])
        retired[:] = keep


class IbrBackend(EbrBackend):
    name = "ibr"
    default_epoch_freq = 40
    instance_class = IbrAcquireRetire

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self.begin_ann = [Register(EMPTY_ANN) for _ in range(self.max_threads)]
        self.end_ann = [Register(EMPTY_ANN) for _ in range(self.max_threads)]

    def alloc(self, payload: Any, counted: bool = True) -> int:
        st = self.thread_state()
        birth = self.epoch.load()
        handle = self.heap.allocate(payload, birth, counted).handle
        self.advance_epoch_policy(st)
        return handle

    def begin_critical_section(self) -> None:
        # Skip EbrBackend's single announcement.
        super(EbrBackend, self).begin_critical_section()
        st = self.thread_state()
        cur = self.epoch.load()
        st.prev_epoch = cur
        # end before begin: a scanner never sees a narrower interval than real
        self.end_ann[st.pid].store(cur)
        self.begin_ann[st.pid].store(cur)

    def end_critical_section(self) -> None:
        super(EbrBackend, self).end_critical_section()
        st = self.thread_state()
        self.end_ann[st.pid].store(EMPTY_ANN)
        self.begin_ann[st.pid].store(EMPTY_ANN)
        st.prev_epoch = EMPTY_ANN

    def reservations(self) -> list[tuple[int, int]]:
        out = []
        for b, e in zip(self.begin_ann[: self.high], self.end_ann[: self.high]):
            lo = b.load()
            if lo != EMPTY_ANN:
                out.append((lo, e.load()))
        return out

    def announcements(self) -> list[tuple[int, int]]:
        return [(b.load(), e.load()) for b, e in zip(self.begin_ann[: self.high], self.end_ann[: self.high])]
