"""Epoch-based reclamation as an acquire-retire instance.

A thread announces the global epoch when it enters a critical section and
clears the announcement when it leaves.  An entry retired at epoch ``r`` is
unprotected once every announcement is either empty or newer than ``r``.
Acquires are plain loads; the critical section already protects them.
"""

from __future__ import annotations

from typing import Any, Optional

from ..acquire_retire import (
    EMPTY_ANN,
    UNIT,
    AcquireRetire,
    Backend,
    DebugGuard,
    Location,
    ProperExecutionError,
    ThreadState,
)
from ..atomics import AtomicWord, Register

__all__ = ["EbrBackend", "EbrAcquireRetire"]


class EbrAcquireRetire(AcquireRetire):
    backend: EbrBackend

    def _stamp(self, handle: int) -> tuple[int, int]:
        return (handle, self.backend.epoch.load())

    def _guard(self, reserved: bool) -> Any:
        if not self.backend.debug:
            return UNIT
        st = self.backend.thread_state()
        self._check_acquire(st, reserved)
        if reserved:
            st.reserved_active[self.index] = True
        else:
            st.held[self.index] += 1
        return DebugGuard(self, reserved)

    def acquire(self, src: Location) -> tuple[int, Any]:
        guard = self._guard(True)
        return src.load(), guard

    def try_acquire(self, src: Location) -> Optional[tuple[int, Any]]:
        guard = self._guard(False)
        return src.load(), guard

    def release(self, guard: Any) -> None:
        if guard is UNIT:
            return
        if not isinstance(guard, DebugGuard) or guard.instance is not self:
            raise ProperExecutionError(f"foreign guard {guard!r} released on {self.tag!r}")
        if guard.released:
            raise ProperExecutionError("guard released twice")
        guard.released = True
        st = self.backend.thread_state()
        if guard.reserved:
            st.reserved_active[self.index] = False
        else:
            st.held[self.index] -= 1

    def _scan(self, st: ThreadState, retired: list[Any]) -> None:
        safe_below = self.backend.min_announcement()
        ready = st.ready[self.index]
        keep = []
        for entry in retired:
            if entry[1] < safe_below:
                ready.append(entry[0])
            else:
                keep.append(entry)
        retired[:] = keep


class EbrBackend(Backend):
    name = "ebr"
    region = True
    default_epoch_freq = 10
    instance_class = EbrAcquireRetire

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self.epoch = AtomicWord(0)
        self.ann = [Register(EMPTY_ANN) for _ in range(self.max_threads)]

    def alloc(self, payload: Any, counted: bool = True) -> int:
        st = self.thread_state()
        self.advance_epoch_policy(st)
        return self.heap.allocate(payload, 0, counted).handle

    def advance_epoch_policy(self, st: ThreadState) -> None:
        st.alloc_counter += 1
        if st.alloc_counter % self.epoch_freq == 0:
            self.epoch.fetch_add(1)

    def begin_critical_section(self) -> None:
        super().begin_critical_section()
        st = self.thread_state()
        self.ann[st.pid].store(self.epoch.load())

    def end_critical_section(self) -> None:
        super().end_critical_section()
        self.ann[self.thread_state().pid].store(EMPTY_ANN)

    def min_announcement(self) -> int:
        return min((a.load() for a in self.ann[: self.high]), default=EMPTY_ANN)

    def announcements(self) -> list[int]:
        return [a.load() for a in self.ann[: self.high]]
