"""Hazard-slot backend: protection by announcing individual handles.

Each thread owns ``K + 1`` announcement slots per instance.  Slot ``K`` is
reserved for ``acquire`` so that it always succeeds; ``try_acquire`` takes any
free slot among the first ``K`` and fails when none is left.  Critical
sections are no-ops.

A handle may be retired several times.  A scan counts, per handle, how many
copies are retired (``m``) and how many slots currently announce it (``a``),
and releases ``m - a`` of them: an active acquire can pin at most one of the
later retirements, so the surplus is unprotected.
"""

from __future__ import annotations

import collections
from typing import Any, Optional

from ..acquire_retire import (
    MARK_MASK,
    AcquireRetire,
    Backend,
    ConfigError,
    Location,
    ProperExecutionError,
    ThreadState,
)
from ..atomics import Register

__all__ = ["HpBackend", "HpAcquireRetire", "DEFAULT_SLOTS"]

DEFAULT_SLOTS = 8


class HpAcquireRetire(AcquireRetire):
    backend: HpBackend

    def __init__(self, backend: HpBackend, index: int, tag: str) -> None:
        super().__init__(backend, index, tag)
        k = backend.slots_per_thread
        self.slots = [[Register(0) for _ in range(k + 1)] for _ in range(backend.max_threads)]

    def _on_register(self, st: ThreadState) -> None:
        st.free_slots[self.index] = list(range(self.backend.slots_per_thread - 1, -1, -1))

    def _on_unregister(self, st: ThreadState) -> None:
        for slot in self.slots[st.pid]:
            slot.store(0)

    @staticmethod
    def _announce(slot: Register, src: Location) -> int:
        word = src.load()
        while True:
            slot.store(word & ~MARK_MASK)
            again = src.load()
            if again == word:
                return word
            word = again

    def acquire(self, src: Location) -> tuple[int, Any]:
        st = self.backend.thread_state()
        k = self.backend.slots_per_thread
        if self.backend.debug:
            self._check_acquire(st, reserved=True)
            st.reserved_active[self.index] = True
        return self._announce(self.slots[st.pid][k], src), k

    def try_acquire(self, src: Location) -> Optional[tuple[int, Any]]:
        st = self.backend.thread_state()
        free = st.free_slots[self.index]
        if not free:
            return None
        idx = free.pop()
        if self.backend.debug:
            st.held[self.index] += 1
        return self._announce(self.slots[st.pid][idx], src), idx

    def release(self, guard: Any) -> None:
        st = self.backend.thread_state()
        k = self.backend.slots_per_thread
        if guard == k:
            if self.backend.debug:
                if not st.reserved_active[self.index]:
                    raise ProperExecutionError("reserved guard released twice")
                st.reserved_active[self.index] = False
            self.slots[st.pid][k].store(0)
            return
        if self.backend.debug:
            if not isinstance(guard, int) or not 0 <= guard < k or guard in st.free_slots[self.index]:
                raise ProperExecutionError(f"slot guard {guard!r} released twice or never acquired")
            st.held[self.index] -= 1
        self.slots[st.pid][guard].store(0)
        st.free_slots[self.index].append(guard)

    def _should_scan(self, st: ThreadState, retired: list[Any]) -> bool:
        return len(retired) > self.backend.scan_threshold

    def announced(self) -> collections.Counter[int]:
        counts: collections.Counter[int] = collections.Counter()
        for row in self.slots[: self.backend.high]:
            for slot in row:
                h = slot.load()
                if h:
                    counts[h] += 1
        return counts

    def _scan(self, st: ThreadState, retired: list[Any]) -> None:
        announced = self.announced()
        ready = st.ready[self.index]
        keep = []
        pinned = collections.Counter()
        # Oldest entries are released first; the newest `a` copies stay.
        for h in reversed(retired):
            a = announced.get(h, 0)
            if a and pinned[h] < a:
                pinned[h] += 1
                keep.append(h)
            else:
                ready.appendleft(h)
        keep.reverse()
        retired[:] = keep


class HpBackend(Backend):
    name = "hp"
    region = False

    def __init__(self, *args: Any, slots: int = DEFAULT_SLOTS, **kwargs: Any) -> None:
        if slots < 1:
            raise ConfigError("at least one try_acquire slot is required")
        self.slots_per_thread = slots
        super().__init__(*args, **kwargs)
        if kwargs.get("scan_threshold") is None:
            self.scan_threshold = 2 * self.max_threads * (slots + 1)

    instance_class = HpAcquireRetire

    def announcements(self) -> list[list[int]]:
        return [[s.load() for row in inst.slots[: self.high] for s in row] for inst in self.instances]
