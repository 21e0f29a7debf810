"""Weak references: cells, owned weak references and weak snapshots.

A weak reference owns a unit of the weak count, which also carries one
extra unit while the strong count is non-zero.  The payload is disposed when
the strong count reaches zero; the block (and its counts) is freed only when
the weak count does.  A ``WeakSnapshotRef`` protects the payload against
disposal through the dispose instance, so it stays readable even if the
object expires while the snapshot is held.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional, Union

from ..acquire_retire import ProperExecutionError
from ..atomics import AtomicWord
from ..ledger import MARK_MASK, POISON, MemorySafetyError
from .strong import SnapshotRef, StrongRef, _OwnedRef

if TYPE_CHECKING:
    from .core import RcDomain

__all__ = ["AtomicWeakRef", "WeakRef", "WeakSnapshotRef"]


class WeakRef(_OwnedRef):
    """Owns one weak unit; must be upgraded before the payload can be read."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"WeakRef({self.handle:#x})"

    @classmethod
    def from_ref(cls, ref: Union[StrongRef, SnapshotRef, WeakSnapshotRef]) -> WeakRef:
        h = ref.handle
        if h:
            ref.domain.weak_increment(h)
        return cls(ref.domain, h)

    def upgrade(self) -> StrongRef:
        """A strong reference, or a null one if the object has expired."""
        h = self.handle
        if h and self.domain.increment(h):
            return StrongRef(self.domain, h)
        return StrongRef(self.domain, 0)

    def expired(self) -> bool:
        return not self.handle or self.domain.expired(self.handle)

    def copy(self) -> WeakRef:
        if self.handle:
            self.domain.weak_increment(self.handle)
        return WeakRef(self.domain, self.handle)

    def release(self) -> None:
        h = self.handle
        if h:
            self.handle = 0
            self.domain.weak_decrement(h)


class WeakSnapshotRef(SnapshotRef):
    """Readable view of an object that may expire while the view is held.

    The guard lives in the dispose instance; ``guard is None`` means the
    slow path, where the snapshot owns a strong unit instead.
    """

    __slots__ = ()

    def release(self) -> None:
        if not self.live:
            raise ProperExecutionError("weak snapshot released twice")
        self.live = False
        if not self.handle:
            return
        if self.guard is not None:
            self.domain.dispose_ar.release(self.guard)
        else:
            self.domain.decrement(self.handle)


class _Local:
    """A thread-private location, used to protect an already-read handle."""

    __slots__ = ("word",)

    def __init__(self, word: int) -> None:
        self.word = word

    def load(self) -> int:
        return self.word


class AtomicWeakRef:
    """Shared cell of weak references."""

    __slots__ = ("domain", "word")
    kind = "weak"

    def __init__(self, domain: RcDomain, word: int = 0) -> None:
        self.domain = domain
        self.word = AtomicWord(word)

    def __repr__(self) -> str:
        return f"AtomicWeakRef({self.word.load():#x})"

    def load_word(self) -> int:
        return self.word.load()

    def store(self, desired: Optional[Union[WeakRef, StrongRef, SnapshotRef]] = None) -> None:
        domain = self.domain
        h = desired.handle if desired else 0
        if h:
            domain.weak_increment(h)
        old = self.word.exchange(h)
        if old == POISON:
            domain.heap.ledger.on_poison_read()
            raise MemorySafetyError("store into a disposed cell", counted=True)
        old &= ~MARK_MASK
        if old:
            domain.delayed_weak_decrement(old)

    def load(self) -> WeakRef:
        domain = self.domain
        ar = domain.weak_ar
        word, guard = ar.acquire(self.word)
        h = word & ~MARK_MASK
        if h:
            domain.weak_increment(h)
        ar.release(guard)
        return WeakRef(domain, h)

    def compare_and_swap(self, expected: Union[int, _OwnedRef, SnapshotRef, None], desired: Optional[Union[WeakRef, StrongRef, SnapshotRef]]) -> bool:
        domain = self.domain
        if expected is None:
            expected_word = 0
        elif isinstance(expected, int):
            expected_word = expected
        else:
            expected_word = expected.handle
        ar = domain.weak_ar
        if desired:
            h, guard = ar.acquire(desired)
        else:
            h, guard = 0, None
        if self.word.compare_and_swap(expected_word, h):
            if h:
                domain.weak_increment(h)
            old = expected_word & ~MARK_MASK
            if old:
                domain.delayed_weak_decrement(old)
            if guard is not None:
                ar.release(guard)
            return True
        if guard is not None:
            ar.release(guard)
        return False

    def get_snapshot(self) -> WeakSnapshotRef:
        """Protected view of the current object, or null if it has expired.

        Returns null only when the cell still holds the expired handle it
        read (or is null); if the cell changed meanwhile, it retries.
        """
        domain = self.domain
        weak_ar = domain.weak_ar
        dispose_ar = domain.dispose_ar
        while True:
            word, weak_guard = weak_ar.acquire(self.word)
            h = word & ~MARK_MASK
            got = dispose_ar.try_acquire(_Local(h))
            dispose_guard = got[1] if got is not None else None
            alive = True
            if h and dispose_guard is None:
                # Fallback: own a strong unit; failure means already expired.
                alive = domain.increment(h)
                if alive:
                    domain.backend.thread_state().slow_snapshots += 1
            if h and alive and not domain.expired(h):
                weak_ar.release(weak_guard)
                return WeakSnapshotRef(domain, dispose_ar, word, dispose_guard)
            if dispose_guard is not None:
                dispose_ar.release(dispose_guard)
            weak_ar.release(weak_guard)
            if not h or self.word.load() == word:
                return WeakSnapshotRef(domain, dispose_ar, 0, None)

    def take(self) -> int:
        return self.word.exchange(POISON)

    def poison(self, value: int) -> None:
        self.word.poison(value)
