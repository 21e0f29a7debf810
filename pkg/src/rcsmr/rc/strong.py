"""Strong references: shared cells, owned references and snapshots.

``AtomicStrongRef`` is a shared mutable cell; every non-null handle stored in
it owns one strong unit.  ``StrongRef`` is a thread-owned reference that owns
one unit.  ``SnapshotRef`` is a thread-confined view obtained from a cell:
on the fast path it holds only an acquire guard and touches no count; when
the backend runs out of guards it falls back to owning a unit.

Python has no destructors to lean on, so owned references are dropped with
``release()`` (or by using them as context managers).
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional, Union

from ..acquire_retire import ProperExecutionError
from ..atomics import AtomicWord
from ..ledger import MARK_MASK, POISON, MemorySafetyError

if TYPE_CHECKING:
    from .core import RcDomain

__all__ = ["AtomicStrongRef", "SnapshotRef", "StrongRef", "RefLike"]


class _OwnedRef:
    __slots__ = ("domain", "handle")

    def __init__(self, domain: RcDomain, handle: int) -> None:
        self.domain = domain
        self.handle = handle

    def __bool__(self) -> bool:
        return self.handle != 0

    def __enter__(self):
        return self

    def __exit__(self, *exc: Any) -> None:
        self.release()

    def load(self) -> int:
        """Location protocol: a reference is a cell holding its own handle."""
        return self.handle

    def release(self) -> None:
        raise NotImplementedError


class StrongRef(_OwnedRef):
    """Owns one strong unit of ``handle`` (or is null)."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"StrongRef({self.handle:#x})"

    def get(self) -> Any:
        return self.domain.heap.deref(self.handle)

    def copy(self) -> StrongRef:
        if self.handle:
            self.domain.add_strong(self.handle)
        return StrongRef(self.domain, self.handle)

    def release(self) -> None:
        h = self.handle
        if h:
            self.handle = 0
            self.domain.decrement(h)

    def take(self) -> int:
        """Give up ownership without touching the count."""
        h, self.handle = self.handle, 0
        return h


class SnapshotRef:
    """Protected, count-free (fast path) view of an object read from a cell.

    ``word`` keeps the mark bits the cell held; ``handle`` has them cleared.
    ``guard is None`` marks the slow path, where the snapshot owns a unit.
    """

    __slots__ = ("domain", "ar", "word", "handle", "guard", "live")

    def __init__(self, domain: RcDomain, ar: Any, word: int, guard: Any) -> None:
        self.domain = domain
        self.ar = ar
        self.word = word
        self.handle = word & ~MARK_MASK
        self.guard = guard
        self.live = True

    def __repr__(self) -> str:
        path = "slow" if self.guard is None else "fast"
        return f"{type(self).__name__}({self.word:#x}, {path})"

    def __bool__(self) -> bool:
        return self.handle != 0

    def __enter__(self):
        return self

    def __exit__(self, *exc: Any) -> None:
        self.release()

    def __copy__(self):
        raise TypeError("snapshots are move-only")

    __deepcopy__ = __copy__

    @property
    def mark(self) -> int:
        return self.word & MARK_MASK

    def load(self) -> int:
        return self.handle

    def get(self) -> Any:
        return self.domain.heap.deref(self.handle)

    def release(self) -> None:
        if not self.live:
            raise ProperExecutionError("snapshot released twice")
        self.live = False
        if not self.handle:
            return
        if self.guard is not None:
            self.ar.release(self.guard)
        else:
            self.domain.decrement(self.handle)


RefLike = Union[StrongRef, SnapshotRef]


class AtomicStrongRef:
    """Shared cell of strong references (mark bits allowed in the low 2 bits)."""

    __slots__ = ("domain", "word")
    kind = "strong"

    def __init__(self, domain: RcDomain, word: int = 0) -> None:
        self.domain = domain
        self.word = AtomicWord(word)

    def __repr__(self) -> str:
        return f"AtomicStrongRef({self.word.load():#x})"

    def load_word(self) -> int:
        """Raw read: the handle and marks, no protection, no count."""
        return self.word.load()

    def store(self, desired: Optional[RefLike] = None, mark: int = 0) -> None:
        domain = self.domain
        h = desired.handle if desired else 0
        if h:
            domain.add_strong(h)
        old = self.word.exchange(h | mark)
        if old == POISON:
            domain.heap.ledger.on_poison_read()
            raise MemorySafetyError("store into a disposed cell", counted=True)
        old &= ~MARK_MASK
        if old:
            domain.delayed_decrement(old)

    def store_owned(self, desired: StrongRef, mark: int = 0) -> None:
        """Move an owned reference into the cell (no increment)."""
        h = desired.take()
        old = self.word.exchange(h | mark) & ~MARK_MASK
        if old:
            self.domain.delayed_decrement(old)

    def load(self) -> StrongRef:
        domain = self.domain
        ar = domain.strong_ar
        word, guard = ar.acquire(self.word)
        h = word & ~MARK_MASK
        if h:
            domain.increment(h)
        ar.release(guard)
        return StrongRef(domain, h)

    def compare_and_swap(
        self, expected: Union[int, RefLike, None], desired: Optional[RefLike], mark: int = 0
    ) -> bool:
        """CAS the cell from ``expected`` (a word, with marks) to ``desired|mark``."""
        domain = self.domain
        if expected is None:
            expected_word = 0
        elif isinstance(expected, int):
            expected_word = expected
        else:
            expected_word = expected.word if isinstance(expected, SnapshotRef) else expected.handle
        ar = domain.strong_ar
        if desired:
            h, guard = ar.acquire(desired)
        else:
            h, guard = 0, None
        if self.word.compare_and_swap(expected_word, h | mark):
            if h:
                domain.add_strong(h)
            old = expected_word & ~MARK_MASK
            if old:
                domain.delayed_decrement(old)
            if guard is not None:
                ar.release(guard)
            return True
        if guard is not None:
            ar.release(guard)
        return False

    def compare_and_set_mark(self, expected: int, mark: int) -> bool:
        """Change only the mark bits; the owned handle is unchanged."""
        return self.word.compare_and_swap(expected, (expected & ~MARK_MASK) | mark)

    def fetch_or_mark(self, mark: int) -> int:
        return self.word.fetch_or(mark & MARK_MASK)

    def get_snapshot(self) -> SnapshotRef:
        domain = self.domain
        ar = domain.strong_ar
        got = ar.try_acquire(self.word)
        if got is not None:
            word, guard = got
            if not word & ~MARK_MASK:
                ar.release(guard)
                guard = None
            return SnapshotRef(domain, ar, word, guard)
        word, guard = ar.acquire(self.word)
        h = word & ~MARK_MASK
        if h:
            domain.add_strong(h)
            domain.backend.thread_state().slow_snapshots += 1
        ar.release(guard)
        return SnapshotRef(domain, ar, word, None)

    def take(self) -> int:
        """Dispose-time teardown: empty the cell, handing its unit to the caller."""
        return self.word.exchange(POISON)

    def poison(self, value: int) -> None:
        self.word.poison(value)
