"""Simulated managed heap with allocation accounting and poison canaries.

A handle is an integer "address" that is a multiple of 4, leaving the two low
bits for data-structure marks.  Addresses are never reused, so a handle that
outlives its allocation can always be told apart from a live one.

Every block carries the control header (strong and weak counts, birth epoch)
next to its payload.  Disposing a payload overwrites its ``canary`` and every
field with ``POISON``; freeing removes the block from the address map.  Any
later dereference through a stale handle raises ``MemorySafetyError`` and is
tallied in the ledger, which is how the stress tests observe use-after-free.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from threading import Lock
from typing import Any

from .sticky import StickyCounter

__all__ = [
    "MARK_MASK",
    "POISON",
    "NULL",
    "POISONED",
    "Block",
    "Heap",
    "Ledger",
    "LedgerSnapshot",
    "MemorySafetyError",
    "Payload",
    "canonical",
    "mark_of",
]

NULL = 0
MARK_MASK = 0b11
# Fixed odd word: never a valid canonical handle, so dereferencing a poisoned
# field always faults.
POISON = 0xDEADBEEFDEADBEEF


def canonical(word: int) -> int:
    return word & ~MARK_MASK


def mark_of(word: int) -> int:
    return word & MARK_MASK


class MemorySafetyError(RuntimeError):
    """A payload was read after dispose, or a handle was used after free.

    ``counted`` tells whether the ledger already tallied this fault.
    """

    def __init__(self, message: str, counted: bool = False) -> None:
        super().__init__(message)
        self.counted = counted


class _Poisoned:
    """Stands in for a plain field of a disposed payload; any use faults."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "POISONED"

    def _fault(self, *_: Any) -> Any:
        raise MemorySafetyError("use of a poisoned field")

    __eq__ = __ne__ = __lt__ = __le__ = __gt__ = __ge__ = _fault
    __hash__ = __bool__ = __int__ = __index__ = __add__ = __radd__ = _fault
    __sub__ = __rsub__ = __and__ = __rand__ = __or__ = __ror__ = _fault


POISONED = _Poisoned()


class Payload:
    """Base for managed payloads.

    ``canary`` is the payload's first word.  Subclasses list the attributes
    that must be poisoned on dispose in ``__slots__``.
    """

    __slots__ = ("canary",)

    def __init__(self) -> None:
        self.canary = 0

    def poison(self) -> None:
        for cls in type(self).__mro__:
            for name in getattr(cls, "__slots__", ()):
                value = getattr(self, name, None)
                if hasattr(value, "poison"):
                    value.poison(POISON)
                else:
                    setattr(self, name, POISONED)
        self.canary = POISON


class Block:
    """Control header plus payload for one managed allocation."""

    __slots__ = ("handle", "strong", "weak", "birth", "payload", "disposed", "freed")

    def __init__(self, handle: int, payload: Any, birth: int, counted: bool = True) -> None:
        self.handle = handle
        # Manual-SMR allocations carry no counts.
        self.strong = StickyCounter(1) if counted else None
        self.weak = StickyCounter(1) if counted else None
        self.birth = birth
        self.payload = payload
        self.disposed = False
        self.freed = False


@dataclass(frozen=True)
class LedgerSnapshot:
    allocs: int
    disposes: int
    frees: int
    poison_reads: int

    @property
    def live(self) -> int:
        return self.allocs - self.frees


class Ledger:
    """Global allocation / dispose / free tallies."""

    def __init__(self) -> None:
        self._lock = Lock()
        self.allocs = 0
        self.disposes = 0
        self.frees = 0
        self.poison_reads = 0
        self.peak_live = 0

    @property
    def live(self) -> int:
        return self.allocs - self.frees

    def on_alloc(self) -> None:
        with self._lock:
            self.allocs += 1
            live = self.allocs - self.frees
            if live > self.peak_live:
                self.peak_live = live

    def on_dispose(self) -> None:
        with self._lock:
            self.disposes += 1

    def on_free(self) -> None:
        with self._lock:
            self.frees += 1
            assert self.frees <= self.disposes <= self.allocs, "ledger ordering violated"

    def on_poison_read(self) -> None:
        with self._lock:
            self.poison_reads += 1

    def snapshot(self) -> LedgerSnapshot:
        with self._lock:
            return LedgerSnapshot(self.allocs, self.disposes, self.frees, self.poison_reads)


class Heap:
    """Address map from canonical handles to live blocks."""

    def __init__(self, ledger: Ledger | None = None) -> None:
        self.ledger = ledger if ledger is not None else Ledger()
        self._blocks: dict[int, Block] = {}
        self._next = itertools.count(1)

    def __len__(self) -> int:
        return len(self._blocks)

    def allocate(self, payload: Any, birth: int = 0, counted: bool = True) -> Block:
        handle = next(self._next) << 2
        block = Block(handle, payload, birth, counted)
        self._blocks[handle] = block
        self.ledger.on_alloc()
        return block

    def block(self, word: int) -> Block:
        """Header lookup; valid until the block is freed."""
        block = self._blocks.get(word & ~MARK_MASK)
        if block is None:
            self.ledger.on_poison_read()
            raise MemorySafetyError(f"use after free: {word:#x}", counted=True)
        return block

    def deref(self, word: int) -> Any:
        """Payload lookup; valid until the payload is disposed."""
        block = self._blocks.get(word & ~MARK_MASK)
        if block is None:
            self.ledger.on_poison_read()
            raise MemorySafetyError(f"use after free: {word:#x}", counted=True)
        payload = block.payload
        if block.disposed or payload.canary == POISON:
            self.ledger.on_poison_read()
            raise MemorySafetyError(f"read of disposed payload: {word:#x}", counted=True)
        return payload

    def check(self, payload: Any) -> Any:
        """Re-validate a payload read earlier (fields may have been poisoned since)."""
        if payload.canary == POISON:
            self.ledger.on_poison_read()
            raise MemorySafetyError("read of disposed payload", counted=True)
        return payload

    def dispose(self, block: Block) -> None:
        assert not block.disposed, f"double dispose of {block.handle:#x}"
        block.disposed = True
        block.payload.poison()
        self.ledger.on_dispose()

    def free(self, block: Block) -> None:
        assert block.disposed, f"free before dispose of {block.handle:#x}"
        assert not block.freed, f"double free of {block.handle:#x}"
        block.freed = True
        del self._blocks[block.handle]
        self.ledger.on_free()

    def live_blocks(self) -> list[Block]:
        return list(self._blocks.values())
