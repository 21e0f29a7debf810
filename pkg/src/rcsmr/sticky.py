"""Wait-free sticky counter: increment-if-not-zero, decrement and load in O(1).

The top bit of the word means "logically zero"; once it is set it is never
cleared, which is what makes zero sticky.  The stored value 0 is *not* zero:
a decrement that lands on 0 still has to publish the flag, and a racing
increment may get there first.  A load that sees 0 helps by installing
``ZERO_FLAG | HELP_FLAG``; the decrement that later notices the help bit
swaps it out with an exchange and takes credit for reaching zero.

Every operation is a fixed sequence of at most three atomic steps.
"""

from __future__ import annotations

from .atomics import AtomicWord

__all__ = [
    "WORD_BITS",
    "ZERO_FLAG",
    "HELP_FLAG",
    "MAX_COUNT",
    "StickyCounter",
]

WORD_BITS = 64
ZERO_FLAG = 1 << (WORD_BITS - 1)
HELP_FLAG = 1 << (WORD_BITS - 2)
# Logical values live strictly below the help bit.
MAX_COUNT = HELP_FLAG - 1


class StickyCounter:
    """A reference count whose zero state is absorbing.

    Post-zero failed increments keep bumping the low bits; it takes 2**62 of
    them to reach the help bit, which is not guarded against.
    """

    __slots__ = ("_word",)

    def __init__(self, initial: int = 1) -> None:
        if not 0 <= initial <= MAX_COUNT:
            raise ValueError(f"initial count {initial} outside [0, {MAX_COUNT}]")
        self._word = AtomicWord(initial)

    def __repr__(self) -> str:
        return f"StickyCounter(load={self.load()}, raw={self.raw:#x})"

    @property
    def raw(self) -> int:
        """Physical word, for tests and diagnostics."""
        return self._word.load()

    def increment_if_not_zero(self) -> bool:
        return not self._word.fetch_add(1) & ZERO_FLAG

    def increment(self) -> None:
        """Unconditional increment for callers that already own a unit."""
        self._word.fetch_add(1)

    def decrement(self) -> bool:
        """Drop one unit; True iff this call is credited with reaching zero."""
        word = self._word
        if word.fetch_add(-1) == 1:
            ok, seen = word.compare_exchange(0, ZERO_FLAG)
            if ok:
                return True
            if seen & HELP_FLAG and word.exchange(ZERO_FLAG) & HELP_FLAG:
                return True
        return False

    def load(self) -> int:
        word = self._word
        seen = word.load()
        if seen == 0:
            ok, seen = word.compare_exchange(0, ZERO_FLAG | HELP_FLAG)
            if ok:
                return 0
        return 0 if seen & ZERO_FLAG else seen
