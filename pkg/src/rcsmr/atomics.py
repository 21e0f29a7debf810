"""Single-word shared memory cells.

Python has no hardware atomics, so every read-modify-write on a word is
serialized by a per-word lock.  Plain loads never take the lock: reading an
attribute is already indivisible under the interpreter, and every writer goes
through the lock, so a load always observes some linearized value.

``Register`` is the cheaper cousin used for announcement arrays, where only
the owning thread ever writes and nothing is ever compared-and-swapped.
"""

from __future__ import annotations

from threading import Lock

__all__ = ["AtomicWord", "Register"]


class AtomicWord:
    """A shared word supporting load/store/FAS/CAS/FAA, sequentially consistent."""

    __slots__ = ("_value", "_lock")

    def __init__(self, value: int = 0) -> None:
        self._value = value
        self._lock = Lock()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self._value:#x})"

    def load(self) -> int:
        return self._value

    def store(self, value: int) -> None:
        with self._lock:
            self._value = value

    def exchange(self, value: int) -> int:
        with self._lock:
            old = self._value
            self._value = value
            return old

    def compare_and_swap(self, expected: int, desired: int) -> bool:
        with self._lock:
            if self._value == expected:
                self._value = desired
                return True
            return False

    def compare_exchange(self, expected: int, desired: int) -> tuple[bool, int]:
        """CAS that also reports the witnessed value, like C++ ``compare_exchange``."""
        with self._lock:
            current = self._value
            if current == expected:
                self._value = desired
                return True, current
            return False, current

    def fetch_add(self, delta: int) -> int:
        with self._lock:
            old = self._value
            self._value = old + delta
            return old

    def fetch_or(self, bits: int) -> int:
        with self._lock:
            old = self._value
            self._value = old | bits
            return old

    def poison(self, value: int) -> None:
        """Overwrite on dispose; stale readers see ``value`` from now on."""
        self.store(value)


class Register:
    """Single-writer, multi-reader word (announcement slots, epoch reservations)."""

    __slots__ = ("_value",)

    def __init__(self, value: int = 0) -> None:
        self._value = value

    def __repr__(self) -> str:
        return f"Register({self._value!r})"

    def load(self) -> int:
        return self._value

    def store(self, value: int) -> None:
        self._value = value

    def poison(self, value: int) -> None:
        self._value = value
