"""Shared pieces of the concurrent structures: interfaces, marks, oracles."""

from __future__ import annotations

import bisect
import collections
from abc import ABC, abstractmethod
from typing import Any, Iterable, Optional

__all__ = [
    "DELETED",
    "FLAG",
    "TAG",
    "ConcurrentMap",
    "ConcurrentQueue",
    "SequentialMap",
    "SequentialQueue",
    "bucket_of",
]

# Low-bit marks on stored handles.
DELETED = 0b01  # list: this node is logically removed
FLAG = 0b01  # bst: the leaf below this edge is being deleted
TAG = 0b10  # bst: this edge is frozen, its parent is being spliced out

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def bucket_of(key: int, n_buckets: int) -> int:
    """Fibonacci hashing of a 64-bit key into ``n_buckets``."""
    return (((key * _GOLDEN) & _MASK64) >> 17) % n_buckets


class ConcurrentMap(ABC):
    """Set of 64-bit integer keys with attached values.

    Every operation opens and closes its own critical section; the calling
    thread must be registered with the structure's domain (``domain.thread()``).
    """

    kind = "map"
    ordered = True

    def __init__(self, domain: Any) -> None:
        self.domain = domain

    @abstractmethod
    def insert(self, key: int, value: int) -> bool: ...

    @abstractmethod
    def remove(self, key: int) -> bool: ...

    @abstractmethod
    def lookup(self, key: int) -> Optional[int]: ...

    def range_query(self, lo: int, length: int) -> list[int]:
        raise NotImplementedError(f"{type(self).__name__} keeps no key order")

    # Quiescent-only helpers: no concurrent mutators may be running.

    @abstractmethod
    def items(self) -> list[tuple[int, int]]:
        """Logically present (key, value) pairs in key order."""

    @abstractmethod
    def node_count(self) -> int:
        """Allocations reachable from the roots, sentinels included."""

    @abstractmethod
    def destroy(self) -> None:
        """Unlink everything and drain deferred work."""

    def keys(self) -> list[int]:
        return [k for k, _ in self.items()]

    # Reference-counted variants expose their roots for count audits.

    def roots(self) -> list[Any]:
        """Atomic reference cells held outside any managed node."""
        return []

    def owned(self) -> list[int]:
        """Handles of plain owned references held by the structure itself."""
        return []


class ConcurrentQueue(ABC):
    kind = "queue"
    ordered = False

    def __init__(self, domain: Any) -> None:
        self.domain = domain

    @abstractmethod
    def enqueue(self, value: int) -> None: ...

    @abstractmethod
    def dequeue(self) -> Optional[int]: ...

    @abstractmethod
    def items(self) -> list[int]: ...

    @abstractmethod
    def node_count(self) -> int: ...

    @abstractmethod
    def destroy(self) -> None: ...

    # Reference-counted variants expose their roots for count audits.

    def roots(self) -> list[Any]:
        """Atomic reference cells held outside any managed node."""
        return []

    def owned(self) -> list[int]:
        """Handles of plain owned references held by the structure itself."""
        return []


class SequentialMap:
    """Reference semantics for ``ConcurrentMap``: a dict plus a sorted key list."""

    def __init__(self, items: Iterable[tuple[int, int]] = ()) -> None:
        self._d: dict[int, int] = {}
        self._keys: list[int] = []
        for k, v in items:
            self.insert(k, v)

    def insert(self, key: int, value: int) -> bool:
        if key in self._d:
            return False
        self._d[key] = value
        bisect.insort(self._keys, key)
        return True

    def remove(self, key: int) -> bool:
        if key not in self._d:
            return False
        del self._d[key]
        del self._keys[bisect.bisect_left(self._keys, key)]
        return True

    def lookup(self, key: int) -> Optional[int]:
        return self._d.get(key)

    def range_query(self, lo: int, length: int) -> list[int]:
        i = bisect.bisect_left(self._keys, lo)
        j = bisect.bisect_left(self._keys, lo + length)
        return [self._d[k] for k in self._keys[i:j]]

    def items(self) -> list[tuple[int, int]]:
        return [(k, self._d[k]) for k in self._keys]

    def keys(self) -> list[int]:
        return list(self._keys)

    def __len__(self) -> int:
        return len(self._d)


class SequentialQueue:
    def __init__(self, items: Iterable[int] = ()) -> None:
        self._q = collections.deque(items)

    def enqueue(self, value: int) -> None:
        self._q.append(value)

    def dequeue(self) -> Optional[int]:
        return self._q.popleft() if self._q else None

    def items(self) -> list[int]:
        return list(self._q)

    def __len__(self) -> int:
        return len(self._q)
