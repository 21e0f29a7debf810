"""Harris-Michael sorted linked list and the Michael hash table built on it.

Removal marks a node's ``next`` word, then swings the predecessor past it.
Traversals unlink every marked node they meet and restart if that fails, so
a reader only ever steps through a node while its incoming edge is clean;
this is what lets the hazard-slot backend validate each step.

Both flavours share one algorithm.  The manual one retires a node after the
unlinking CAS succeeds.  The reference-counted one has no retire at all:
swinging the predecessor drops the cell's unit and reclamation follows.
"""

from __future__ import annotations

from typing import Any, Optional

from ..atomics import AtomicWord
from ..ledger import MARK_MASK, Payload
from ..rc import AtomicStrongRef, Managed, RcDomain
from ..manual import ManualDomain
from .base import DELETED, ConcurrentMap, bucket_of

__all__ = ["ManualList", "RcList", "ManualHashTable", "RcHashTable"]


class _MNode(Payload):
    __slots__ = ("key", "value", "next")

    def __init__(self, key: int, value: Any, nxt: int = 0) -> None:
        self.canary = 0
        self.key = key
        self.value = value
        self.next = AtomicWord(nxt)


class _RNode(Managed):
    __slots__ = ("key", "value", "next")
    _strong_cells = ("next",)

    def __init__(self, domain: RcDomain, key: int, value: Any) -> None:
        self.canary = 0
        self.key = key
        self.value = value
        self.next = AtomicStrongRef(domain)


class ManualList(ConcurrentMap):
    """Harris-Michael list, manual retire."""

    def __init__(self, domain: ManualDomain) -> None:
        super().__init__(domain)
        self.heads = [AtomicWord(0)]

    def _head(self, key: int) -> AtomicWord:
        return self.heads[0]

    def _walk(self, head: AtomicWord, key: int, hi: Optional[int] = None, out: Optional[list] = None):
        """Position at the first node with key >= ``key``.

        With ``out``, keep going and append values of keys in [key, hi).
        Returns ``(prev_cell, g_prev, curr, g_curr, node, next_word, g_next)``;
        the caller releases the three guards.
        """
        d = self.domain
        protect, release, deref = d.protect, d.release, d.deref
        while True:
            prev_cell, g_prev = head, None
            curr, g_curr = protect(head)
            while True:
                if not curr:
                    return prev_cell, g_prev, 0, g_curr, None, 0, None
                node = deref(curr)
                nxt, g_next = protect(node.next)
                if nxt & DELETED:
                    succ = nxt & ~MARK_MASK
                    if prev_cell.compare_and_swap(curr, succ):
                        release(g_curr)
                        d.retire(curr)
                        curr, g_curr = succ, g_next
                        continue
                    release(g_next)
                    release(g_curr)
                    release(g_prev)
                    if out is not None:
                        out.clear()
                    break
                k = node.key
                if k >= key:
                    if out is None or k >= hi:
                        return prev_cell, g_prev, curr, g_curr, node, nxt, g_next
                    out.append(node.value)
                release(g_prev)
                prev_cell, g_prev = node.next, g_curr
                curr, g_curr = nxt, g_next

    def _done(self, pos: tuple) -> None:
        release = self.domain.release
        release(pos[1])
        release(pos[3])
        release(pos[6])

    def insert(self, key: int, value: int) -> bool:
        d = self.domain
        head = self._head(key)
        new = 0
        payload = None
        with d.critical_section():
            while True:
                pos = self._walk(head, key)
                try:
                    prev_cell, _, curr, _, node, _, _ = pos
                    if node is not None and node.key == key:
                        if new:
                            d.free_unpublished(new)
                        return False
                    if not new:
                        payload = _MNode(key, value, curr)
                        new = d.alloc(payload)
                    else:
                        payload.next.store(curr)
                    if prev_cell.compare_and_swap(curr, new):
                        return True
                finally:
                    self._done(pos)

    def remove(self, key: int) -> bool:
        d = self.domain
        head = self._head(key)
        with d.critical_section():
            while True:
                pos = self._walk(head, key)
                prev_cell, _, curr, _, node, nxt, _ = pos
                if node is None or node.key != key:
                    self._done(pos)
                    return False
                if not node.next.compare_and_swap(nxt, nxt | DELETED):
                    self._done(pos)
                    continue
                unlinked = prev_cell.compare_and_swap(curr, nxt)
                self._done(pos)
                if unlinked:
                    d.retire(curr)
                else:
                    self._done(self._walk(head, key))
                return True

    def lookup(self, key: int) -> Optional[int]:
        with self.domain.critical_section():
            pos = self._walk(self._head(key), key)
            try:
                node = pos[4]
                return node.value if node is not None and node.key == key else None
            finally:
                self._done(pos)

    def range_query(self, lo: int, length: int) -> list[int]:
        out: list[int] = []
        with self.domain.critical_section():
            self._done(self._walk(self.heads[0], lo, lo + length, out))
        return out

    # -- quiescent helpers ------------------------------------------------

    def _chain(self, head: AtomicWord):
        deref = self.domain.heap.deref
        word = head.load()
        while word & ~MARK_MASK:
            node = deref(word)
            yield node
            word = node.next.load()

    def items(self) -> list[tuple[int, int]]:
        out = [
            (n.key, n.value)
            for head in self.heads
            for n in self._chain(head)
            if not n.next.load() & DELETED
        ]
        out.sort()
        return out

    def node_count(self) -> int:
        return sum(1 for head in self.heads for _ in self._chain(head))

    def destroy(self) -> None:
        d = self.domain
        for head in self.heads:
            handles = []
            word = head.load()
            while word & ~MARK_MASK:
                h = word & ~MARK_MASK
                handles.append(h)
                word = d.heap.deref(h).next.load()
            head.store(0)
            for h in handles:
                d.retire(h)
        d.collect()


class ManualHashTable(ManualList):
    """Michael hash table: one Harris-Michael chain per bucket."""

    ordered = False

    def __init__(self, domain: ManualDomain, n_buckets: int) -> None:
        super().__init__(domain)
        self.heads = [AtomicWord(0) for _ in range(max(1, n_buckets))]

    def _head(self, key: int) -> AtomicWord:
        return self.heads[bucket_of(key, len(self.heads))]

    def range_query(self, lo: int, length: int) -> list[int]:
        return ConcurrentMap.range_query(self, lo, length)


class RcList(ConcurrentMap):
    """Harris-Michael list over reference-counted nodes; no retire calls."""

    def __init__(self, domain: RcDomain) -> None:
        super().__init__(domain)
        self.heads = [AtomicStrongRef(domain)]

    def _head(self, key: int) -> AtomicStrongRef:
        return self.heads[0]

    def _walk(self, head: AtomicStrongRef, key: int, hi: Optional[int] = None, out: Optional[list] = None):
        """Like the manual walk, with snapshots standing in for guards.

        Returns ``(prev_cell, prev, curr, node, nxt)``; ``prev``, ``curr`` and
        ``nxt`` are snapshots (``prev``/``nxt`` may be None) the caller releases.
        """
        while True:
            prev_cell, prev = head, None
            curr = head.get_snapshot()
            while True:
                if not curr:
                    return prev_cell, prev, curr, None, None
                node = curr.get()
                nxt = node.next.get_snapshot()
                if nxt.word & DELETED:
                    if prev_cell.compare_and_swap(curr.handle, nxt):
                        curr.release()
                        curr = nxt
                        continue
                    nxt.release()
                    curr.release()
                    if prev is not None:
                        prev.release()
                    if out is not None:
                        out.clear()
                    break
                k = node.key
                if k >= key:
                    if out is None or k >= hi:
                        return prev_cell, prev, curr, node, nxt
                    out.append(node.value)
                if prev is not None:
                    prev.release()
                prev_cell, prev = node.next, curr
                curr = nxt

    @staticmethod
    def _done(pos: tuple) -> None:
        if pos[1] is not None:
            pos[1].release()
        pos[2].release()
        if pos[4] is not None:
            pos[4].release()

    def insert(self, key: int, value: int) -> bool:
        d = self.domain
        head = self._head(key)
        new = None
        with d.critical_section():
            try:
                while True:
                    pos = self._walk(head, key)
                    try:
                        prev_cell, _, curr, node, _ = pos
                        if node is not None and node.key == key:
                            return False
                        if new is None:
                            payload = _RNode(d, key, value)
                            new = d.make_shared(payload)
                        payload.next.store(curr)
                        if prev_cell.compare_and_swap(curr.handle, new):
                            return True
                    finally:
                        self._done(pos)
            finally:
                if new is not None:
                    new.release()

    def remove(self, key: int) -> bool:
        d = self.domain
        head = self._head(key)
        with d.critical_section():
            while True:
                pos = self._walk(head, key)
                prev_cell, _, curr, node, nxt = pos
                if node is None or node.key != key:
                    self._done(pos)
                    return False
                if not node.next.compare_and_set_mark(nxt.word, DELETED):
                    self._done(pos)
                    continue
                unlinked = prev_cell.compare_and_swap(curr.handle, nxt)
                self._done(pos)
                if not unlinked:
                    self._done(self._walk(head, key))
                return True

    def lookup(self, key: int) -> Optional[int]:
        with self.domain.critical_section():
            pos = self._walk(self._head(key), key)
            try:
                node = pos[3]
                return node.value if node is not None and node.key == key else None
            finally:
                self._done(pos)

    def range_query(self, lo: int, length: int) -> list[int]:
        out: list[int] = []
        with self.domain.critical_section():
            self._done(self._walk(self.heads[0], lo, lo + length, out))
        return out

    def _chain(self, head: AtomicStrongRef):
        deref = self.domain.heap.deref
        word = head.load_word()
        while word & ~MARK_MASK:
            node = deref(word)
            yield node
            word = node.next.load_word()

    def items(self) -> list[tuple[int, int]]:
        out = [
            (n.key, n.value)
            for head in self.heads
            for n in self._chain(head)
            if not n.next.load_word() & DELETED
        ]
        out.sort()
        return out

    def node_count(self) -> int:
        return sum(1 for head in self.heads for _ in self._chain(head))

    def roots(self) -> list[AtomicStrongRef]:
        return list(self.heads)

    def destroy(self) -> None:
        d = self.domain
        with d.critical_section():
            for head in self.heads:
                head.store(None)
        d.collect()


class RcHashTable(RcList):
    ordered = False

    def __init__(self, domain: RcDomain, n_buckets: int) -> None:
        super().__init__(domain)
        self.heads = [AtomicStrongRef(domain) for _ in range(max(1, n_buckets))]

    def _head(self, key: int) -> AtomicStrongRef:
        return self.heads[bucket_of(key, len(self.heads))]

    def range_query(self, lo: int, length: int) -> list[int]:
        return ConcurrentMap.range_query(self, lo, length)
