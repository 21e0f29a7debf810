"""Ramalhete-Correia doubly-linked queue.

Each node points forward to its successor and back to its predecessor.  An
enqueuer first helps the previous enqueue publish its ``next`` link (found
through the tail's ``prev``), then swings ``tail``.  The back pointer is what
makes the queue cyclic: in the reference-counted version it is a weak
reference, so dequeued nodes still get reclaimed.

The manual version uses plain hazard-style protection: a dequeuer clears
the new head's ``prev`` before retiring the old head, so an enqueuer that
re-validates ``tail.prev`` after protecting it can never reach a retired node.
"""

from __future__ import annotations

from typing import Any, Optional

from ..atomics import AtomicWord
from ..ledger import MARK_MASK, Payload
from ..manual import ManualDomain
from ..rc import AtomicStrongRef, AtomicWeakRef, Managed, RcDomain
from .base import ConcurrentQueue

__all__ = ["ManualQueue", "RcQueue"]


class _MNode(Payload):
    __slots__ = ("value", "next", "prev")

    def __init__(self, value: Any) -> None:
        self.canary = 0
        self.value = value
        self.next = AtomicWord(0)
        self.prev = AtomicWord(0)


class _RNode(Managed):
    __slots__ = ("value", "next", "prev")
    _strong_cells = ("next",)
    _weak_cells = ("prev",)

    def __init__(self, domain: RcDomain, value: Any) -> None:
        self.canary = 0
        self.value = value
        self.next = AtomicStrongRef(domain)
        self.prev = AtomicWeakRef(domain)


class ManualQueue(ConcurrentQueue):
    def __init__(self, domain: ManualDomain) -> None:
        super().__init__(domain)
        sentinel = domain.alloc(_MNode(None))
        self.head = AtomicWord(sentinel)
        self.tail = AtomicWord(sentinel)

    def enqueue(self, value: int) -> None:
        d = self.domain
        node = _MNode(value)
        h = d.alloc(node)
        with d.critical_section():
            while True:
                ltail, g_tail = d.protect(self.tail)
                tail_node = d.deref(ltail)
                node.prev.store(ltail)
                lprev, g_prev = d.protect(tail_node.prev)
                if lprev:
                    prev_node = d.deref(lprev)
                    if not prev_node.next.load():
                        prev_node.next.store(ltail)
                d.release(g_prev)
                if self.tail.compare_and_swap(ltail, h):
                    tail_node.next.store(h)
                    d.release(g_tail)
                    return
                d.release(g_tail)

    def dequeue(self) -> Optional[int]:
        d = self.domain
        with d.critical_section():
            while True:
                lhead, g_head = d.protect(self.head)
                head_node = d.deref(lhead)
                lnext, g_next = d.protect(head_node.next)
                if self.head.load() != lhead:
                    d.release(g_next)
                    d.release(g_head)
                    continue
                if not lnext:
                    d.release(g_next)
                    d.release(g_head)
                    return None
                if self.head.compare_and_swap(lhead, lnext):
                    next_node = d.deref(lnext)
                    value = next_node.value
                    next_node.prev.store(0)
                    d.release(g_next)
                    d.release(g_head)
                    d.retire(lhead)
                    return value
                d.release(g_next)
                d.release(g_head)

    def _chain(self):
        deref = self.domain.heap.deref
        word = self.head.load()
        while word:
            node = deref(word)
            yield node
            word = node.next.load()

    def items(self) -> list[int]:
        return [n.value for n in self._chain()][1:]

    def node_count(self) -> int:
        # A node whose tail swing landed but whose next store did not is
        # impossible at quiescence, so the chain from head reaches tail.
        return sum(1 for _ in self._chain())

    def destroy(self) -> None:
        d = self.domain
        handles = []
        word = self.head.load()
        while word:
            handles.append(word)
            word = d.heap.deref(word).next.load()
        self.head.store(0)
        self.tail.store(0)
        for h in handles:
            d.retire(h)
        d.collect()


class RcQueue(ConcurrentQueue):
    """The queue with strong ``next`` links and weak ``prev`` links."""

    def __init__(self, domain: RcDomain) -> None:
        super().__init__(domain)
        d = domain
        self.head = AtomicStrongRef(d)
        self.tail = AtomicStrongRef(d)
        with d.critical_section():
            with d.make_shared(_RNode(d, None)) as sentinel:
                self.head.store(sentinel)
                self.tail.store(sentinel)

    def enqueue(self, value: int) -> None:
        d = self.domain
        new = d.make_shared(_RNode(d, value))
        new_node = new.get()
        with d.critical_section():
            while True:
                with self.tail.get_snapshot() as ltail:
                    tail_node = ltail.get()
                    new_node.prev.store(ltail)
                    with tail_node.prev.get_snapshot() as lprev:
                        if lprev and not lprev.get().next.load_word():
                            lprev.get().next.store(ltail)
                    if self.tail.compare_and_swap(ltail, new):
                        tail_node.next.store_owned(new)
                        return

    def dequeue(self) -> Optional[int]:
        d = self.domain
        with d.critical_section():
            while True:
                with self.head.get_snapshot() as lhead:
                    with lhead.get().next.get_snapshot() as lnext:
                        if not lnext:
                            return None
                        if self.head.compare_and_swap(lhead, lnext):
                            return lnext.get().value

    def _chain(self):
        deref = self.domain.heap.deref
        word = self.head.load_word()
        while word & ~MARK_MASK:
            node = deref(word)
            yield node
            word = node.next.load_word()

    def items(self) -> list[int]:
        return [n.value for n in self._chain()][1:]

    def node_count(self) -> int:
        """Chain nodes plus expired blocks still pinned by a ``prev`` link."""
        chain = set()
        pinned = set()
        for node in self._chain():
            chain.add(id(node))
            prev = node.prev.load_word() & ~MARK_MASK
            if prev:
                pinned.add(prev)
        heap = self.domain.heap
        expired = {h for h in pinned if heap.block(h).disposed}
        return len(chain) + len(expired)

    def roots(self) -> list[Any]:
        return [self.head, self.tail]

    def destroy(self) -> None:
        d = self.domain
        with d.critical_section():
            self.head.store(None)
            self.tail.store(None)
        d.collect()
