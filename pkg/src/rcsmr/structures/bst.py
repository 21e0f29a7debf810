"""Natarajan-Mittal external binary search tree.

Keys live in leaves; internal nodes route (left: key < node.key).  Deleting a
leaf flags the edge above it, then tags the sibling edge and swings the
deepest clean edge on the path (ancestor -> successor) over to the sibling.
That one CAS can splice out a whole chain of nodes left behind by concurrent
deletes.  The manual tree retires every node on that chain; the
reference-counted tree simply lets the swing drop its reference.

Sentinels: ``R(INF2)`` with ``R.left = S(INF1)``; ``S.left`` holds the real
tree.  User keys must be below ``INF0``.
"""

from __future__ import annotations

from typing import Any, Optional

from ..atomics import AtomicWord
from ..ledger import MARK_MASK, Payload
from ..manual import ManualDomain
from ..rc import AtomicStrongRef, Managed, RcDomain
from .base import FLAG, TAG, ConcurrentMap

__all__ = ["INF0", "ManualBst", "RcBst", "MAX_KEY"]

INF0 = 1 << 62
INF1 = INF0 + 1
INF2 = INF0 + 2
MAX_KEY = INF0 - 1


class _MNode(Payload):
    __slots__ = ("key", "value", "left", "right")

    def __init__(self, key: int, value: Any = None, left: int = 0, right: int = 0) -> None:
        self.canary = 0
        self.key = key
        self.value = value
        self.left = AtomicWord(left)
        self.right = AtomicWord(right)


class _RNode(Managed):
    __slots__ = ("key", "value", "left", "right")
    _strong_cells = ("left", "right")

    def __init__(self, domain: RcDomain, key: int, value: Any = None) -> None:
        self.canary = 0
        self.key = key
        self.value = value
        self.left = AtomicStrongRef(domain)
        self.right = AtomicStrongRef(domain)


class _Role:
    """A protected node in the seek record (manual flavour)."""

    __slots__ = ("handle", "node", "guard")

    def __init__(self, handle: int, node: Any, guard: Any) -> None:
        self.handle = handle
        self.node = node
        self.guard = guard


class _Pinned:
    """A sentinel the tree owns forever; stands in for a snapshot."""

    __slots__ = ("handle", "node", "word")

    def __init__(self, handle: int, node: Any) -> None:
        self.handle = handle
        self.word = handle
        self.node = node

    def get(self) -> Any:
        return self.node

    def release(self) -> None:
        pass


def _check_key(key: int) -> None:
    if not 0 <= key < INF0:
        raise ValueError(f"key {key} outside [0, 2**62)")


def _drop(old: tuple, new: tuple, release) -> None:
    seen: list = []
    for x in old:
        if any(x is y for y in new) or any(x is y for y in seen):
            continue
        seen.append(x)
        release(x)


class ManualBst(ConcurrentMap):
    """Natarajan-Mittal tree with explicit retirement of spliced-out paths.

    Traversal is validated so it is also safe under hazard slots: stepping
    along a marked edge is only trusted after re-reading the clean
    ancestor -> successor edge (marked edges never change their target, and
    a spliced-out node has both of its edges marked).
    """

    def __init__(self, domain: ManualDomain) -> None:
        super().__init__(domain)
        d = domain
        leaf0 = d.alloc(_MNode(INF0))
        leaf1 = d.alloc(_MNode(INF1))
        leaf2 = d.alloc(_MNode(INF2))
        self._s_node = _MNode(INF1, None, leaf0, leaf1)
        s = d.alloc(self._s_node)
        self._r_node = _MNode(INF2, None, s, leaf2)
        r = d.alloc(self._r_node)
        self._r = _Role(r, self._r_node, None)
        self._s = _Role(s, self._s_node, None)

    def _release_role(self, role: _Role) -> None:
        if role.guard is not None:
            self.domain.release(role.guard)

    def _seek(self, key: int):
        """Returns ``(anc, succ, par, leaf, last_left)``; roles hold guards."""
        d = self.domain
        protect, deref, release = d.protect, d.deref, self._release_role
        while True:
            anc, succ, par = self._r, self._s, self._s
            w, g = protect(self._s_node.left)
            leaf = _Role(w & ~MARK_MASK, deref(w), g)
            parent_field = w
            last_left = INF1
            while True:
                node = leaf.node
                if not node.left.load():
                    return anc, succ, par, leaf, last_left
                nkey = node.key
                if key < nkey:
                    cell = node.left
                    last_left = nkey
                else:
                    cell = node.right
                if parent_field & TAG:
                    new_anc, new_succ = anc, succ
                else:
                    new_anc, new_succ = par, leaf
                w, g = protect(cell)
                if w & MARK_MASK:
                    an = new_anc.node
                    edge = an.left if key < an.key else an.right
                    if edge.load() != new_succ.handle:
                        d.release(g)
                        _drop((anc, succ, par, leaf, new_anc, new_succ), (), release)
                        break
                cur = _Role(w & ~MARK_MASK, deref(w), g)
                _drop((anc, succ, par), (new_anc, new_succ, leaf, cur), release)
                anc, succ, par, leaf = new_anc, new_succ, leaf, cur
                parent_field = w

    def _release_all(self, roles: tuple) -> None:
        _drop(roles[:4], (), self._release_role)

    def _cleanup(self, key: int, anc: _Role, succ: _Role, par: _Role) -> bool:
        an = anc.node
        succ_cell = an.left if key < an.key else an.right
        pn = par.node
        if key < pn.key:
            child, sibling = pn.left, pn.right
        else:
            child, sibling = pn.right, pn.left
        if not child.load() & FLAG:
            sibling = child
        sibling.fetch_or(TAG)
        sw = sibling.load()
        if not succ_cell.compare_and_swap(succ.handle, (sw & ~MARK_MASK) | (sw & FLAG)):
            return False
        self._retire_path(succ.handle, sw & ~MARK_MASK)
        return True

    def _retire_path(self, start: int, sibling: int) -> None:
        # Every edge on the spliced chain is marked, so nothing below moves.
        deref = self.domain.deref
        doomed = []
        n = start
        while True:
            node = deref(n)
            left, right = node.left.load(), node.right.load()
            doomed.append(n)
            if left & ~MARK_MASK == sibling:
                doomed.append(right & ~MARK_MASK)
                break
            if right & ~MARK_MASK == sibling:
                doomed.append(left & ~MARK_MASK)
                break
            if left & FLAG:
                doomed.append(left & ~MARK_MASK)
                n = right & ~MARK_MASK
            else:
                doomed.append(right & ~MARK_MASK)
                n = left & ~MARK_MASK
        for h in doomed:
            self.domain.retire(h)

    def insert(self, key: int, value: int) -> bool:
        _check_key(key)
        d = self.domain
        new_leaf = 0
        with d.critical_section():
            while True:
                roles = self._seek(key)
                anc, succ, par, leaf, _ = roles
                try:
                    lkey = leaf.node.key
                    if lkey == key:
                        if new_leaf:
                            d.free_unpublished(new_leaf)
                        return False
                    if not new_leaf:
                        new_leaf = d.alloc(_MNode(key, value))
                    pn = par.node
                    cell = pn.left if key < pn.key else pn.right
                    if key < lkey:
                        inner = _MNode(lkey, None, new_leaf, leaf.handle)
                    else:
                        inner = _MNode(key, None, leaf.handle, new_leaf)
                    ih = d.alloc(inner)
                    if cell.compare_and_swap(leaf.handle, ih):
                        return True
                    d.free_unpublished(ih)
                    w = cell.load()
                    if w & ~MARK_MASK == leaf.handle and w & MARK_MASK:
                        self._cleanup(key, anc, succ, par)
                finally:
                    self._release_all(roles)

    def remove(self, key: int) -> bool:
        _check_key(key)
        d = self.domain
        target = 0
        with d.critical_section():
            while True:
                roles = self._seek(key)
                anc, succ, par, leaf, _ = roles
                try:
                    if not target:
                        if leaf.node.key != key:
                            return False
                        pn = par.node
                        cell = pn.left if key < pn.key else pn.right
                        if cell.compare_and_swap(leaf.handle, leaf.handle | FLAG):
                            target = leaf.handle
                            if self._cleanup(key, anc, succ, par):
                                return True
                        else:
                            w = cell.load()
                            if w & ~MARK_MASK == leaf.handle and w & MARK_MASK:
                                self._cleanup(key, anc, succ, par)
                    else:
                        if leaf.handle != target:
                            return True
                        if self._cleanup(key, anc, succ, par):
                            return True
                finally:
                    self._release_all(roles)

    def lookup(self, key: int) -> Optional[int]:
        _check_key(key)
        with self.domain.critical_section():
            roles = self._seek(key)
            try:
                node = roles[3].node
                return node.value if node.key == key else None
            finally:
                self._release_all(roles)

    def range_query(self, lo: int, length: int) -> list[int]:
        hi = min(lo + length, INF0)
        out: list[int] = []
        d = self.domain
        with d.critical_section():
            if d.region:
                w, g = d.protect(self._s_node.left)
                d.release(g)
                self._rq_region(w, lo, hi, out)
            else:
                self._rq_seek(lo, hi, out)
        return out

    def _rq_region(self, word: int, lo: int, hi: int, out: list) -> None:
        # The critical section protects everything; guards only widen
        # reservations where the backend needs it.
        d = self.domain
        node = d.deref(word)
        if not node.left.load():
            if lo <= node.key < hi:
                out.append(node.value)
            return
        k = node.key
        if lo < k:
            w, g = d.protect(node.left)
            d.release(g)
            self._rq_region(w, lo, hi, out)
        if hi > k:
            w, g = d.protect(node.right)
            d.release(g)
            self._rq_region(w, lo, hi, out)

    def _rq_seek(self, lo: int, hi: int, out: list) -> None:
        # Few slots: find each successor with a fresh seek.
        k = lo
        while k < hi:
            roles = self._seek(k)
            node = roles[3].node
            lkey, value, last_left = node.key, node.value, roles[4]
            self._release_all(roles)
            if lkey >= k:
                if lkey >= hi:
                    return
                out.append(value)
                k = lkey + 1
            elif last_left < hi:
                k = last_left
            else:
                return

    # -- quiescent helpers ------------------------------------------------

    def _nodes(self):
        deref = self.domain.heap.deref
        stack = [self._r.handle]
        while stack:
            node = deref(stack.pop())
            yield node
            for w in (node.left.load(), node.right.load()):
                if w & ~MARK_MASK:
                    stack.append(w & ~MARK_MASK)

    def items(self) -> list[tuple[int, int]]:
        out = [(n.key, n.value) for n in self._nodes() if not n.left.load() and n.key < INF0]
        out.sort()
        return out

    def node_count(self) -> int:
        return sum(1 for _ in self._nodes())

    def destroy(self) -> None:
        d = self.domain
        handles = []
        stack = [self._r.handle]
        while stack:
            h = stack.pop()
            handles.append(h)
            node = d.heap.deref(h)
            for w in (node.left.load(), node.right.load()):
                if w & ~MARK_MASK:
                    stack.append(w & ~MARK_MASK)
        for h in handles:
            d.retire(h)
        d.collect()


class RcBst(ConcurrentMap):
    """Natarajan-Mittal tree on reference-counted nodes.

    The seek record is held as snapshots, so traversal needs no validation
    and the splice needs no retire loop.
    """

    def __init__(self, domain: RcDomain) -> None:
        super().__init__(domain)
        d = domain
        with d.critical_section():
            s = d.make_shared(_RNode(d, INF1))
            with d.make_shared(_RNode(d, INF0)) as leaf0, d.make_shared(_RNode(d, INF1)) as leaf1:
                s.get().left.store(leaf0)
                s.get().right.store(leaf1)
            self._root = d.make_shared(_RNode(d, INF2))
            r = self._root.get()
            with d.make_shared(_RNode(d, INF2)) as leaf2:
                r.right.store(leaf2)
            r.left.store_owned(s)
        self._r = _Pinned(self._root.handle, r)
        s_handle = r.left.load_word()
        self._s_node = d.heap.deref(s_handle)
        self._s = _Pinned(s_handle, self._s_node)

    @staticmethod
    def _release(x: Any) -> None:
        x.release()

    def _seek(self, key: int):
        anc, succ, par = self._r, self._s, self._s
        leaf = self._s_node.left.get_snapshot()
        parent_field = leaf.word
        last_left = INF1
        while True:
            node = leaf.get()
            if not node.left.load_word():
                return anc, succ, par, leaf, last_left
            nkey = node.key
            if key < nkey:
                cell = node.left
                last_left = nkey
            else:
                cell = node.right
            if parent_field & TAG:
                new_anc, new_succ = anc, succ
            else:
                new_anc, new_succ = par, leaf
            cur = cell.get_snapshot()
            _drop((anc, succ, par), (new_anc, new_succ, leaf, cur), self._release)
            anc, succ, par, leaf = new_anc, new_succ, leaf, cur
            parent_field = cur.word

    def _release_all(self, roles: tuple) -> None:
        _drop(roles[:4], (), self._release)

    def _cleanup(self, key: int, anc: Any, succ: Any, par: Any) -> bool:
        an = anc.get()
        succ_cell = an.left if key < an.key else an.right
        pn = par.get()
        if key < pn.key:
            child, sibling = pn.left, pn.right
        else:
            child, sibling = pn.right, pn.left
        if not child.load_word() & FLAG:
            sibling = child
        sibling.fetch_or_mark(TAG)
        with sibling.get_snapshot() as sib:
            return succ_cell.compare_and_swap(succ.handle, sib, sib.word & FLAG)

    def insert(self, key: int, value: int) -> bool:
        _check_key(key)
        d = self.domain
        with d.critical_section():
            with d.make_shared(_RNode(d, key, value)) as new_leaf:
                while True:
                    roles = self._seek(key)
                    anc, succ, par, leaf, _ = roles
                    try:
                        lkey = leaf.get().key
                        if lkey == key:
                            return False
                        pn = par.get()
                        cell = pn.left if key < pn.key else pn.right
                        with d.make_shared(_RNode(d, max(key, lkey))) as inner:
                            node = inner.get()
                            if key < lkey:
                                node.left.store(new_leaf)
                                node.right.store(leaf)
                            else:
                                node.left.store(leaf)
                                node.right.store(new_leaf)
                            if cell.compare_and_swap(leaf.handle, inner):
                                return True
                        w = cell.load_word()
                        if w & ~MARK_MASK == leaf.handle and w & MARK_MASK:
                            self._cleanup(key, anc, succ, par)
                    finally:
                        self._release_all(roles)

    def remove(self, key: int) -> bool:
        _check_key(key)
        d = self.domain
        target = 0
        with d.critical_section():
            while True:
                roles = self._seek(key)
                anc, succ, par, leaf, _ = roles
                try:
                    if not target:
                        if leaf.get().key != key:
                            return False
                        pn = par.get()
                        cell = pn.left if key < pn.key else pn.right
                        if cell.compare_and_set_mark(leaf.handle, FLAG):
                            target = leaf.handle
                            if self._cleanup(key, anc, succ, par):
                                return True
                        else:
                            w = cell.load_word()
                            if w & ~MARK_MASK == leaf.handle and w & MARK_MASK:
                                self._cleanup(key, anc, succ, par)
                    else:
                        if leaf.handle != target:
                            return True
                        if self._cleanup(key, anc, succ, par):
                            return True
                finally:
                    self._release_all(roles)

    def lookup(self, key: int) -> Optional[int]:
        _check_key(key)
        with self.domain.critical_section():
            roles = self._seek(key)
            try:
                node = roles[3].get()
                return node.value if node.key == key else None
            finally:
                self._release_all(roles)

    def range_query(self, lo: int, length: int) -> list[int]:
        hi = min(lo + length, INF0)
        out: list[int] = []
        with self.domain.critical_section():
            with self._s_node.left.get_snapshot() as top:
                self._rq(top, lo, hi, out)
        return out

    def _rq(self, snap: Any, lo: int, hi: int, out: list) -> None:
        # Every snapshot on the root path stays live while its subtree is read.
        node = snap.get()
        if not node.left.load_word():
            if lo <= node.key < hi:
                out.append(node.value)
            return
        k = node.key
        if lo < k:
            with node.left.get_snapshot() as child:
                self._rq(child, lo, hi, out)
        if hi > k:
            with node.right.get_snapshot() as child:
                self._rq(child, lo, hi, out)

    def _nodes(self):
        deref = self.domain.heap.deref
        stack = [self._r.handle]
        while stack:
            node = deref(stack.pop())
            yield node
            for w in (node.left.load_word(), node.right.load_word()):
                if w & ~MARK_MASK:
                    stack.append(w & ~MARK_MASK)

    def items(self) -> list[tuple[int, int]]:
        out = [(n.key, n.value) for n in self._nodes() if not n.left.load_word() and n.key < INF0]
        out.sort()
        return out

    def node_count(self) -> int:
        return sum(1 for _ in self._nodes())

    def owned(self) -> list[int]:
        return [self._root.handle] if self._root else []

    def destroy(self) -> None:
        self._root.release()
        self.domain.collect()
