"""Quiescent-point audits of reference counts and the allocation ledger.

Both audits assume no operation is in flight: workers parked between
operations, so no snapshot or guard is outstanding.  Deferred work may still
be pending in retired lists; the audits account for it.

Reference counting: for every live block ``h``

    strong(h) = strong cells holding h + owned references to h
                + pending deferred strong decrements of h
    weak(h)   = weak cells holding h + [strong(h) > 0 or dispose of h pending]
                + pending deferred weak decrements of h

where cells are counted in every payload not yet disposed and in the
structure's roots.  Manual reclamation: live blocks equal reachable nodes plus
retired-but-unfreed handles.
"""

from __future__ import annotations

import collections
from dataclasses import dataclass, field
from typing import Any, Optional

from ..ledger import MARK_MASK, POISON
from ..rc import AtomicWeakRef

__all__ = ["AuditReport", "audit", "audit_manual", "audit_rc"]


@dataclass
class AuditReport:
    checked: int = 0
    audits: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def merge(self, other: AuditReport, limit: int = 50) -> None:
        self.checked += other.checked
        self.audits += other.audits
        room = limit - len(self.violations)
        if room > 0:
            self.violations.extend(other.violations[:room])


def _held(word: int) -> int:
    if word == POISON:
        return 0
    return word & ~MARK_MASK


def audit_rc(structure: Any, domain: Any, *, limit: Optional[int] = None) -> AuditReport:
    """Check the strong- and weak-count rules on up to ``limit`` live blocks."""
    rep = AuditReport(audits=1)
    blocks = domain.heap.live_blocks()
    strong_refs: collections.Counter[int] = collections.Counter()
    weak_refs: collections.Counter[int] = collections.Counter()
    for b in blocks:
        if b.disposed:
            continue
        p = b.payload
        for name in p._strong_cells:
            h = _held(getattr(p, name).load_word())
            if h:
                strong_refs[h] += 1
        for name in p._weak_cells:
            h = _held(getattr(p, name).load_word())
            if h:
                weak_refs[h] += 1
    for cell in structure.roots():
        h = _held(cell.load_word())
        if h:
            (weak_refs if isinstance(cell, AtomicWeakRef) else strong_refs)[h] += 1
    for h in structure.owned():
        strong_refs[h] += 1
    pending_strong = domain.strong_ar.pending_handles()
    pending_weak = domain.weak_ar.pending_handles()
    pending_dispose = domain.dispose_ar.pending_handles()
    for b in blocks[:limit] if limit is not None else blocks:
        h = b.handle
        rep.checked += 1
        strong = b.strong.load()
        want = strong_refs[h] + pending_strong[h]
        if strong != want:
            rep.violations.append(
                f"{h:#x}: strong={strong}, expected {strong_refs[h]} refs + {pending_strong[h]} pending"
            )
        weak = b.weak.load()
        alive = 1 if strong > 0 or pending_dispose[h] else 0
        want_w = weak_refs[h] + alive + pending_weak[h]
        if weak != want_w:
            rep.violations.append(
                f"{h:#x}: weak={weak}, expected {weak_refs[h]} cells + {alive} + {pending_weak[h]} pending"
            )
        if b.disposed and (strong or pending_dispose[h]):
            rep.violations.append(f"{h:#x}: disposed while still strongly held")
    return rep


def audit_manual(structure: Any, domain: Any) -> AuditReport:
    """Ledger conservation: live = reachable + retired-but-unfreed."""
    rep = AuditReport(audits=1)
    live = domain.ledger.live
    reachable = structure.node_count()
    pending = domain.ar.pending()
    rep.checked = reachable
    if live != reachable + pending:
        rep.violations.append(f"live={live} but reachable={reachable} + pending={pending}")
    return rep


def audit(structure: Any, domain: Any, *, limit: Optional[int] = None) -> AuditReport:
    if getattr(domain, "automatic", False):
        return audit_rc(structure, domain, limit=limit)
    return audit_manual(structure, domain)
