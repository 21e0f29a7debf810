"""Seeded random-schedule trials of the weak-snapshot replacement race.

A weak cell holds A.  A writer swaps B into the cell and then drops the last
strong reference to A, so the cell always holds a live object.  A reader
takes a weak snapshot concurrently.  The reader may find A already expired;
it must then notice that the cell moved on and retry, never returning null.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from ..rc import Managed
from ..structures import make_domain
from . import sched

__all__ = ["RaceReport", "replacement_race"]


class _Obj(Managed):
    __slots__ = ("tag",)

    def __init__(self, tag: str) -> None:
        self.canary = 0
        self.tag = tag


@dataclass
class RaceReport:
    scheme: str
    trials: int = 0
    null_snapshots: int = 0
    saw_expired: int = 0
    got_old: int = 0
    got_new: int = 0
    leaks: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and self.null_snapshots == 0 and self.leaks == 0


def _trial(scheme: str, seed: int, rep: RaceReport) -> Optional[str]:
    d = make_domain(scheme, max_threads=4, debug=True)
    out: dict = {}
    with d.thread():
        a = d.make_shared(_Obj("A"))
        b = d.make_shared(_Obj("B"))
        cell = d.atomic_weak(a)
        ha, hb = a.handle, b.handle
        expired_seen = [0]
        plain_expired = d.expired

        def expired(h: int) -> bool:
            res = plain_expired(h)
            if res and sched.current_thread() == 0:
                expired_seen[0] += 1
            return res

        d.expired = expired

        def reader() -> None:
            with d.thread(), d.critical_section():
                snap = cell.get_snapshot()
                out["handle"] = snap.handle
                snap.release()

        def writer() -> None:
            with d.thread():
                with d.critical_section():
                    cell.store(b)
                a.release()

        sched.run_schedule(lambda: ([reader, writer], lambda: None), rng=random.Random(seed))
        d.expired = plain_expired
        with d.critical_section():
            cell.store(None)
        b.release()
        d.collect()
    rep.trials += 1
    rep.saw_expired += bool(expired_seen[0])
    h = out.get("handle")
    if h is None:
        return "reader did not finish"
    if h == 0:
        rep.null_snapshots += 1
        return f"null snapshot (seed {seed})"
    if h == ha:
        rep.got_old += 1
    elif h == hb:
        rep.got_new += 1
    else:
        return f"snapshot of unknown handle {h:#x}"
    if d.ledger.live:
        rep.leaks += 1
        return f"{d.ledger.live} allocations leaked (seed {seed})"
    return None


def replacement_race(scheme: str, trials: int = 10_000, seed: int = 0) -> RaceReport:
    """Run ``trials`` random schedules; trial ``i`` uses seed ``seed + i``."""
    rep = RaceReport(scheme)
    for i in range(trials):
        msg = _trial(scheme, seed + i, rep)
        if msg and len(rep.failures) < 10:
            rep.failures.append(msg)
    return rep
