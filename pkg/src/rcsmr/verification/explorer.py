"""Exhaustive interleaving checker for the sticky counter.

The counter algorithm is re-encoded here as a value-level state machine: a
word and, per thread, a program counter inside one of the three operations.
Each transition performs exactly one shared-memory step (fetch-add, CAS,
exchange or load), so enumerating transitions enumerates every sequentially
consistent interleaving.

Correctness is judged against an abstract counter that knows nothing about
flags: ``inc`` succeeds iff the count is positive, ``dec`` reports whether it
brought the count to zero, ``load`` returns the count.  Linearizability is
checked on the fly by carrying the set of abstract configurations consistent
with the history so far; a response that no configuration explains is a
violation.  A depth-first search memoized on the full state (word, threads,
configurations, credits) visits each state once and counts schedules by
dynamic programming.

Two program shapes are supported: fixed per-thread op lists, and the open
mode where every idle thread nondeterministically picks its next op (``dec``
only while it owns a unit) or stops, up to ``max_ops`` ops.  A start value of
0 means "logical one with a decrement already past its fetch-add": thread 0
begins inside that decrement.
"""

from __future__ import annotations

import itertools
import sys
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..sticky import HELP_FLAG, ZERO_FLAG

__all__ = ["ExploreReport", "explore", "explore_all", "sequential_apply", "unit_distributions"]

Z, H = ZERO_FLAG, HELP_FLAG
OPS = ("inc", "dec", "load")
IDLE = -1


def sequential_apply(count: int, op: str) -> Optional[tuple[int, object]]:
    """The abstract counter.  ``None`` when ``dec`` is applied at zero."""
    if op == "inc":
        return (count + 1, True) if count > 0 else (count, False)
    if op == "dec":
        return None if count == 0 else (count - 1, count == 1)
    return count, count


def _step(word: int, op: str, pc: int):
    """One atomic step.  Returns ``(word, next_pc, response, event)``.

    ``next_pc`` is None once the op has responded; ``event`` names the credit
    path taken by a decrement, if any.
    """
    if op == "inc":
        return word + 1, None, not word & Z, None
    if op == "dec":
        if pc == 0:
            return word - 1, (1 if word == 1 else None), False, None
        if pc == 1:
            if word == 0:
                return Z, None, True, "cas"
            return word, (2 if word & H else None), False, None
        return Z, None, bool(word & H), ("help" if word & H else None)
    if pc == 0:
        if word == 0:
            return word, 1, None, None
        return word, None, 0 if word & Z else word, None
    if word == 0:
        return Z | H, None, 0, None
    return word, None, 0 if word & Z else word, None


def _close(configs: frozenset, pending: Sequence[Optional[str]], strict: bool = True) -> frozenset:
    """All configurations reachable by linearizing pending, unlinearized ops.

    Without ``strict`` a decrement's boolean is left out of the abstract
    result, so only the counter values have to be explained.
    """
    out = set(configs)
    frontier = list(configs)
    while frontier:
        count, lin = frontier.pop()
        for i, op in enumerate(pending):
            if op is None or lin[i] is not None:
                continue
            applied = sequential_apply(count, op)
            if applied is None:
                continue
            nc, res = applied
            if op == "dec" and not strict:
                res = None
            new = (nc, lin[:i] + ((res,),) + lin[i + 1 :])
            if new not in out:
                out.add(new)
                frontier.append(new)
    return frozenset(out)


def _respond(configs: frozenset, i: int, result) -> frozenset:
    """Keep configurations that linearized thread ``i``'s op with ``result``."""
    return frozenset((c, lin[:i] + (None,) + lin[i + 1 :]) for c, lin in configs if lin[i] == (result,))


@dataclass
class ExploreReport:
    start: int
    programs: object
    units: tuple
    strict: bool = True
    states: int = 0
    schedules: int = 0
    help_schedules: int = 0
    credited_schedules: int = 0
    violations: list[str] = field(default_factory=list)
    complete: bool = True
    warnings: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.complete and not self.violations

    def as_dict(self) -> dict:
        return {
            "start": self.start,
            "programs": self.programs if isinstance(self.programs, str) else [list(p) for p in self.programs],
            "units": list(self.units),
            "strict": self.strict,
            "states": self.states,
            "schedules": self.schedules,
            "help_schedules": self.help_schedules,
            "credited_schedules": self.credited_schedules,
            "violations": self.violations,
            "complete": self.complete,
            "warnings": self.warnings,
            "seconds": round(self.seconds, 3),
        }


class _Budget(Exception):
    pass


class _Explorer:
    # Thread tuple: (pc, op, ops_done, units_owned); pc is IDLE between ops.
    def __init__(self, report: ExploreReport, fixed: Optional[list], max_ops: int, max_states: int, max_violations: int):
        self.r = report
        self.strict = report.strict
        self.fixed = fixed
        self.max_ops = max_ops
        self.max_states = max_states
        self.max_violations = max_violations
        self.memo: dict = {}

    def _violate(self, msg: str, path: list) -> None:
        if len(self.r.violations) < self.max_violations:
            self.r.violations.append(f"{msg}; trace: {' '.join(path)}")

    def _choices(self, t: tuple, i: int) -> list[str]:
        pc, op, done, units = t
        if pc != IDLE:
            return [op]
        if self.fixed is not None:
            prog = self.fixed[i]
            return [prog[done]] if done < len(prog) else []
        if done >= self.max_ops:
            return []
        return [o for o in OPS if o != "dec" or units > 0]

    def run(self, word: int, threads: tuple, configs: frozenset, credits: int, path: list):
        """Returns ``(schedules, help_schedules, credited_schedules, bad)``."""
        key = (word, threads, configs, credits)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if len(self.memo) >= self.max_states:
            raise _Budget
        total = helped = credited = bad = 0
        moved = False
        for i, t in enumerate(threads):
            for op in self._choices(t, i):
                moved = True
                res = self._transition(word, threads, configs, credits, i, op, path)
                total += res[0]
                helped += res[1]
                credited += res[2]
                bad += res[3]
        if not moved:
            total, credited = 1, int(credits > 0)
            bad = self._final_check(word, configs, credits, path)
        out = (total, helped, credited, bad)
        self.memo[key] = out
        return out

    def _transition(self, word, threads, configs, credits, i, op, path):
        pc, _, done, units = threads[i]
        invoking = pc == IDLE
        if invoking:
            if op == "dec" and units == 0:
                # Fixed program whose unit never arrived (an inc failed).
                nt = (IDLE, None, done + 1, units)
                path.append(f"t{i}:skip-dec")
                try:
                    return self.run(word, threads[:i] + (nt,) + threads[i + 1 :], configs, credits, path)
                finally:
                    path.pop()
            pc = 0
            if op == "dec":
                units -= 1
            pending = [t[1] if t[0] >= 0 else None for t in threads]
            pending[i] = op
            configs = _close(configs, pending, self.strict)
        nw, npc, resp, event = _step(word, op, pc)
        label = f"t{i}:{op}@{pc}"
        path.append(label)
        try:
            bad = 0
            if word & Z and not nw & Z:
                self._violate(f"zero flag cleared by t{i} {op}", path)
                bad += 1
            if npc is None:
                configs = _respond(configs, i, None if op == "dec" and not self.strict else resp)
                if not configs:
                    self._violate(f"t{i} {op} returned {resp!r}, not linearizable", path)
                    return 1, 0, 0, bad + 1
                if op == "dec" and resp:
                    credits += 1
                if op == "inc" and resp:
                    units += 1
                nt = (IDLE, None, done + 1, units)
            else:
                nt = (npc, op, done, units)
            threads = threads[:i] + (nt,) + threads[i + 1 :]
            if npc is None:
                pending = [t[1] if t[0] >= 0 else None for t in threads]
                configs = _close(configs, pending, self.strict)
            total, helped, credited, sub_bad = self.run(nw, threads, configs, credits, path)
            if event == "help":
                helped = total
            return total, helped, credited, bad + sub_bad
        finally:
            path.pop()

    def _final_check(self, word, configs, credits, path) -> int:
        counts = {c for c, _ in configs}
        if len(counts) != 1:
            self._violate(f"final abstract count ambiguous: {sorted(counts)}", path)
            return 1
        (count,) = counts
        bad = 0
        if count == 0 and credits != 1:
            self._violate(f"count reached zero with {credits} credited decrements", path)
            bad += 1
        if count > 0 and credits != 0:
            self._violate(f"{credits} decrements credited while count is {count}", path)
            bad += 1
        if bool(word & Z) != (count == 0):
            self._violate(f"final word {word:#x} disagrees with logical count {count}", path)
            bad += 1
        return bad


def explore(
    start: int,
    programs: Optional[Sequence[Sequence[str]]] = None,
    *,
    threads: int = 3,
    max_ops: int = 4,
    units: Optional[Sequence[int]] = None,
    max_states: int = 2_000_000,
    max_violations: int = 20,
    strict: bool = True,
) -> ExploreReport:
    """Explore one starting configuration.

    ``units`` gives how many units each thread owns initially; their sum must
    equal ``start`` (or be 0 when ``start`` is 0, the phantom decrement holding
    the only unit).  With ``programs`` the op lists are fixed and a ``dec``
    with no unit to give back is skipped; by default units go to the threads
    with the most decrements.  Without ``programs`` threads choose ops freely.

    ``strict`` makes a decrement's boolean part of the linearizability check;
    otherwise only counter values must linearize and the credit is judged by
    the exactly-once rule alone.
    """
    if start < 0:
        raise ValueError("start value must be >= 0")
    if programs is not None:
        programs = [tuple(p) for p in programs]
        threads = len(programs)
        for p in programs:
            for op in p:
                if op not in OPS:
                    raise ValueError(f"unknown op {op!r}")
        if units is None:
            units = [0] * threads
            left = start
            for i in sorted(range(threads), key=lambda j: -programs[j].count("dec")):
                units[i] = min(left, programs[i].count("dec"))
                left -= units[i]
            units[0] += left
    elif units is None:
        units = (start,) + (0,) * (threads - 1)
    units = tuple(units)
    if len(units) != threads or min(units, default=0) < 0 or sum(units) != start:
        raise ValueError("units must give one non-negative share per thread summing to start")
    if threads > 3 or (programs is None and max_ops > 4) or (programs is not None and max(map(len, programs), default=0) > 4):
        raise ValueError("bounded to 3 threads x 4 ops")
    report = ExploreReport(start=start, programs=programs if programs is not None else "open", units=units, strict=strict)
    ex = _Explorer(report, programs, max_ops, max_states, max_violations)
    thread_states = [(IDLE, None, 0, u) for u in units]
    abstract = start
    word = start
    if start == 0:
        # Phantom decrement: thread 0 already moved the word from 1 to 0.
        abstract = 1
        done0 = 0
        if programs is not None:
            if not programs or not programs[0] or programs[0][0] != "dec":
                raise ValueError("start 0 needs thread 0 to begin with the pending dec")
        thread_states[0] = (1, "dec", done0, 0)
    lin0 = tuple(None for _ in thread_states)
    pending = [t[1] for t in thread_states]
    configs = _close(frozenset({(abstract, lin0)}), pending, strict)
    t0 = time.perf_counter()
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10_000))
    try:
        total, helped, credited, _ = ex.run(word, tuple(thread_states), configs, 0, [])
        report.schedules, report.help_schedules, report.credited_schedules = total, helped, credited
    except _Budget:
        report.complete = False
        report.warnings.append(f"state budget of {max_states} exhausted; coverage is partial")
    finally:
        sys.setrecursionlimit(limit)
    report.states = len(ex.memo)
    report.seconds = time.perf_counter() - t0
    return report


def unit_distributions(start: int, threads: int = 3) -> Iterable[tuple[int, ...]]:
    """Every way to hand ``start`` units to ``threads`` threads."""
    if start == 0:
        yield (0,) * threads
        return
    for cuts in itertools.combinations_with_replacement(range(start + 1), threads - 1):
        bounds = (0, *cuts, start)
        yield tuple(bounds[k + 1] - bounds[k] for k in range(threads))


def explore_all(
    starts: Sequence[int] = (0, 1, 2, 3),
    *,
    threads: int = 3,
    max_ops: int = 4,
    max_states: int = 2_000_000,
    strict: bool = True,
) -> list[ExploreReport]:
    """The open-mode sweep over every start value and unit distribution."""
    return [
        explore(s, threads=threads, max_ops=max_ops, units=u, max_states=max_states, strict=strict)
        for s in starts
        for u in unit_distributions(s, threads)
    ]
