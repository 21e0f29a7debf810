"""Deterministic interleaving of library code on greenlets.

While a ``Scheduler`` is active, every shared-memory step (each method of
``AtomicWord`` and ``Register``) first hands control back to the scheduler,
which decides which simulated thread performs the next step.  Each simulated
thread is a greenlet with its own context, so per-thread registration works
unchanged.

``explore`` enumerates schedules depth-first by replaying choice prefixes,
bounded by the number of preemptions (switching away from a thread that could
have continued).  Every run starts from a fresh ``setup()``.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Optional, Sequence

import greenlet

from ..atomics import AtomicWord, Register

__all__ = ["Scheduler", "ScheduleResult", "explore", "run_schedule", "current_thread", "point", "step_count", "tick"]

_PATCHED = {
    AtomicWord: ("load", "store", "exchange", "compare_and_swap", "compare_exchange", "fetch_add", "fetch_or", "poison"),
    Register: ("load", "store"),
}

_active: Optional["Scheduler"] = None


def _wrap(orig: Callable) -> Callable:
    def step(self, *args):
        s = _active
        if s is not None:
            s._yield()
        return orig(self, *args)

    step.__wrapped__ = orig
    return step


@contextmanager
def _patched() -> Iterator[None]:
    saved = []
    for cls, names in _PATCHED.items():
        for name in names:
            orig = cls.__dict__[name]
            saved.append((cls, name, orig))
            setattr(cls, name, _wrap(orig))
    try:
        yield
    finally:
        for cls, name, orig in saved:
            setattr(cls, name, orig)


class _Thread:
    __slots__ = ("tid", "glet", "done", "error")

    def __init__(self, tid: int, glet: greenlet.greenlet) -> None:
        self.tid = tid
        self.glet = glet
        self.done = False
        self.error: Optional[BaseException] = None


class _Diverged(Exception):
    pass


class Scheduler:
    """Runs thread bodies to completion under a given choice prefix.

    ``seq`` is a global sequence number bumped on every shared step and on
    every ``tick()``; it gives logged events a total order.
    """

    def __init__(self, prefix: Sequence[int] = (), max_steps: int = 10_000, rng: Any = None) -> None:
        self.prefix = list(prefix)
        self.rng = rng
        self.max_steps = max_steps
        self.trace: list[tuple[tuple[int, ...], int, int]] = []
        self.threads: list[_Thread] = []
        self.current: Optional[_Thread] = None
        self.seq = 0
        self._main: Optional[greenlet.greenlet] = None

    # -- inside simulated threads ----------------------------------------

    def _yield(self) -> None:
        g = greenlet.getcurrent()
        if self.current is None or g is not self.current.glet:
            return  # setup or checking code on the main greenlet
        self._main.switch()
        self.seq += 1

    def tick(self) -> int:
        """Timestamp a non-atomic event."""
        self.seq += 1
        return self.seq

    # -- driver -----------------------------------------------------------

    def run(self, bodies: Sequence[Callable[[], Any]]) -> None:
        global _active
        if _active is not None:
            raise RuntimeError("schedulers do not nest")
        self._main = greenlet.getcurrent()
        self.threads = [_Thread(i, greenlet.greenlet(self._body(i, b))) for i, b in enumerate(bodies)]
        _active = self
        try:
            with _patched():
                self._loop()
        finally:
            _active = None

    def _body(self, tid: int, fn: Callable[[], Any]) -> Callable[[], None]:
        def body() -> None:
            t = self.threads[tid]
            try:
                fn()
            except BaseException as exc:  # reported through the result
                t.error = exc
            finally:
                t.done = True

        return body

    def _loop(self) -> None:
        # Run each thread up to its first shared step.  That prelude is
        # thread-local, so its order is not a real scheduling choice.
        for t in self.threads:
            self.current = t
            t.glet.switch()
            self.current = None
        prev: Optional[int] = None
        steps = 0
        while True:
            enabled = tuple(t.tid for t in self.threads if not t.done)
            if not enabled:
                return
            steps += 1
            if steps > self.max_steps:
                raise RuntimeError(f"schedule exceeded {self.max_steps} steps")
            k = len(self.trace)
            if k < len(self.prefix):
                choice = self.prefix[k]
                if choice not in enabled:
                    raise _Diverged(f"prefix choice {choice} not enabled at step {k}")
            elif self.rng is not None:
                choice = self.rng.choice(enabled)
            else:
                choice = prev if prev in enabled else enabled[0]
            self.trace.append((enabled, prev if prev is not None else -1, choice))
            prev = choice
            t = self.threads[choice]
            self.current = t
            t.glet.switch()
            self.current = None


def current_thread() -> int:
    """Simulated thread id of the caller (-1 on the driver)."""
    s = _active
    if s is None or s.current is None:
        return -1
    return s.current.tid


def point() -> None:
    """An explicit scheduling point for steps that touch no atomic word."""
    s = _active
    if s is not None:
        s._yield()


def step_count() -> int:
    s = _active
    return s.seq if s is not None else 0


def tick() -> int:
    s = _active
    return s.tick() if s is not None else 0


@dataclass
class ScheduleResult:
    schedules: int = 0
    failures: list[dict] = field(default_factory=list)
    truncated: bool = False

    @property
    def ok(self) -> bool:
        return not self.failures


def _preemptions(trace: Sequence[tuple[tuple[int, ...], int, int]]) -> int:
    return sum(1 for enabled, prev, c in trace if prev in enabled and c != prev)


def explore(
    setup: Callable[[], tuple[Sequence[Callable[[], Any]], Callable[[], Optional[str]]]],
    *,
    max_preemptions: int = 2,
    max_schedules: int = 50_000,
    max_failures: int = 5,
) -> ScheduleResult:
    """Run every schedule of ``setup()``'s bodies up to the preemption bound.

    ``setup`` returns the thread bodies and a checker called after each
    complete run; the checker returns a failure message or None.  A body that
    raises is a failure too.
    """
    result = ScheduleResult()
    work: list[list[int]] = [[]]
    while work:
        if result.schedules >= max_schedules:
            result.truncated = True
            break
        prefix = work.pop()
        sched, msg = run_schedule(setup, prefix)
        result.schedules += 1
        if msg and len(result.failures) < max_failures:
            result.failures.append({"message": msg, "schedule": [c for _, _, c in sched.trace]})
        trace = sched.trace
        for i in range(len(trace) - 1, len(prefix) - 1, -1):
            enabled, prev, chosen = trace[i]
            base = _preemptions(trace[:i])
            for alt in enabled:
                if alt == chosen:
                    continue
                cost = base + (1 if prev in enabled and alt != prev else 0)
                if cost <= max_preemptions:
                    work.append([c for _, _, c in trace[:i]] + [alt])
    return result


def run_schedule(setup, schedule: Sequence[int] = (), rng: Any = None):
    """Run one schedule (a recorded prefix, then ``rng`` or the default policy).

    Returns ``(scheduler, message)``; the message is None on success.
    """
    bodies, check = setup()
    sched = Scheduler(schedule, rng=rng)
    sched.run(bodies)
    errors = [t for t in sched.threads if t.error is not None]
    if errors:
        t = errors[0]
        return sched, f"thread {t.tid} raised {type(t.error).__name__}: {t.error}"
    return sched, check()
