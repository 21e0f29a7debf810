"""Multi-threaded workload driver.

One driver thread prefills the structure, releases the workers through a
barrier, samples the ledger every ``sample_ms`` and finally stops, drains and
tears everything down.  Workers are registered library threads running the
op mix with their own seeded generators.

Throughput counts only operations completed after the warmup (the first
``warmup_frac`` of the run).  The driver can also pause all workers between
operations to run an audit on a quiescent structure; the stress harness uses
that hook.
"""

from __future__ import annotations

import random
import threading
import time
from typing import Any, Callable, Optional

from ..ledger import MemorySafetyError
from ..structures import make_domain, make_structure
from .config import RunResult, WorkloadConfig

__all__ = ["Run", "run", "run_repeated", "node_bytes"]

# Words per node payload, and header words on top of it.
_PAYLOAD_WORDS = {"list": 3, "hash": 3, "bst": 4, "dlqueue": 3}
_WORD = 8


def node_bytes(structure: str, scheme: str) -> int:
    """Estimated bytes per allocation: payload words plus the control header."""
    header = 1  # allocator size word
    if scheme.startswith("rc-"):
        header += 2  # strong and weak counts
    if scheme.endswith("ibr"):
        header += 1  # birth epoch
    return (_PAYLOAD_WORDS[structure] + header) * _WORD


def _seed_for(seed: int, worker: int) -> int:
    return seed * 1_000_003 + worker + 1


# Counter slots per worker.
INS, REM, LOOK, RQ, ENQ, DEQ, OPS = range(7)


class Run:
    """One configured run; ``execute`` may be called once."""

    def __init__(
        self,
        cfg: WorkloadConfig,
        *,
        audit: Optional[Callable[[Any, Any], None]] = None,
        audit_every_s: float = 0.0,
        repeat_index: int = 0,
    ) -> None:
        self.cfg = cfg
        self.audit = audit
        self.audit_every_s = audit_every_s
        self.result = RunResult.from_config(cfg, repeat_index)
        self.domain = make_domain(cfg.scheme, **cfg.backend_options())
        self.structure: Any = None
        self.counters = [[0] * 7 for _ in range(cfg.threads)]
        self._stop = False
        self._pause = False
        self._parked = 0
        self._finished = 0
        self._cond = threading.Condition()
        self._errors: list[str] = []
        self._uncounted_faults = 0
        self._err_lock = threading.Lock()

    # -- workers ----------------------------------------------------------

    def _op_loop(self, idx: int, rng: random.Random) -> None:
        cfg = self.cfg
        s = self.structure
        c = self.counters[idx]
        limit = cfg.ops_per_thread
        rand, randrange = rng.random, rng.randrange
        key_range = cfg.key_range
        if cfg.structure == "dlqueue":
            while not self._stop:
                if self._pause:
                    self._park()
                if limit is not None and c[OPS] >= limit:
                    return
                v = s.dequeue()
                c[DEQ] += 1
                c[OPS] += 1
                if v is None:
                    continue
                s.enqueue(v)
                c[ENQ] += 1
                c[OPS] += 1
            return
        upd = cfg.update_pct / 100.0
        rq = upd + cfg.rq_pct / 100.0
        rq_size = cfg.rq_size
        while not self._stop:
            if self._pause:
                self._park()
            if limit is not None and c[OPS] >= limit:
                return
            r = rand()
            key = randrange(key_range)
            if r < upd:
                if rand() < 0.5:
                    s.insert(key, key)
                    c[INS] += 1
                else:
                    s.remove(key)
                    c[REM] += 1
            elif r < rq:
                s.range_query(key, rq_size)
                c[RQ] += 1
            else:
                s.lookup(key)
                c[LOOK] += 1
            c[OPS] += 1

    def _park(self) -> None:
        with self._cond:
            self._parked += 1
            self._cond.notify_all()
            while self._pause:
                self._cond.wait()
            self._parked -= 1

    def _worker(self, idx: int, barrier: threading.Barrier) -> None:
        rng = random.Random(_seed_for(self.cfg.seed, idx))
        try:
            with self.domain.thread():
                barrier.wait()
                try:
                    self._op_loop(idx, rng)
                except MemorySafetyError as exc:
                    self._record(exc)
                except Exception as exc:  # reported, not swallowed
                    self._record(exc)
        except Exception as exc:
            self._record(exc)
        finally:
            with self._cond:
                self._finished += 1
                self._cond.notify_all()

    def _record(self, exc: BaseException) -> None:
        with self._err_lock:
            if isinstance(exc, MemorySafetyError) and not exc.counted:
                self._uncounted_faults += 1
            self._errors.append(f"{type(exc).__name__}: {exc}")

    # -- driver -----------------------------------------------------------

    def _prefill(self) -> None:
        cfg = self.cfg
        s = self.structure
        if cfg.structure == "dlqueue":
            for v in range(cfg.init_size):
                s.enqueue(v)
            return
        rng = random.Random(cfg.seed)
        n = 0
        while n < cfg.init_size:
            k = rng.randrange(cfg.key_range)
            if s.insert(k, k):
                n += 1

    def _totals(self) -> list[int]:
        return [sum(c[i] for c in self.counters) for i in range(7)]

    def pause_and(self, fn: Callable[[], None]) -> None:
        """Run ``fn`` while every live worker is parked between operations."""
        n = self.cfg.threads
        with self._cond:
            self._pause = True
            while self._parked + self._finished < n:
                self._cond.wait(0.05)
        try:
            fn()
        finally:
            with self._cond:
                self._pause = False
                self._cond.notify_all()

    def execute(self) -> RunResult:
        cfg, res, d = self.cfg, self.result, self.domain
        ledger = d.ledger
        bytes_per = node_bytes(cfg.structure, cfg.scheme)
        with d.thread():
            self.structure = make_structure(cfg.structure, d, buckets=max(1, cfg.init_size))
            self._prefill()
            ledger.peak_live = ledger.live
            base_strong, base_slow = d.strong_updates(), d.slow_snapshots()
            barrier = threading.Barrier(cfg.threads + 1)
            workers = [
                threading.Thread(target=self._worker, args=(i, barrier), daemon=True, name=f"worker-{i}")
                for i in range(cfg.threads)
            ]
            for w in workers:
                w.start()
            samples: list[int] = []
            tick = cfg.sample_ms / 1000.0
            barrier.wait()
            t0 = time.perf_counter()
            timed = cfg.ops_per_thread is None
            warm_at = t0 + cfg.duration_s * cfg.warmup_frac if timed else t0
            end_at = t0 + cfg.duration_s
            next_audit = t0 + self.audit_every_s if self.audit else float("inf")
            base, t_warm = (self._totals(), t0) if not timed or cfg.warmup_frac == 0 else (None, None)
            while True:
                now = time.perf_counter()
                # the op floor counts measured ops only, matching total_ops
                if timed and now >= end_at and (
                    not cfg.min_total_ops
                    or base is not None and sum(c[OPS] for c in self.counters) - base[OPS] >= cfg.min_total_ops
                ):
                    break
                if self._finished >= cfg.threads:
                    break
                if base is None and now >= warm_at:
                    base, t_warm = self._totals(), now
                if now >= next_audit:
                    self.pause_and(lambda: self.audit(self.structure, d))
                    next_audit = time.perf_counter() + self.audit_every_s
                samples.append(ledger.live)
                time.sleep(tick)
            self._stop = True
            t_end = time.perf_counter()
            final = self._totals()
            for w in workers:
                w.join()
            if base is None:
                base, t_warm = [0] * 7, t0
            if not timed:
                t_end = time.perf_counter()
                final = self._totals()
            if self.audit:
                self.audit(self.structure, d)
            measured = [f - b for f, b in zip(final, base)]
            res.elapsed_s = t_end - t_warm
            res.total_ops = measured[OPS]
            res.throughput = measured[OPS] / res.elapsed_s if res.elapsed_s > 0 else 0.0
            res.inserts, res.removes, res.lookups = measured[INS], measured[REM], measured[LOOK]
            res.range_queries, res.enqueues, res.dequeues = measured[RQ], measured[ENQ], measured[DEQ]
            res.peak_live = ledger.peak_live
            res.mean_live = sum(samples) / len(samples) if samples else float(ledger.live)
            res.peak_bytes = res.peak_live * bytes_per
            res.mean_bytes = res.mean_live * bytes_per
            res.slow_path_snapshots = d.slow_snapshots() - base_slow
            res.strong_updates = d.strong_updates() - base_strong
            d.collect()
            res.quiescent_live = ledger.live
            res.reachable = self.structure.node_count()
            self.structure.destroy()
            d.collect()
            res.final_live = ledger.live
        res.poison_reads = ledger.poison_reads + self._uncounted_faults
        res.errors = list(self._errors)
        return res


def run(cfg: WorkloadConfig, repeat_index: int = 0) -> RunResult:
    return Run(cfg, repeat_index=repeat_index).execute()


def run_repeated(cfg: WorkloadConfig, repeat: int = 1) -> list[RunResult]:
    return [run(cfg, i) for i in range(repeat)]
