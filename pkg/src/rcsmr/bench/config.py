"""Workload description and per-run results."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional

from ..acquire_retire import DEFAULT_MAX_THREADS
from ..structures import SCHEMES, STRUCTURES
from ..structures.bst import INF0

__all__ = ["UsageError", "WorkloadConfig", "RunResult", "RESULT_FIELDS"]


class UsageError(ValueError):
    """Invalid workload configuration."""


@dataclass
class WorkloadConfig:
    structure: str = "bst"
    scheme: str = "rc-ebr"
    threads: int = 4
    duration_s: float = 1.0
    init_size: int = 1000
    key_range: Optional[int] = None
    update_pct: float = 10.0
    rq_pct: float = 0.0
    rq_size: int = 64
    epoch_freq: Optional[int] = None
    seed: int = 0
    # Fixed per-thread op count instead of a timed run (no warmup then).
    ops_per_thread: Optional[int] = None
    # Timed runs keep going past duration_s until this many ops completed.
    min_total_ops: int = 0
    slots: int = 8
    max_threads: Optional[int] = None
    debug: bool = False
    warmup_frac: float = 0.1
    sample_ms: float = 10.0

    def __post_init__(self) -> None:
        if self.key_range is None:
            self.key_range = 2 * self.init_size
        self.validate()

    def validate(self) -> None:
        if self.structure not in STRUCTURES:
            raise UsageError(f"--structure must be one of {', '.join(STRUCTURES)}")
        if self.scheme not in SCHEMES:
            raise UsageError(f"--scheme must be one of {', '.join(SCHEMES)}")
        if self.threads < 1:
            raise UsageError("--threads must be at least 1")
        if self.max_threads is not None and self.threads + 1 > self.max_threads:
            raise UsageError(f"{self.threads} workers plus the driver exceed P={self.max_threads}")
        if self.threads + 1 > DEFAULT_MAX_THREADS and self.max_threads is None:
            raise UsageError(f"more than {DEFAULT_MAX_THREADS - 1} workers needs --max-threads")
        if self.duration_s <= 0 and self.ops_per_thread is None:
            raise UsageError("--duration must be positive")
        if self.init_size < 0 or self.key_range < 1:
            raise UsageError("--init-size must be >= 0 and --key-range >= 1")
        if self.structure != "dlqueue" and self.init_size > self.key_range:
            raise UsageError("--init-size cannot exceed --key-range")
        if self.key_range > INF0:
            raise UsageError("--key-range must stay below 2**62")
        if not (0 <= self.update_pct <= 100 and 0 <= self.rq_pct <= 100):
            raise UsageError("percentages must lie in [0, 100]")
        if self.update_pct + self.rq_pct > 100:
            raise UsageError("--update-pct plus --rq-pct exceeds 100")
        if self.rq_pct and self.structure not in ("bst", "list"):
            raise UsageError(f"range queries need an ordered structure, not {self.structure}")
        if self.rq_size < 1:
            raise UsageError("--rq-size must be positive")
        if self.epoch_freq is not None and self.epoch_freq < 1:
            raise UsageError("--epoch-freq must be positive")
        if self.slots < 1:
            raise UsageError("--slots must be positive")
        if self.ops_per_thread is not None and self.ops_per_thread < 0:
            raise UsageError("--ops-per-thread must be >= 0")
        if self.min_total_ops < 0:
            raise UsageError("--min-ops must be >= 0")
        if not 0 <= self.warmup_frac < 1:
            raise UsageError("warmup fraction must lie in [0, 1)")

    @property
    def processes(self) -> int:
        return self.max_threads if self.max_threads is not None else self.threads + 1

    def backend_options(self) -> dict[str, Any]:
        opts: dict[str, Any] = {"max_threads": self.processes, "debug": self.debug}
        if self.epoch_freq is not None:
            opts["epoch_freq"] = self.epoch_freq
        if self.scheme.endswith("hp"):
            opts["slots"] = self.slots
        return opts


@dataclass
class RunResult:
    structure: str
    scheme: str
    threads: int
    duration_s: float
    init_size: int
    key_range: int
    update_pct: float
    rq_pct: float
    rq_size: int
    epoch_freq: Optional[int]
    seed: int
    repeat_index: int = 0
    elapsed_s: float = 0.0
    total_ops: int = 0
    throughput: float = 0.0
    inserts: int = 0
    removes: int = 0
    lookups: int = 0
    range_queries: int = 0
    enqueues: int = 0
    dequeues: int = 0
    peak_live: int = 0
    mean_live: float = 0.0
    peak_bytes: int = 0
    mean_bytes: float = 0.0
    slow_path_snapshots: int = 0
    strong_updates: int = 0
    poison_reads: int = 0
    quiescent_live: int = 0
    reachable: int = 0
    final_live: int = 0
    errors: list[str] = field(default_factory=list)

    @classmethod
    def from_config(cls, cfg: WorkloadConfig, repeat_index: int = 0) -> RunResult:
        return cls(
            structure=cfg.structure,
            scheme=cfg.scheme,
            threads=cfg.threads,
            duration_s=cfg.duration_s,
            init_size=cfg.init_size,
            key_range=cfg.key_range,
            update_pct=cfg.update_pct,
            rq_pct=cfg.rq_pct,
            rq_size=cfg.rq_size,
            epoch_freq=cfg.epoch_freq,
            seed=cfg.seed,
            repeat_index=repeat_index,
        )

    @property
    def ok(self) -> bool:
        return not self.errors and self.poison_reads == 0

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


RESULT_FIELDS = [f.name for f in fields(RunResult)]
