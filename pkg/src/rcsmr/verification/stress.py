"""Randomized multi-threaded stress runs with periodic quiescent audits.

A stress run is an ordinary workload run in debug mode with a short thread
switch interval (more preemption, more races), paused every
``audit_every_s`` so the count audit can run on a quiescent structure.
It fails on any poison read, any worker exception, any audit violation, a
quiescent ledger that disagrees with the structure, or a non-empty ledger
after teardown.  The seed in the report replays the per-thread op streams.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Any, Optional

from ..bench.config import RunResult, WorkloadConfig
from ..bench.runner import Run
from .audit import AuditReport, audit

__all__ = ["StressReport", "stress"]


@dataclass
class StressReport:
    config: dict
    result: Optional[RunResult] = None
    audit: AuditReport = field(default_factory=AuditReport)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict[str, Any]:
        r = self.result
        return {
            "ok": self.ok,
            "config": self.config,
            "seed": self.config.get("seed"),
            "total_ops": r.total_ops if r else 0,
            "poison_reads": r.poison_reads if r else 0,
            "slow_path_snapshots": r.slow_path_snapshots if r else 0,
            "quiescent_live": r.quiescent_live if r else 0,
            "reachable": r.reachable if r else 0,
            "final_live": r.final_live if r else 0,
            "audits": self.audit.audits,
            "nodes_checked": self.audit.checked,
            "failures": self.failures,
        }


def stress(
    cfg: WorkloadConfig,
    *,
    audit_every_s: float = 1.0,
    switch_interval: float = 1e-5,
    audit_limit: Optional[int] = None,
) -> StressReport:
    """Run ``cfg`` (forced into debug mode) with audits; see the module doc."""
    cfg.debug = True
    cfg.validate()
    report = StressReport(config={k: v for k, v in vars(cfg).items()})

    def hook(structure: Any, domain: Any) -> None:
        report.audit.merge(audit(structure, domain, limit=audit_limit))

    old = sys.getswitchinterval()
    sys.setswitchinterval(switch_interval)
    try:
        run = Run(cfg, audit=hook, audit_every_s=audit_every_s)
        res = run.execute()
    finally:
        sys.setswitchinterval(old)
    report.result = res
    if res.poison_reads:
        report.failures.append(f"{res.poison_reads} poison reads")
    report.failures.extend(f"worker error: {e}" for e in res.errors[:10])
    if report.audit.violations:
        report.failures.append(f"{len(report.audit.violations)} audit violations, first: {report.audit.violations[0]}")
    if res.quiescent_live != res.reachable:
        report.failures.append(f"quiescent live {res.quiescent_live} != reachable {res.reachable}")
    if res.final_live != 0:
        report.failures.append(f"{res.final_live} allocations live after teardown")
    return report
