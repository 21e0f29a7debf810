"""Command line: ``rcsmr {bench,report,explore,contract,stress}``.

Exit status is 0 on success, 1 when a check fails and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from ..structures import SCHEMES, STRUCTURES
from .config import UsageError, WorkloadConfig

__all__ = ["main", "build_parser"]


def _csv_list(kind, choices=None):
    def parse(text: str):
        items = [kind(x) for x in text.split(",") if x]
        if choices is not None:
            bad = [x for x in items if x not in choices]
            if bad:
                raise argparse.ArgumentTypeError(f"invalid choice(s) {bad}; choose from {', '.join(choices)}")
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return items

    return parse


def _workload_flags(p: argparse.ArgumentParser, *, matrix: bool = False) -> None:
    if matrix:
        p.add_argument("--structure", type=_csv_list(str, STRUCTURES), default=["bst"], help="comma list")
        p.add_argument("--scheme", type=_csv_list(str, SCHEMES), default=list(SCHEMES), help="comma list")
        p.add_argument("--threads", type=_csv_list(int), default=[1, 2, 4], help="comma list")
    else:
        p.add_argument("--structure", choices=STRUCTURES, default="bst")
        p.add_argument("--scheme", choices=SCHEMES, default="rc-ebr")
        p.add_argument("--threads", type=int, default=4)
    p.add_argument("--duration", type=float, default=1.0, help="seconds per run")
    p.add_argument("--init-size", type=int, default=1000)
    p.add_argument("--key-range", type=int, default=None, help="default: twice --init-size")
    p.add_argument("--update-pct", type=float, default=10.0)
    p.add_argument("--rq-pct", type=float, default=0.0)
    p.add_argument("--rq-size", type=int, default=64)
    p.add_argument("--epoch-freq", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slots", type=int, default=8, help="hazard slots per thread")
    p.add_argument("--max-threads", type=int, default=None, help="registry size P")
    p.add_argument("--ops-per-thread", type=int, default=None, help="fixed op count instead of --duration")
    p.add_argument("--min-ops", type=int, default=0, help="extend timed runs until this many ops completed")
    p.add_argument("--debug", action="store_true", help="enable proper-execution checks")


def _config(a: argparse.Namespace, structure=None, scheme=None, threads=None) -> WorkloadConfig:
    return WorkloadConfig(
        structure=structure or a.structure,
        scheme=scheme or a.scheme,
        threads=threads if threads is not None else a.threads,
        duration_s=a.duration,
        init_size=a.init_size,
        key_range=a.key_range,
        update_pct=a.update_pct,
        rq_pct=a.rq_pct,
        rq_size=a.rq_size,
        epoch_freq=a.epoch_freq,
        seed=a.seed,
        ops_per_thread=a.ops_per_thread,
        min_total_ops=a.min_ops,
        slots=a.slots,
        max_threads=a.max_threads,
        debug=a.debug,
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcsmr", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run one workload configuration")
    _workload_flags(b)
    b.add_argument("--repeat", type=int, default=1)
    b.add_argument("--format", choices=("csv", "json"), default="csv")
    b.add_argument("--out", default="-", help="output file ('-' for stdout)")

    r = sub.add_parser("report", help="run a matrix, write CSV, JSON and figures")
    _workload_flags(r, matrix=True)
    r.add_argument("--repeat", type=int, default=1)
    r.add_argument("--out-dir", required=True)

    e = sub.add_parser("explore", help="exhaustive sticky-counter interleavings")
    e.add_argument("--start", type=_csv_list(int), default=[0, 1, 2, 3])
    e.add_argument("--threads", type=int, default=3)
    e.add_argument("--ops", type=int, default=4, help="max ops per thread")
    e.add_argument(
        "--program",
        default=None,
        help="fixed programs, threads separated by ';', ops by ',' (e.g. 'dec;inc,load')",
    )
    e.add_argument("--relaxed", action="store_true", help="leave decrement results out of the linearizability check")
    e.add_argument("--budget", type=int, default=2_000_000, help="max distinct states per exploration")

    c = sub.add_parser("contract", help="bounded-schedule acquire-retire contract suite")
    c.add_argument("--backend", choices=("ebr", "ibr", "hp", "all"), default="all")
    c.add_argument("--preemptions", type=int, default=2)
    c.add_argument("--budget", type=int, default=50_000, help="max schedules per scenario")

    s = sub.add_parser("stress", help="multi-threaded run with quiescent audits")
    _workload_flags(s)
    s.add_argument("--audit-every", type=float, default=1.0, help="seconds between audits")
    s.add_argument("--switch-interval", type=float, default=1e-5)
    return ap


def _emit_json(obj, out: Optional[str] = None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out and out != "-":
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_bench(a) -> int:
    from .emit import write
    from .runner import run_repeated

    if a.repeat < 1:
        raise UsageError("--repeat must be at least 1")
    results = run_repeated(_config(a), a.repeat)
    write(results, a.format, a.out)
    return 0 if all(r.ok for r in results) else 1


def _cmd_report(a) -> int:
    from .emit import write
    from .plots import plot_results
    from .runner import run_repeated

    if a.repeat < 1:
        raise UsageError("--repeat must be at least 1")
    configs = [
        _config(a, structure, scheme, threads)
        for structure in a.structure
        for scheme in a.scheme
        for threads in a.threads
    ]
    results = []
    for cfg in configs:
        rs = run_repeated(cfg, a.repeat)
        results.extend(rs)
        print(
            f"{cfg.structure:8s} {cfg.scheme:7s} threads={cfg.threads:<3d} "
            f"{sum(r.throughput for r in rs) / len(rs):12.0f} ops/s",
            file=sys.stderr,
        )
    os.makedirs(a.out_dir, exist_ok=True)
    write(results, "csv", os.path.join(a.out_dir, "results.csv"))
    write(results, "json", os.path.join(a.out_dir, "results.json"))
    for path in plot_results(results, a.out_dir):
        print(path, file=sys.stderr)
    return 0 if all(r.ok for r in results) else 1


def _cmd_explore(a) -> int:
    from ..verification.explorer import explore, unit_distributions

    reports = []
    if a.program:
        programs = [[op for op in part.split(",") if op] for part in a.program.split(";")]
        for start in a.start:
            reports.append(explore(start, programs, strict=not a.relaxed, max_states=a.budget))
    else:
        for start in a.start:
            for units in unit_distributions(start, a.threads):
                reports.append(
                    explore(start, threads=a.threads, max_ops=a.ops, units=units, strict=not a.relaxed, max_states=a.budget)
                )
    _emit_json({"ok": all(r.ok for r in reports), "runs": [r.as_dict() for r in reports]})
    return 0 if all(r.ok for r in reports) else 1


def _cmd_contract(a) -> int:
    from ..verification.contract import contract_suite

    names = ("ebr", "ibr", "hp") if a.backend == "all" else (a.backend,)
    reports = [contract_suite(n, max_preemptions=a.preemptions, max_schedules=a.budget) for n in names]
    _emit_json({"ok": all(r.ok for r in reports), "backends": [r.as_dict() for r in reports]})
    return 0 if all(r.ok for r in reports) else 1


def _cmd_stress(a) -> int:
    from ..verification.stress import stress

    rep = stress(_config(a), audit_every_s=a.audit_every, switch_interval=a.switch_interval)
    _emit_json(rep.as_dict())
    return 0 if rep.ok else 1


_COMMANDS = {
    "bench": _cmd_bench,
    "report": _cmd_report,
    "explore": _cmd_explore,
    "contract": _cmd_contract,
    "stress": _cmd_stress,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        print(f"rcsmr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"rcsmr {args.command}: I/O error: {exc}", file=sys.stderr)
        return 1
