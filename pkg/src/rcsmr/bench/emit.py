"""CSV and JSON output for run results.

Columns follow ``CSV_FIELDS`` exactly.  ``row`` is ``run`` for measured runs
and ``summary`` for the aggregate emitted after each group of repeats of one
configuration; a summary carries means in the numeric columns and sample
standard deviations in the ``*_std`` columns (left empty on run rows).
"""

from __future__ import annotations

import csv
import io
import json
import statistics
import sys
from typing import Any, Iterable, Optional, TextIO

from .config import RESULT_FIELDS, RunResult

__all__ = ["CSV_FIELDS", "STD_FIELDS", "records", "emit", "write"]

CONFIG_FIELDS = RESULT_FIELDS[: RESULT_FIELDS.index("repeat_index")]
_MEASURED = [f for f in RESULT_FIELDS if f not in CONFIG_FIELDS and f not in ("repeat_index", "errors")]
STD_FIELDS = ["throughput_std", "peak_live_std", "mean_live_std"]
CSV_FIELDS = ["row", *RESULT_FIELDS[:-1], "error_count", "errors", *STD_FIELDS]


def _run_record(r: RunResult) -> dict[str, Any]:
    d = r.as_dict()
    rec: dict[str, Any] = {"row": "run"}
    for f in RESULT_FIELDS[:-1]:
        rec[f] = d[f]
    rec["error_count"] = len(r.errors)
    rec["errors"] = list(r.errors)
    for f in STD_FIELDS:
        rec[f] = None
    return rec


def _summary(group: list[RunResult]) -> dict[str, Any]:
    first = group[0].as_dict()
    rec: dict[str, Any] = {"row": "summary"}
    for f in CONFIG_FIELDS:
        rec[f] = first[f]
    rec["repeat_index"] = len(group)
    for f in _MEASURED:
        rec[f] = statistics.fmean(getattr(r, f) for r in group)
    rec["error_count"] = sum(len(r.errors) for r in group)
    rec["errors"] = []
    for f in STD_FIELDS:
        rec[f] = statistics.stdev(getattr(r, f.removesuffix("_std")) for r in group)
    return rec


def records(results: Iterable[RunResult]) -> list[dict[str, Any]]:
    """One record per run; groups of 2+ repeats gain a trailing summary."""
    out: list[dict[str, Any]] = []
    group: list[RunResult] = []

    def flush() -> None:
        if len(group) > 1:
            out.append(_summary(group))
        group.clear()

    for r in results:
        key = tuple(getattr(r, f) for f in CONFIG_FIELDS)
        if group and tuple(getattr(group[0], f) for f in CONFIG_FIELDS) != key:
            flush()
        group.append(r)
        out.append(_run_record(r))
    flush()
    return out


def emit(results: Iterable[RunResult], fmt: str) -> str:
    recs = records(results)
    if fmt == "json":
        return json.dumps(recs, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for rec in recs:
            row = dict(rec)
            row["errors"] = " | ".join(rec["errors"])
            w.writerow({k: "" if v is None else v for k, v in row.items()})
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}; use csv or json")


def write(results: Iterable[RunResult], fmt: str, path: Optional[str] = None, stream: TextIO = sys.stdout) -> None:
    text = emit(results, fmt)
    if path is None or path == "-":
        stream.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
