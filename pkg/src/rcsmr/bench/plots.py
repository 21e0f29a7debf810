"""Throughput and memory figures from run results."""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.ticker import MaxNLocator  # noqa: E402

from .config import RunResult  # noqa: E402

__all__ = ["plot_results"]


def _series(results: list[RunResult], metric: str):
    """scheme -> sorted (threads, mean, std) arrays."""
    by = defaultdict(lambda: defaultdict(list))
    for r in results:
        by[r.scheme][r.threads].append(getattr(r, metric))
    out = {}
    for scheme, per in by.items():
        xs = sorted(per)
        vals = [np.asarray(per[x], dtype=float) for x in xs]
        out[scheme] = (
            np.asarray(xs),
            np.array([v.mean() for v in vals]),
            np.array([v.std(ddof=1) if len(v) > 1 else 0.0 for v in vals]),
        )
    return out


def plot_results(results: Iterable[RunResult], out_dir: str, prefix: str = "") -> list[str]:
    """One two-panel figure per structure: throughput (left), memory (right).

    Returns the written paths.
    """
    results = list(results)
    os.makedirs(out_dir, exist_ok=True)
    by_structure = defaultdict(list)
    for r in results:
        by_structure[r.structure].append(r)
    paths = []
    for structure, rs in sorted(by_structure.items()):
        fig, (ax_t, ax_m) = plt.subplots(1, 2, figsize=(10, 4))
        for scheme, (x, y, e) in sorted(_series(rs, "throughput").items()):
            ax_t.errorbar(x, y / 1e3, yerr=e / 1e3, marker="o", capsize=3, label=scheme)
        for scheme, (x, y, e) in sorted(_series(rs, "mean_bytes").items()):
            ax_m.errorbar(x, y / 1024, yerr=e / 1024, marker="o", capsize=3, label=scheme)
        r0 = rs[0]
        title = f"{structure}: {r0.update_pct:g}% updates"
        if r0.rq_pct:
            title += f", {r0.rq_pct:g}% range queries of {r0.rq_size}"
        fig.suptitle(title)
        ax_t.set_xlabel("threads")
        ax_t.set_ylabel("throughput (Kops/s)")
        ax_m.set_xlabel("threads")
        ax_m.set_ylabel("mean live memory (KiB, estimated)")
        for ax in (ax_t, ax_m):
            ax.xaxis.set_major_locator(MaxNLocator(integer=True))
            ax.grid(alpha=0.3)
            ax.set_ylim(bottom=0)
        ax_t.legend(fontsize="small")
        fig.tight_layout()
        path = os.path.join(out_dir, f"{prefix}{structure}.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
