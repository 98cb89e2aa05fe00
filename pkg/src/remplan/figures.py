"""Bar-chart rendering of comparison and sweep results to image files."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .sim import SimReport


def case_tick(rep: SimReport) -> str:
    """Case label with any dropped nodes appended, e.g. REM-C."""
    if rep.excluded:
        return rep.case_label + "-" + "".join(sorted(rep.excluded))
    return rep.case_label


def save_comparison_figure(reports: Sequence[SimReport], path: str) -> str:
    """Stacked deploy / process-and-response bars, one per case."""
    if not reports:
        raise ValueError("no reports to draw")
    labels = [case_tick(r) for r in reports]
    deploys = [max(t.finish_at - t.proc_resp_span for t in r.per_worker.values())
               for r in reports]
    responses = [r.makespan - d for r, d in zip(reports, deploys)]

    fig, ax = plt.subplots(figsize=(max(6.0, 1.1 * len(labels)), 4.0))
    xs = range(len(labels))
    ax.bar(xs, deploys, width=0.6, label="deploy", color="#4878a8")
    ax.bar(xs, responses, width=0.6, bottom=deploys, label="process & response",
           color="#e8a33d")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("seconds")
    ax.set_title("Simulated makespan by case")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_sweep_figure(results: Sequence[tuple[int, Sequence[SimReport]]],
                      axis: str, path: str) -> str:
    """Grouped makespan bars: one group per swept value, one bar per case."""
    if not results:
        raise ValueError("no sweep results to draw")
    case_labels = [r.case_label for r in results[0][1]]
    n_cases = len(case_labels)
    group_w = 0.8
    bar_w = group_w / n_cases

    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(results)), 4.0))
    for ci, label in enumerate(case_labels):
        xs = [gi - group_w / 2 + bar_w * (ci + 0.5) for gi in range(len(results))]
        ys = [reports[ci].makespan for _, reports in results]
        ax.bar(xs, ys, width=bar_w * 0.92, label=label)
    ax.set_xticks(range(len(results)))
    unit = "objects" if axis == "num_objects" else "bytes/object"
    ax.set_xticklabels([f"{value:,} {unit}" for value, _ in results],
                       rotation=15, ha="right")
    ax.set_ylabel("simulated makespan (s)")
    ax.set_title(f"Makespan across the {axis} sweep")
    ax.legend(ncols=min(n_cases, 4), fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
