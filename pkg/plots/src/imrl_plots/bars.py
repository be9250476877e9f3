"""Steps-to-match bars: per-task steps normalized by the comparison budget T."""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .curves import DPI, FIG_SIZE, SchemaError


def _require(mapping, key, where):
    if key not in mapping:
        raise SchemaError(f"{where}: missing required field {key!r}")
    return mapping[key]


def render_bars(report_json, out):
    """Bar chart of steps_to_match / T per task from a compare() report.

    The infinity sentinel renders as a hatched full-height bar with a 'never'
    annotation and no numeric label. Returns the figure for structural
    assertions.
    """
    with open(report_json, encoding="utf-8") as f:
        report = json.load(f)
    T = _require(report, "T", "report")
    rows = _require(report, "rows", "report")
    if not rows:
        raise SchemaError("report: empty rows")

    labels, ratios, unreached = [], [], []
    for i, row in enumerate(rows):
        task = _require(row, "task", f"rows[{i}]")
        stm = _require(row, "steps_to_match", f"rows[{i}]")
        labels.append(task)
        if stm == "inf":
            ratios.append(1.0)
            unreached.append(True)
        else:
            ratios.append(float(stm) / float(T))
            unreached.append(False)

    fig, ax = plt.subplots(figsize=FIG_SIZE, dpi=DPI)
    xs = range(len(labels))
    for x, ratio, never in zip(xs, ratios, unreached):
        if never:
            ax.bar(x, ratio, hatch="//", fill=False, edgecolor="firebrick")
            ax.annotate("never", (x, ratio), ha="center", va="bottom")
        else:
            bar = ax.bar(x, ratio)
            ax.bar_label(bar, fmt="%.2f")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_ylabel("steps to match baseline / T")
    ax.axhline(1.0, linestyle=":", linewidth=1)
    fig.savefig(out)
    plt.close(fig)
    return fig
