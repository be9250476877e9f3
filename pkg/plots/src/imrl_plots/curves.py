"""Learning-curve overlays: mean return with a +-1 std band per arm."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

EVAL_COLUMNS = ["step", "mean_return", "std_return"]
FIG_SIZE = (12.8, 7.2)  # 1280x720 at dpi 100
DPI = 100


class SchemaError(ValueError):
    pass


def load_eval_csv(path) -> np.ndarray:
    """Rows of (step, mean_return, std_return); read-only, schema-checked."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != EVAL_COLUMNS:
            missing = [c for c in EVAL_COLUMNS if header is None or c not in header]
            got = ", ".join(header) if header else "nothing"
            raise SchemaError(
                f"{path}: expected columns {', '.join(EVAL_COLUMNS)} but found {got}"
                + (f" (missing: {', '.join(missing)})" if missing else ""))
        rows = [[float(x) for x in row] for row in reader if row]
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return np.asarray(rows)


class CurveBundle:
    """One arm's evaluation series across seeds, aligned on the eval-step grid."""

    def __init__(self, label: str, csv_paths):
        if not csv_paths:
            raise SchemaError(f"arm {label!r}: no eval CSVs")
        self.label = label
        tables = [load_eval_csv(p) for p in csv_paths]
        self.steps = tables[0][:, 0]
        aligned = [tables[0][:, 1]]
        for t in tables[1:]:
            # nearest-step join onto the first seed's grid
            idx = np.abs(t[:, 0][None, :] - self.steps[:, None]).argmin(axis=1)
            aligned.append(t[idx, 1])
        self.per_seed = np.stack(aligned)  # (seeds, steps)

    @property
    def mean(self) -> np.ndarray:
        return self.per_seed.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.per_seed.std(axis=0)

    def smoothed(self, window: int):
        if window <= 1:
            return self.mean, self.std
        kernel = np.ones(window) / window
        pad = window - 1
        padded_mean = np.concatenate([np.repeat(self.mean[0], pad), self.mean])
        padded_std = np.concatenate([np.repeat(self.std[0], pad), self.std])
        return (np.convolve(padded_mean, kernel, mode="valid"),
                np.convolve(padded_std, kernel, mode="valid"))


def render_curves(eval_csvs, out, smooth_window: int = 1):
    """Render one figure: x = environment steps, y = mean return with a +-1 std
    band per arm.

    eval_csvs: either a flat list of CSV paths (one single-seed arm each,
    labelled by parent directory) or a list of (label, [seed csv paths])
    pairs. Inputs are read-only; output is a 1280x720 PNG. Returns the figure
    for structural assertions.
    """
    bundles = []
    for entry in eval_csvs:
        if isinstance(entry, (tuple, list)) and len(entry) == 2 and isinstance(entry[0], str):
            bundles.append(CurveBundle(entry[0], list(entry[1])))
        else:
            bundles.append(CurveBundle(Path(entry).resolve().parent.name, [entry]))
    if not bundles:
        raise SchemaError("no input CSVs")

    fig, ax = plt.subplots(figsize=FIG_SIZE, dpi=DPI)
    for bundle in bundles:
        mean, std = bundle.smoothed(smooth_window)
        label = bundle.label if smooth_window <= 1 else f"{bundle.label} (MA@{smooth_window})"
        if len(bundle.steps) == 1:
            ax.plot(bundle.steps, mean, marker="o", label=label)
        else:
            ax.plot(bundle.steps, mean, label=label)
        ax.fill_between(bundle.steps, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel("environment steps")
    ax.set_ylabel("mean episode return")
    ax.legend()
    fig.savefig(out)
    plt.close(fig)
    return fig
