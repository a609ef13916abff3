"""Figure rendering to PNG files.

Figure size and dpi are pinned so re-rendering the same inputs overwrites
the image deterministically.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import (
    KIND_LABELS,
    SCORE_LABELS,
    GridTable,
    read_grid_csv,
    read_records_jsonl,
    read_sweep_csv,
    select_per_split,
)

DPI = 120
SAVE_KWARGS = {"dpi": DPI, "metadata": {"Software": "tsplots"}}


def _grid_shape(table: GridTable) -> tuple[np.ndarray, np.ndarray]:
    xs = np.unique(table.x1)
    ys = np.unique(table.x2)
    if len(xs) * len(ys) != len(table.x1):
        raise ValueError("grid rows do not form a full rectangular grid")
    return xs, ys


def render_heatmap(in_path, out_path, title: str | None = None, raw: bool = False):
    """One panel per score column; scores shown as relative density.

    Log scores are shifted by their per-panel maximum and exponentiated
    (``raw=True`` shows the log scores directly).
    """
    table = read_grid_csv(in_path)
    xs, ys = _grid_shape(table)
    cols = list(table.scores)
    fig, axes = plt.subplots(
        1, len(cols), figsize=(4.0 * len(cols), 3.6), squeeze=False
    )
    for ax, col in zip(axes[0], cols):
        values = table.scores[col].reshape(len(xs), len(ys))
        if not raw:
            values = np.exp(values - values.max())
        mesh = ax.pcolormesh(xs, ys, values.T, shading="nearest", cmap="viridis")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_title(SCORE_LABELS.get(col, col))
        fig.colorbar(mesh, ax=ax, fraction=0.046)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, **SAVE_KWARGS)
    plt.close(fig)


def render_auc_box(in_path, out_path, title: str | None = None,
                   regimes=("supervised", "unsupervised")):
    """Box plots of the selected models' test AUC per dataset/kind/regime."""
    records = read_records_jsonl(in_path)
    datasets = sorted({r["dataset"] for r in records})
    kinds = sorted({r["score_kind"] for r in records})
    groups, labels = [], []
    for dataset in datasets:
        ds_records = [r for r in records if r["dataset"] == dataset]
        for regime in regimes:
            for kind in kinds:
                chosen = select_per_split(ds_records, kind, regime)
                aucs = [rec["test_auc"] for rec in chosen.values()]
                if not aucs:
                    continue
                groups.append(aucs)
                labels.append(f"{dataset}\n{KIND_LABELS.get(kind, kind)}\n{regime}")
    if not groups:
        raise ValueError("no selectable records to plot")
    width = max(6.0, 1.4 * len(groups))
    fig, ax = plt.subplots(figsize=(width, 4.2))
    ax.boxplot(groups, tick_labels=labels)
    ax.set_ylabel("test AUC")
    ax.set_ylim(0.0, 1.05)
    ax.grid(axis="y", alpha=0.3)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, **SAVE_KWARGS)
    plt.close(fig)


def render_sweep(in_path, out_path, title: str | None = None):
    """Test AUC vs latent dimension, one line per score kind with a
    min-max band across splits."""
    rows = read_sweep_csv(in_path)
    kinds = sorted({r["score_kind"] for r in rows})
    ks = sorted({r["k"] for r in rows})
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for kind in kinds:
        med, lo, hi = [], [], []
        for k in ks:
            vals = [r["test_auc"] for r in rows if r["k"] == k and r["score_kind"] == kind]
            med.append(np.median(vals))
            lo.append(np.min(vals))
            hi.append(np.max(vals))
        label = KIND_LABELS.get(kind, kind)
        ax.plot(ks, med, marker="o", label=label)
        ax.fill_between(ks, lo, hi, alpha=0.2)
    ax.set_xlabel("latent dimension")
    ax.set_ylabel("test AUC")
    ax.set_xticks(ks)
    ax.grid(alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, **SAVE_KWARGS)
    plt.close(fig)
