"""PNG figures written next to the delimited reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# drop the version stamp so identical data gives identical bytes
_PNG_META = {"Software": None}


def plot_sweep(tables: Sequence, path: str | Path, metric: str = "rougeLsum") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for table in tables:
        ks = table.ks
        ax.plot(ks, [100 * table.get(k, metric).f1 for k in ks], marker="o", label=table.system)
    ax.set_xlabel("sentences selected (k)")
    ax.set_ylabel(f"{metric} F1 (x100)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    plt.close(fig)
    return Path(path)


def plot_training(history: Sequence[dict], path: str | Path) -> Path:
    epochs = [h["epoch"] for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, [h["train_loss"] for h in history], label="train loss")
    ax.plot(epochs, [h["val_loss"] for h in history], label="validation loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("cross-entropy per token")
    ax2 = ax.twinx()
    ax2.plot(epochs, [h["val_rouge_lsum"] for h in history], color="tab:green", linestyle="--", label="val rougeLsum")
    ax2.set_ylabel("validation rougeLsum F1")
    lines = ax.get_lines() + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="center right")
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    plt.close(fig)
    return Path(path)


def plot_report(report: dict, path: str | Path) -> Path:
    """Bar chart of corpus-mean precision/recall/F1 per ROUGE metric."""
    rouge = report["metrics"]["rouge"]
    metrics = sorted(rouge)
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.25
    for i, part in enumerate(("precision", "recall", "f1")):
        xs = [j + (i - 1) * width for j in range(len(metrics))]
        ax.bar(xs, [rouge[m][part] for m in metrics], width, label=part)
    ax.set_xticks(range(len(metrics)))
    ax.set_xticklabels(metrics)
    ax.set_ylim(0, 1)
    ax.set_title(report.get("run_id", ""))
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_PNG_META)
    plt.close(fig)
    return Path(path)
