"""Render accuracy-per-stage figures from aggregated sweep results."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["save_summary_figures"]

_METRICS = (
    ("vqa_mean", "vqa_std", "vqa_accuracy", "VQA accuracy"),
    ("top1_mean", "top1_std", "top1_accuracy", "Top-1 accuracy"),
)


def save_summary_figures(summary_rows, directory, stem: str) -> list[Path]:
    """Write one PNG per metric: mean accuracy vs. labeled count per strategy.

    ``summary_rows`` are the per-(strategy, stage) aggregates produced by
    the summarize command.  Returns the written paths.
    """
    directory = Path(directory)
    strategies = sorted({r.strategy for r in summary_rows})
    written = []
    for mean_attr, std_attr, suffix, label in _METRICS:
        fig, ax = plt.subplots(figsize=(6.4, 4.2))
        for strategy in strategies:
            rows = sorted((r for r in summary_rows if r.strategy == strategy),
                          key=lambda r: r.stage)
            x = [r.labeled_count for r in rows]
            y = [getattr(r, mean_attr) for r in rows]
            err = [getattr(r, std_attr) for r in rows]
            ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=strategy)
        ax.set_xlabel("labeled samples")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=9)
        fig.tight_layout()
        path = directory / f"{stem}_{suffix}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
