"""Figure rendering for evaluation reports.

Figures are written to files next to the delimited report output; no
interactive backend is ever required.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .metrics import CorpusReport


def render_metrics_figure(report: CorpusReport, path) -> None:
    """One panel per metric: per-file bars with the micro-average overlaid."""
    names = sorted(report.per_file)
    values = np.array([report.per_file[n] for n in names])  # (files, 4)
    overall = report.overall
    panels = [
        ("Error rate", values[:, 0], overall[0], None),
        ("F-score", values[:, 1], overall[1], (0.0, 1.0)),
        ("Localization error (deg)", values[:, 2], overall[2], None),
        ("Localization recall", values[:, 3], overall[3], (0.0, 1.0)),
    ]
    fig, axes = plt.subplots(2, 2, figsize=(11, 7))
    x = np.arange(len(names))
    for ax, (title, vals, agg, ylim) in zip(axes.ravel(), panels):
        ax.bar(x, vals, color="#4878a8")
        ax.axhline(agg, color="#c44e52", linewidth=1.5,
                   label=f"overall {agg:.3g}")
        ax.set_title(title, fontsize=10)
        ax.set_xticks(x)
        ax.set_xticklabels([n.replace(".csv", "") for n in names],
                           rotation=60, ha="right", fontsize=7)
        if ylim:
            ax.set_ylim(*ylim)
        ax.legend(fontsize=8, loc="upper right")
    fig.suptitle(f"Corpus evaluation — SELD score {report.seld:.4f}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
