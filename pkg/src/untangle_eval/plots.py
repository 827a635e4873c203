"""Optional figure rendering for report contents.

Reports stay plain data; these helpers draw the curve points, bin tables,
and matrices a report carries into PNG files next to it. Only the CLI's
--figures flag uses this module.
"""

from __future__ import annotations

from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def accuracy_coverage_figure(coverage: Sequence[float], accuracy: Sequence[float], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(coverage, accuracy, lw=2)
    ax.set_xlabel("coverage")
    ax.set_ylabel("accuracy on covered samples")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def reliability_figure(bin_table: List[Dict], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    centers, gaps, accs = [], [], []
    for row in bin_table:
        if row["count"] == 0:
            continue
        centers.append(0.5 * (row["bin_lower"] + row["bin_upper"]))
        accs.append(row["accuracy"])
        gaps.append(row["mean_confidence"])
    width = bin_table[0]["bin_upper"] - bin_table[0]["bin_lower"]
    ax.bar(centers, accs, width=width * 0.9, label="accuracy", alpha=0.8)
    ax.plot([0, 1], [0, 1], "k--", lw=1, label="perfect calibration")
    ax.scatter(centers, gaps, color="C3", s=12, label="mean confidence")
    ax.set_xlabel("confidence bin")
    ax.set_ylabel("accuracy")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def correlation_matrix_figure(matrix: Dict, path, title: str = "") -> None:
    names = matrix["metrics"]
    values = np.array([[np.nan if v is None else v for v in row] for row in matrix["values"]])
    fig, ax = plt.subplots(figsize=(1.0 + 0.6 * len(names), 1.0 + 0.6 * len(names)))
    im = ax.imshow(values, vmin=-1, vmax=1, cmap="coolwarm")
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(len(names)), names, fontsize=7)
    for i in range(len(names)):
        for j in range(len(names)):
            if not np.isnan(values[i, j]):
                ax.text(j, i, f"{values[i, j]:.2f}", ha="center", va="center", fontsize=6)
    if title:
        ax.set_title(title, fontsize=9)
    fig.colorbar(im, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def severity_figure(rows: List[Dict], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    levels = [r["severity"] for r in rows]
    for name, style in (("accuracy", "-o"), ("auroc_correctness", "-s"), ("auac", "-^"), ("ece", "-v")):
        values = [r.get(name) for r in rows]
        if any(v is not None for v in values):
            ax.plot(levels, [np.nan if v is None else v for v in values], style, label=name)
    ax.set_xlabel("severity")
    ax.set_ylabel("metric value")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def disentanglement_figure(cells: Dict[str, float], path) -> None:
    names = sorted(cells)
    values = [np.nan if cells[n] is None else cells[n] for n in names]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(names, values)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_ylim(-1, 1)
    ax.set_ylabel("Spearman correlation")
    ax.tick_params(axis="x", labelsize=7, rotation=20)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
