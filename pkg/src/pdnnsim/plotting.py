"""Figures for run reports: accuracy per cross-validation iteration, accuracy
versus number of fit samples with min/max bands, the confusion matrix, the
training loss and the alignment descent.

Everything renders off-screen to files; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}
FIGSIZE = (4.8, 3.2)


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def accuracy_vs_iteration(accuracies, path: str | Path, title: str = "") -> Path:
    acc = 100.0 * np.asarray(accuracies, dtype=float)
    it = np.arange(1, len(acc) + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.plot(it, acc, ".", ms=3, color="0.35", label="iteration")
        ax.axhline(acc.mean(), color="C3", lw=1.2, label=f"mean {acc.mean():.1f}%")
        ax.set_xlabel("Iteration")
        ax.set_ylabel("Accuracy (%)")
        ax.set_ylim(min(50.0, acc.min() - 2), 101)
        ax.legend(frameon=False, loc="lower right")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def accuracy_vs_samples(n, mean, lo, hi, path: str | Path, title: str = "") -> Path:
    n = np.asarray(n)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.fill_between(n, 100 * np.asarray(lo), 100 * np.asarray(hi), color="C0", alpha=0.2,
                        lw=0, label="min/max")
        ax.plot(n, 100 * np.asarray(mean), "-o", ms=2.5, color="C0", label="mean")
        ax.set_xlabel("Number of fit samples")
        ax.set_ylabel("Accuracy (%)")
        ax.set_ylim(0, 101)
        ax.legend(frameon=False, loc="lower right")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def confusion(matrix, path: str | Path, labels=None, title: str = "") -> Path:
    m = np.asarray(matrix, dtype=float)
    k = m.shape[0]
    labels = list(labels) if labels is not None else [str(i) for i in range(k)]
    rows = m / np.maximum(m.sum(axis=1, keepdims=True), 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 0.7 * k, 1.0 + 0.7 * k))
        ax.imshow(rows, cmap="Blues", vmin=0, vmax=1)
        for i in range(k):
            for j in range(k):
                ax.text(j, i, f"{100 * rows[i, j]:.0f}", ha="center", va="center",
                        color="white" if rows[i, j] > 0.5 else "black", fontsize=8)
        ax.set_xticks(range(k), labels)
        ax.set_yticks(range(k), labels)
        ax.set_xlabel("Predicted")
        ax.set_ylabel("True")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def loss_curve(losses, path: str | Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.semilogy(np.arange(1, len(losses) + 1), losses, color="C2")
        ax.set_xlabel("Epoch")
        ax.set_ylabel("Training loss")
        return _save(fig, path)


def alignment_descent(v_sums, path: str | Path) -> Path:
    """V_SUM after each accepted heater move."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.semilogy(np.arange(len(v_sums)), v_sums, color="C1")
        ax.set_xlabel("Accepted move")
        ax.set_ylabel("Dark V_SUM (V)")
        return _save(fig, path)
