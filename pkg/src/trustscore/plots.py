"""Figure rendering for the report-style commands.

Every function writes a PNG next to the CSV it visualizes and returns the
path. The CSVs stay the primary machine-readable output; these are for
eyeballing runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIG_SIZE = (6.4, 4.0)
DPI = 150


def _new_axes(xlabel: str, ylabel: str, title: str):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def stratification_figure(fractions, accuracies, path: str) -> str:
    fig, ax = _new_axes("top fraction by score", "accuracy", "Accuracy over most-confident subsets")
    ax.plot(fractions, accuracies, marker="o")
    ax.set_xlim(0.0, 1.05)
    return _save(fig, path)


def risk_coverage_figure(coverages, risks, path: str) -> str:
    fig, ax = _new_axes("coverage", "selective risk", "Risk-coverage curve")
    ax.plot(coverages, risks)
    ax.set_xlim(0.0, 1.0)
    return _save(fig, path)


def sparsification_figure(fractions, method_errors, oracle_errors, path: str) -> str:
    fig, ax = _new_axes("removed fraction", "error rate", "Sparsification curves")
    ax.plot(fractions, method_errors, label="by score")
    ax.plot(fractions, oracle_errors, linestyle="--", label="oracle")
    ax.legend()
    return _save(fig, path)


def histograms_figure(named_histograms: dict, path: str) -> str:
    """Overlay normalized score histograms, one step plot per dataset."""
    fig, ax = _new_axes("score", "mass", "Score histograms")
    for name, rows in named_histograms.items():
        centers = [c for c, _ in rows]
        masses = [m for _, m in rows]
        ax.step(centers, masses, where="mid", label=name)
    ax.legend(fontsize=8)
    return _save(fig, path)


def mmd_drop_figure(mmds, drops, labels, path: str) -> str:
    fig, ax = _new_axes("score MMD to reference", "accuracy drop", "Shift severity vs. score divergence")
    ax.scatter(mmds, drops)
    for x, y, label in zip(mmds, drops, labels):
        ax.annotate(label, (x, y), fontsize=8, xytext=(3, 3), textcoords="offset points")
    return _save(fig, path)


def history_figure(losses, accuracies, path: str) -> str:
    fig, ax = _new_axes("epoch", "train loss", "Training history")
    epochs = range(1, len(losses) + 1)
    ax.plot(epochs, losses, label="loss")
    twin = ax.twinx()
    twin.plot(epochs, accuracies, color="tab:orange", label="accuracy")
    twin.set_ylabel("train accuracy")
    twin.set_ylim(0.0, 1.05)
    return _save(fig, path)
