"""Figure rendering for the CLI report paths.

Figures are written next to the delimited output of each command. The data
behind every figure is also available in the CSV/JSON reports, so plots are
purely a convenience view. PNG output is kept deterministic by stripping the
writer metadata.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_METADATA = {"Software": None}


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=_PNG_METADATA)
    plt.close(fig)


def prial_bars(prial, path, title="PRIAL by estimator"):
    labels = list(prial)
    values = [prial[label] for label in labels]
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(labels)), 3.5))
    ax.bar(range(len(labels)), values, color="steelblue")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel("PRIAL (%)")
    ax.set_title(title)
    _save(fig, path)


def weights_boxplot(weights, component_labels, path, title="Shrinkage weights"):
    weights = np.asarray(weights, dtype=float)
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * weights.shape[1]), 3.5))
    ax.boxplot(weights, tick_labels=list(component_labels))
    ax.set_ylabel("posterior weight")
    ax.set_ylim(bottom=0.0)
    ax.set_title(title)
    _save(fig, path)


def bayes_factor_plot(curve, path, thresholds=(3.0, 20.0)):
    alphas = [a for a, _ in curve]
    bfs = [bf for _, bf in curve]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(alphas, bfs, color="steelblue")
    ax.set_yscale("log")
    for level in thresholds:
        ax.axhline(level, color="grey", linestyle="--", linewidth=0.8)
    ax.set_xlabel("shrinkage intensity")
    ax.set_ylabel("Bayes factor vs best intensity")
    _save(fig, path)


def distance_heatmap(labels, distances, path, title="Pairwise target distances"):
    distances = np.asarray(distances, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    image = ax.imshow(distances, cmap="viridis")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels)
    fig.colorbar(image, ax=ax, label="Frobenius distance")
    ax.set_title(title)
    _save(fig, path)


def covariance_heatmap(matrix, path, title="Estimated covariance"):
    matrix = np.asarray(matrix, dtype=float)
    limit = float(np.max(np.abs(matrix)))
    fig, ax = plt.subplots(figsize=(5, 4.2))
    image = ax.imshow(matrix, cmap="RdBu_r", vmin=-limit, vmax=limit)
    fig.colorbar(image, ax=ax)
    ax.set_title(title)
    _save(fig, path)


def mle_diagnostics_plot(rows, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for p in sorted({row["p"] for row in rows}):
        sub = [row for row in rows if row["p"] == p]
        sub.sort(key=lambda row: row["n"])
        ns = [row["n"] for row in sub]
        axes[0].plot(
            ns, [row["mean_frobenius_error_sq"] for row in sub], "o-", label=f"p={p}"
        )
        conds = [
            (row["n"], row["mean_condition_number"])
            for row in sub
            if row["mean_condition_number"] is not None
        ]
        if conds:
            axes[1].plot(*zip(*conds), "o-", label=f"p={p}")
    axes[0].set_xscale("log")
    axes[0].set_yscale("log")
    axes[0].set_xlabel("n")
    axes[0].set_ylabel("mean squared Frobenius error")
    axes[1].set_xscale("log")
    axes[1].set_yscale("log")
    axes[1].set_xlabel("n")
    axes[1].set_ylabel("mean condition number")
    for ax in axes:
        ax.legend()
    _save(fig, path)


def gridstudy_plot(rows, path):
    rows = sorted(rows, key=lambda row: row["cardinality"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(
        [row["cardinality"] for row in rows], [row["prial"] for row in rows], "o-"
    )
    ax.set_xscale("log")
    ax.set_xlabel("intensity grid cardinality")
    ax.set_ylabel("PRIAL (%)")
    _save(fig, path)
