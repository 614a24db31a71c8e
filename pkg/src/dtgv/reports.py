"""Figure rendering for CLI reports.

Every function writes one figure file next to the delimited output it
illustrates; nothing is shown interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(str(path), dpi=130)
    plt.close(fig)


def image_figure(path, values, title=""):
    fig, ax = plt.subplots(figsize=(4.2, 4.0))
    im = ax.imshow(values, cmap="gray", interpolation="nearest")
    ax.set_title(title)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.colorbar(im, ax=ax, fraction=0.046)
    _finish(fig, path)


def hough_figure(path, accumulator):
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    extent = [-90, 89, -accumulator.r_max, accumulator.r_max]
    im = ax.imshow(accumulator.counts, aspect="auto", origin="lower",
                   extent=extent, cmap="magma")
    ax.set_xlabel("angle eta (deg)")
    ax.set_ylabel("offset r (px)")
    ax.set_title("line votes")
    fig.colorbar(im, ax=ax, fraction=0.046)
    _finish(fig, path)


def score_figure(path, scores, eta_max):
    etas = np.arange(-90, 90)
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.plot(etas, scores, lw=1.2)
    ax.axvline(eta_max, color="tab:red", ls="--", lw=1.0,
               label=f"eta_max = {eta_max} deg")
    ax.set_xlabel("angle eta (deg)")
    ax.set_ylabel("column score")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def convergence_figure(path, report):
    """Objective, primal residual and relative change, one panel each."""
    its = np.arange(1, report.iterations + 1)
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))
    axes[0].plot(its, report.objective[:report.iterations], lw=1.2)
    axes[0].set_ylabel("objective")
    axes[1].semilogy(its, report.primal_residual[:report.iterations], lw=1.2)
    axes[1].set_ylabel("primal residual")
    axes[2].semilogy(its, report.relative_change[:report.iterations], lw=1.2)
    axes[2].set_ylabel("relative change")
    for ax in axes:
        ax.set_xlabel("iteration")
    _finish(fig, path)


def rmse_history_figure(path, histories: dict):
    """RMSE traces per model on a shared axes (history may differ in length)."""
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    styles = {"dtgv": "-", "tgv": "--"}
    for label, hist in histories.items():
        ax.plot(np.arange(1, len(hist) + 1), hist,
                styles.get(label, "-"), lw=1.3, label=label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("RMSE")
    ax.legend(loc="best", fontsize=8)
    _finish(fig, path)


def benchmark_bars_figure(path, rows):
    """Grouped RMSE bars per benchmark cell, one group color per model."""
    cells = []
    data = {}
    for row in rows:
        cell = f"{row['Blur']}/{row['SNR']}"
        if cell not in cells:
            cells.append(cell)
        data.setdefault(row["Model"], {})[cell] = float(row["RMSE"])
    x = np.arange(len(cells))
    width = 0.8 / max(len(data), 1)
    fig, ax = plt.subplots(figsize=(1.8 + 1.4 * len(cells), 3.4))
    for i, (model, values) in enumerate(sorted(data.items())):
        heights = [values.get(c, np.nan) for c in cells]
        ax.bar(x + i * width, heights, width, label=model)
    ax.set_xticks(x + width * (len(data) - 1) / 2)
    ax.set_xticklabels(cells, fontsize=8)
    ax.set_ylabel("RMSE")
    ax.legend(fontsize=8)
    _finish(fig, path)
