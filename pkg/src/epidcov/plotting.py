"""Figures written next to the TSV reports."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update({
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
})


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_calibration(rows, path):
    """Nominal vs empirical level, one line per model, with the diagonal."""
    fig, ax = plt.subplots(figsize=(3.6, 3.2))
    models = sorted({r["model"] for r in rows})
    top = max(r["alpha"] for r in rows) * 1.1
    ax.plot([0, top], [0, top], color="0.6", lw=0.8, ls="--")
    for m in models:
        sub = [r for r in rows if r["model"] == m]
        ax.plot([r["alpha"] for r in sub], [r["alpha_hat"] for r in sub], "o-", label=m)
    ax.set_xlabel(r"nominal $\alpha$")
    ax.set_ylabel(r"empirical $\hat\alpha$")
    ax.legend(frameon=False)
    _finish(fig, path)


def plot_power(rows, path):
    fig, ax = plt.subplots(figsize=(3.6, 3.2))
    params = [r["param"] for r in rows]
    power = np.array([r["power"] for r in rows])
    R = rows[0]["replicates"]
    err = 1.96 * np.sqrt(power * (1 - power) / R)
    ax.errorbar(params, power, yerr=err, fmt="o-", capsize=2)
    ax.set_xlabel(f"{rows[0]['model']} parameter")
    ax.set_ylabel("empirical power")
    ax.set_ylim(-0.02, 1.02)
    _finish(fig, path)


def plot_adjacency(adj, path):
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(adj, cmap="Greys", interpolation="nearest", vmin=0, vmax=1)
    ax.set_xlabel("SNP")
    ax.set_ylabel("SNP")
    ax.set_title(f"{int(adj.sum()) // 2} epistatic pairs", fontsize=9)
    _finish(fig, path)
