"""Figures for sweep and probe reports.

Rendering is optional; the CSV files stay the primary output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["publication_style", "plot_phase_transition", "plot_probe"]


def publication_style():
    plt.rcParams.update(
        {
            "font.size": 11,
            "axes.labelsize": 12,
            "axes.titlesize": 12,
            "legend.fontsize": 10,
            "axes.spines.top": False,
            "axes.spines.right": False,
            "savefig.dpi": 150,
            "savefig.bbox": "tight",
        }
    )


def plot_phase_transition(results, path, title=None):
    """Success rate (percent) against the measurement fraction, one line per sweep."""
    publication_style()
    fig, ax = plt.subplots(figsize=(6, 4))
    for res in results:
        xs = [p.n_bar for p in res.points]
        ys = [100.0 * p.success_rate for p in res.points]
        label = "rank (" + ",".join(str(r) for r in res.spec.rank) + ")"
        ax.plot(xs, ys, marker="o", ms=4, label=label)
    ax.set_xlabel(r"measurements $\bar n$ (% of $n_1 n_2 n_3$)")
    ax.set_ylabel("successful recovery (%)")
    ax.set_ylim(-3, 103)
    if results:
        shape = "x".join(str(n) for n in results[0].spec.shape)
        ax.set_title(title or f"{shape} tensors, {results[0].spec.solver.upper()}")
    ax.legend(frameon=False)
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_probe(result: dict, path):
    """Distribution of the empirical TRIC estimate per measurement count."""
    publication_style()
    fig, ax = plt.subplots(figsize=(6, 4))
    ms = [row["m"] for row in result["calibration"]]
    data = [[r["delta_hat"] for r in result["rows"] if r["m"] == m] for m in ms]
    ax.boxplot(data, positions=range(len(ms)), widths=0.5)
    ax.set_xticks(range(len(ms)))
    ax.set_xticklabels([str(m) for m in ms])
    ax.axhline(result["request"]["delta"], ls="--", lw=1, color="gray")
    ax.set_xlabel("m")
    ax.set_ylabel(r"$\hat\delta$ (lower bound)")
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
