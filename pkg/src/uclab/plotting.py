"""Figures written next to sweep tables."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_sweep(rows, param, path):
    """Sharp and formula constants against the swept parameter (log scale), saved as PNG."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6), dpi=120)
    for key, style, label in (("sharp_constant", "o-", "sharp (lower bound)"),
                              ("formula_constant", "s--", "formula")):
        pts = [(r["value"], r[key]) for r in rows
               if isinstance(r.get(key), float) and math.isfinite(r[key]) and r[key] > 0]
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, style, label=label)
    ax.set_yscale("log")
    ax.set_xlabel(param)
    ax.set_ylabel("constant")
    ax.grid(True, which="both", alpha=0.3)
    if ax.lines:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
