"""Optional matplotlib figures for CLI output (the CSV stays authoritative)."""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def moments_figure(path, ks, values, title: str, ylabel: str = "Re tr m_k / d") -> None:
    """Stem-style plot of a scalar moment or cumulant sequence against degree."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ks, values, "o-", lw=1)
    ax.set_xlabel("k")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def density_figure(path, xs, dens, eps: float, title: str = "") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(xs, dens, lw=1.2)
    ax.fill_between(xs, 0, dens, alpha=0.15)
    ax.set_xlabel("x")
    ax.set_ylabel(f"density (eps = {eps:g})")
    ax.set_ylim(bottom=0)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def trace_series(rows, d: int):
    """``(k, Re tr(m_k)/d)`` from ``k, i, j, re, im`` rows."""
    acc: dict = {}
    for k, i, j, re, _ in rows:
        if i == j:
            acc[k] = acc.get(k, 0.0) + re / d
    ks = sorted(acc)
    return np.array(ks), np.array([acc[k] for k in ks])
