"""SVG figures for runs, sweeps and convergence studies (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Fixed hash salt and no date stamp keep the SVG bytes reproducible.
_RC = {"svg.hashsalt": "maynowak-lab", "figure.figsize": (6.4, 4.0), "axes.grid": True}
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_norms(rows: Sequence, path: str | Path, title: str = "") -> Path:
    """Log-scale traces of the monitored norms against time."""
    t = [r.t for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.semilogy(t, [max(r.linf_u, 1e-300) for r in rows], label=r"$\|u\|_\infty$")
        ax.semilogy(t, [max(r.grad_v_lq, 1e-300) for r in rows], label=r"$\|\nabla v\|_q$")
        if any(r.linf_w is not None for r in rows):
            ax.semilogy(t, [r.linf_w if r.linf_w else float("nan") for r in rows], label=r"$\|w\|_\infty$")
        ax.set_xlabel("t")
        ax.legend()
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_masses(rows: Sequence, path: str | Path, title: str = "") -> Path:
    """Component masses and, when available, the exact mass curve of u + v."""
    t = [r.t for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(t, [r.mass_u for r in rows], label="mass u")
        ax.plot(t, [r.mass_v for r in rows], label="mass v")
        if any(r.mass_w is not None for r in rows):
            ax.plot(t, [r.mass_w if r.mass_w is not None else float("nan") for r in rows], label="mass w")
        ax.set_xlabel("t")
        ax.legend()
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_sweep(summary: Sequence[dict], path: str | Path) -> Path:
    """Peak of ``||u||_inf`` against alpha, one marker per run, coloured by class."""
    colours = {"Bounded": "tab:green", "Growing": "tab:orange", "BlowUp": "tab:red"}
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        seen = set()
        for row in summary:
            label = row["classification"]
            ax.semilogy(
                row["alpha"],
                max(row["peak_linf_u"], 1e-300),
                "o",
                color=colours.get(label, "tab:gray"),
                label=None if label in seen else label,
            )
            seen.add(label)
        ax.set_xlabel(r"$\alpha$")
        ax.set_ylabel(r"peak $\|u\|_\infty$")
        ax.legend()
        return _save(fig, path)


def plot_convergence(rows: Sequence, path: str | Path, title: str = "") -> Path:
    """Log-log error against resolution with a reference slope through the first point."""
    h = [r.h for r in rows]
    err = [r.error for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.loglog(h, err, "o-", label="error")
        orders = [r.observed_order for r in rows if r.observed_order is not None]
        if orders:
            p = round(orders[-1])
            ax.loglog(h, [err[0] * (x / h[0]) ** p for x in h], "--", label=f"slope {p}")
        ax.set_xlabel("h")
        ax.legend()
        if title:
            ax.set_title(title)
        return _save(fig, path)
