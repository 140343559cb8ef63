"""SVG figures for sweep, time-history, budget and curve-error data."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps repeated runs byte-identical
_SVG_META = {"Date": None}
plt.rcParams["svg.hashsalt"] = "geomerr"


def _save(fig, path) -> Path:
    path = Path(path)
    try:
        fig.savefig(path, format="svg", metadata=_SVG_META)
    except OSError as exc:
        raise OSError(f"could not write figure {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def plot_time_histories(curves: dict, path, title: str = "", ylabel: str = r"$\|e\|_J$") -> Path:
    """One line per entry of `curves` mapping label -> (t, values)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, (t, y) in curves.items():
        ax.plot(t, y, label=label, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(series: dict, path, title: str = "", xlabel: str = r"$\delta$",
               ylabel: str = r"$\|e\|_J$") -> Path:
    """Scatter of (delta, error) per series with its least squares line.

    `series` maps label -> (delta, error, slope, intercept).
    """
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    for label, (x, y, slope, intercept) in series.items():
        x = np.asarray(x, float)
        pts = ax.plot(x, y, "o", mfc="none", label=label)[0]
        xs = np.linspace(min(0.0, x.min()), x.max(), 50)
        ax.plot(xs, slope * xs + intercept, "-", color=pts.get_color(), lw=1.0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_budget(budget, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name in ("D", "BG", "V1", "V2", "V3", "V4"):
        ax.plot(budget.t, getattr(budget, name), label=name, lw=1.0)
    ax.plot(budget.t, budget.residual, "k:", label="residual", lw=1.0)
    ax.set_xlabel("t")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, ncol=4)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_curve_errors(entries: dict, path) -> Path:
    """Location and derivative error magnitudes along the curve parameter."""
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(8.4, 3.6))
    for label, ce in entries.items():
        a0.plot(ce.s, np.hypot(*ce.location), label=label)
        a1.plot(ce.s, np.hypot(*ce.derivative), label=label)
    a0.set_xlabel(r"$\xi$")
    a0.set_ylabel(r"$|\Delta\Gamma|$")
    a1.set_xlabel(r"$\xi$")
    a1.set_ylabel(r"$|\Delta\Gamma'|$")
    for a in (a0, a1):
        a.grid(alpha=0.3)
        a.legend(frameon=False)
    fig.tight_layout()
    return _save(fig, path)
