"""Figure rendering for the command line report path.

All functions write PNG files and never open a window; the Agg backend
is forced so runs work on headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_ground_track", "plot_error_box", "plot_sweep"]


def plot_ground_track(path, truth_enu, estimates) -> None:
    """Plan view of the truth track and each method's estimate.

    ``estimates`` maps method name to an east/north/up trajectory.
    """
    fig, ax = plt.subplots(figsize=(7.0, 6.0))
    ax.plot(truth_enu.enu[:, 0], truth_enu.enu[:, 1], "k-", lw=2.0, label="truth")
    for name, traj in estimates.items():
        ax.plot(traj.enu[:, 0], traj.enu[:, 1], lw=1.0, label=name)
    ax.set_xlabel("east [m]")
    ax.set_ylabel("north [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_error_box(path, errors) -> None:
    """Box plot of horizontal-norm position error per method.

    ``errors`` maps method name to the per-epoch error norm series.
    """
    names = list(errors)
    data = [np.asarray(errors[n], dtype=float) for n in names]
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(names), 4.5))
    ax.boxplot(data, whis=(0, 100), showmeans=True)
    ax.set_xticks(range(1, len(names) + 1))
    ax.set_xticklabels(names)
    ax.set_ylabel("position error norm [m]")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(path, method, param, rows) -> None:
    """Metric-versus-value curve for a one-parameter sweep."""
    values = [r["value"] for r in rows]
    rms = [r["rms_m"] for r in rows]
    peak = [r["max_norm_m"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.plot(values, rms, "o-", label="rms")
    ax.plot(values, peak, "s--", label="max")
    if min(values) > 0 and max(values) / min(values) > 50:
        ax.set_xscale("log")
    ax.set_xlabel(f"{method}.{param}")
    ax.set_ylabel("position error [m]")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
