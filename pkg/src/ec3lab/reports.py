"""Figure rendering for the CLI report paths (written next to the CSV output)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import CrossingHit, SplittingStats
from .spectrum import GapScan
from .tunneling import BarrierProfile

_FIGSIZE = (6.0, 4.0)


def save_splitting_figure(stats: SplittingStats, order: int, path) -> None:
    """Percentile curves of the squared splitting vs N with the linear fit."""
    if order == 4:
        rows = [
            ("75-th percentile", [s.p75_sq4 for s in stats.per_n]),
            ("mean", [s.mean_sq4 for s in stats.per_n]),
            ("median", [s.med_sq4 for s in stats.per_n]),
            ("25-th percentile", [s.p25_sq4 for s in stats.per_n]),
        ]
        slope, intercept, label = stats.c4, stats.c4_intercept, "c4"
    elif order == 6:
        rows = [
            ("75-th percentile", [s.p75_sq6 for s in stats.per_n]),
            ("mean", [s.mean_sq6 for s in stats.per_n]),
            ("median", [s.med_sq6 for s in stats.per_n]),
            ("25-th percentile", [s.p25_sq6 for s in stats.per_n]),
        ]
        slope, intercept, label = stats.c6, stats.c6_intercept, "c6"
    else:
        raise ValueError("order must be 4 or 6")
    if np.isnan(intercept):
        intercept = 0.0
    ns = [s.n for s in stats.per_n]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for name, ys in rows:
        ax.plot(ns, ys, marker="o", markersize=3, linewidth=1, label=name)
    xs = np.linspace(0, max(ns), 50)
    ax.plot(
        xs,
        slope * xs + intercept,
        "k--",
        linewidth=1,
        label=f"{label} = {slope:.4g} (slope)",
    )
    ax.set_xlabel("N")
    ax.set_ylabel(f"squared order-{order} splitting")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_crossing_figure(hit: CrossingHit, path) -> None:
    """Two-panel level-crossing plot: both curves, and their signed difference."""
    lams = [row[0] for row in hit.curve]
    e1 = [row[1] for row in hit.curve]
    e2 = [row[2] for row in hit.curve]
    diff = [row[3] for row in hit.curve]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    ax1.plot(lams, e1, label="level 1 (solution)")
    ax1.plot(lams, e2, label="level 2 (lifted)")
    ax1.axvline(hit.lam_star, color="k", linestyle=":", linewidth=1)
    ax1.set_xlabel("coupling")
    ax1.set_ylabel("truncated energy")
    ax1.legend(fontsize=8)
    ax1.grid(True, alpha=0.3)
    ax2.plot(lams, diff, label="E1 - E2")
    ax2.plot(lams, [-d for d in diff], label="E2 - E1")
    ax2.axhline(0.0, color="k", linewidth=0.8)
    ax2.axvline(hit.lam_star, color="k", linestyle=":", linewidth=1)
    ax2.set_xlabel("coupling")
    ax2.set_ylabel("difference")
    ax2.legend(fontsize=8)
    ax2.grid(True, alpha=0.3)
    fig.suptitle(
        f"crossing at coupling {hit.lam_star:.4g}, distance n={hit.hamming_n}"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_gap_figure(scan: GapScan, path) -> None:
    s = [row[0] for row in scan.grid]
    gap = [row[3] for row in scan.grid]
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(s, gap, marker="o", markersize=3)
    ax.axvline(scan.argmin_s, color="k", linestyle=":", linewidth=1)
    ax.set_xlabel("schedule s")
    ax.set_ylabel("gap")
    ax.set_title(f"minimum gap {scan.min_gap:.4g} at s = {scan.argmin_s:.4f}")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_barrier_figure(profile: BarrierProfile, path) -> None:
    js = list(range(1, len(profile.mean_e) + 1))
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.plot(js, profile.mean_e, marker="o", markersize=3)
    ax.set_xlabel("flipped bits j")
    ax.set_ylabel("mean energy after j flips")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
