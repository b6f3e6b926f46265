"""SVG figures: tiling, generator clusters and shell-sum decay."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from brennan.autfit import ClusterReport  # noqa: E402
from brennan.grafting import render_tiles  # noqa: E402
from brennan.polygon import BoundaryPolygon  # noqa: E402
from brennan.series import ShellSumTable, fit_decay  # noqa: E402

# fixed ids and no timestamp keep repeated runs diff-friendly
plt.rcParams["svg.hashsalt"] = "brennan"
_META = {"Date": None}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def plot_tiling(path, max_word_length: int = 4, polygon: BoundaryPolygon | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    for _, arcs in render_tiles(max_word_length):
        for arc in arcs:
            pts = arc.points(24)
            ax.plot(pts.real, pts.imag, color="0.35", lw=0.4)
    if polygon is not None:
        v = np.r_[polygon.vertices, polygon.vertices[:1]]
        ax.plot(v.real, v.imag, color="tab:red", lw=0.8, label=f"polygon, {len(polygon)} vertices")
        ax.legend(loc="upper right", fontsize=8)
    ax.set_aspect("equal")
    ax.set_title(f"tiles up to word length {max_word_length}")
    _save(fig, path)


def plot_cluster(path, report: ClusterReport, name: str) -> None:
    comps = np.array([r.components for r in report.results])
    main = report.main.components
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4.2))
    ax1.scatter(comps[:, 0], comps[:, 1], marker="x", color="tab:blue", label="small polygons")
    ax1.scatter([main[0]], [main[1]], marker="o", facecolors="none", edgecolors="tab:red", s=80, label="main")
    ax1.set_xlabel("Re lambda")
    ax1.set_ylabel("Im lambda")
    ax2.scatter(comps[:, 2], comps[:, 3], marker="x", color="tab:blue")
    ax2.scatter([main[2]], [main[3]], marker="o", facecolors="none", edgecolors="tab:red", s=80)
    ax2.set_xlabel("Re a")
    ax2.set_ylabel("Im a")
    ax1.legend(fontsize=8)
    fig.suptitle(f"generator {name}: fitted disk automorphisms")
    fig.tight_layout()
    _save(fig, path)


def plot_decay(path, tables: list[ShellSumTable], n_min: int = 6) -> None:
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for tab in tables:
        n = np.arange(tab.max_n + 1)
        ly = np.log(tab.sums)
        (pts,) = ax.plot(n, ly, "o", ms=4, label=f"p = {tab.p:.4g}")
        fit = fit_decay(tab, n_min)
        xs = np.array([n_min, tab.max_n])
        ax.plot(xs, fit.intercept + fit.slope * xs, "-", color=pts.get_color(), lw=1)
    ax.set_xlabel("n")
    ax.set_ylabel("log S_n")
    ax.legend(fontsize=8)
    ax.set_title(f"shell sums with fits for n >= {n_min}")
    _save(fig, path)
