"""Figure rendering for the aggregate reports.

Kept separate so nothing else pulls in matplotlib; figures are written
next to the summary CSVs they visualize.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_transition(rows, path):
    """Success probability vs log theta, one curve per p."""
    fig, ax = plt.subplots(figsize=(5, 3.4))
    by_p = {}
    for r in rows:
        by_p.setdefault(int(r["p"]), []).append(r)
    for p, group in sorted(by_p.items()):
        group = sorted(group, key=lambda r: float(r["log_theta_bin"]))
        x = [float(r["log_theta_bin"]) for r in group]
        y = [float(r["success_prob"]) for r in group]
        ax.plot(x, y, marker="o", ms=3.5, label=f"p={p}")
    ax.set_xlabel(r"$\log\,\theta$")
    ax.set_ylabel("success probability")
    ax.set_ylim(-0.05, 1.05)
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_heatmaps(rows, out_dir):
    """One success-probability heat map per (p, s): rows n, columns K."""
    groups = {}
    for r in rows:
        groups.setdefault((int(r["p"]), int(r["s"])), []).append(r)
    paths = []
    for (p, s), cells in sorted(groups.items()):
        ns = sorted({int(r["n"]) for r in cells})
        Ks = sorted({int(r["K"]) for r in cells})
        grid = np.full((len(ns), len(Ks)), np.nan)
        for r in cells:
            grid[ns.index(int(r["n"])), Ks.index(int(r["K"]))] = float(r["success_prob"])
        fig, ax = plt.subplots(figsize=(1.2 + 0.6 * len(Ks), 1.0 + 0.5 * len(ns)))
        im = ax.imshow(grid, origin="lower", vmin=0, vmax=1, cmap="viridis",
                       aspect="auto")
        ax.set_xticks(range(len(Ks)), [str(k) for k in Ks])
        ax.set_yticks(range(len(ns)), [str(n) for n in ns])
        ax.set_xlabel("K")
        ax.set_ylabel("n")
        ax.set_title(f"p={p}, s={s}")
        fig.colorbar(im, ax=ax, label="success prob")
        fig.tight_layout()
        path = f"{out_dir}/heatmap_p{p}_s{s}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths


def plot_table(rows, path):
    """Mean SHD vs n with one curve per K, faceted over p."""
    ps = sorted({int(r["p"]) for r in rows})
    fig, axes = plt.subplots(1, len(ps), figsize=(4.2 * len(ps), 3.2),
                             squeeze=False)
    for ax, p in zip(axes[0], ps):
        sub = [r for r in rows if int(r["p"]) == p]
        Ks = sorted({int(r["K"]) for r in sub})
        for K in Ks:
            pts = sorted((int(r["n"]), float(r["shd_mean"]), float(r["shd_std"]))
                         for r in sub if int(r["K"]) == K)
            ax.errorbar([x[0] for x in pts], [x[1] for x in pts],
                        yerr=[x[2] for x in pts], marker="o", ms=3.5,
                        capsize=2, label=f"K={K}")
        ax.set_xscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("SHD")
        ax.set_title(f"p={p}")
        ax.legend(frameon=False)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
